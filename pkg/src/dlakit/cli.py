"""Command-line interface.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .baselines import LineGeometryConfig, baseline_to_polygon, polygon_to_baseline
from .detections import DetectionSet, write_detections, read_detections
from .errors import DLAError
from .geometry import paint_label_map, write_pgm
from .metrics import EvalConfig, EvaluationReport, build_class_order, evaluate_page_pair
from .page_model import (Page, corpus_stats, max_objects_per_page, merge_stats, read_page,
                         write_page)
from .pipeline import PipelineConfig, post_process
from .synth import SynthSpec, generate_synthetic_page

log = logging.getLogger("dlakit")

EVAL_KEYS = ("tolerance", "step", "include_background", "skip_absent_classes")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- config

def read_config_file(path: Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _print_config(values: dict, stream=None) -> None:
    stream = stream or sys.stderr
    print("# resolved config", file=stream)
    for key in sorted(values):
        value = values[key]
        if isinstance(value, bool):
            value = str(value).lower()
        print(f"{key} = {value}", file=stream)


def _cli_values(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _pipeline_config(args) -> PipelineConfig:
    values = read_config_file(args.config) if args.config else {}
    values = {k: v for k, v in values.items() if k not in EVAL_KEYS}
    values.update(_cli_values(args, ("n_train_max", "nms_threshold", "roi_cap", "score_threshold",
                                     "textline_label", "insertion_iou", "offset_above",
                                     "offset_below", "resample_step", "simplify_epsilon")))
    if args.cross_class_nms:
        values["class_wise_nms"] = False
    if "n_train_max" not in values:
        raise UsageError("n_train_max is required (--n-train-max or config file); "
                         "`dlakit stats` on the training pages reports it")
    try:
        return PipelineConfig.from_flat(values)
    except KeyError as exc:
        raise UsageError(str(exc)) from exc
    except ValueError as exc:
        raise UsageError(f"bad config value: {exc}") from exc


def _eval_config(args) -> EvalConfig:
    values = read_config_file(args.config) if args.config else {}
    values = {k: v for k, v in values.items() if k in EVAL_KEYS}
    if args.tolerance is not None:
        values["tolerance"] = args.tolerance
    if args.step is not None:
        values["step"] = args.step
    if args.exclude_background:
        values["include_background"] = "false"
    if args.skip_absent_classes:
        values["skip_absent_classes"] = "true"
    try:
        tol = values.get("tolerance", "auto")
        tol = tol if tol == "auto" else float(tol)
        return EvalConfig(
            tolerance=tol,
            step=float(values.get("step", 5.0)),
            include_background=str(values.get("include_background", "true")).lower() in ("1", "true", "yes"),
            skip_absent_classes=str(values.get("skip_absent_classes", "false")).lower() in ("1", "true", "yes"),
        )
    except ValueError as exc:
        raise UsageError(f"bad config value: {exc}") from exc


def _line_geometry(args) -> LineGeometryConfig:
    return LineGeometryConfig(**{k: v for k, v in _cli_values(
        args, ("offset_above", "offset_below", "resample_step", "simplify_epsilon")).items()})


# ---------------------------------------------------------------- helpers

def _page_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise DLAError(f"not a directory: {directory}")
    return sorted(p for p in directory.rglob("*.xml") if p.is_file())


def _map(fn, items, jobs: int):
    """Ordered map, in worker processes when ``jobs > 1``."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _eval_task(task):
    gt, hyp, class_order, config, dump_dir = task
    ev = evaluate_page_pair(gt, hyp, class_order, config)
    if dump_dir is not None:
        for tag, page in (("gt", gt), ("hyp", hyp)):
            write_pgm(Path(dump_dir) / f"{gt.page_id}.{tag}.pgm",
                      paint_label_map(page.regions, page.width, page.height, class_order))
    return ev


def _post_task(task):
    page_id, dets, dims, image, config, out_dir = task
    page = post_process(dets, config, dims, image)
    write_page(page, Path(out_dir) / f"{page_id}.xml")
    return page_id, len(page.regions), len(page.lines())


# ---------------------------------------------------------------- commands

def cmd_eval(args) -> int:
    config = _eval_config(args)
    _print_config({**config.__dict__, "gt_dir": args.gt_dir, "hyp_dir": args.hyp_dir})
    gt_files = _page_files(args.gt_dir)
    if not gt_files:
        raise DLAError(f"no PAGE files under {args.gt_dir}")
    gt_pages = _map(read_page, gt_files, args.jobs)
    hyp_pages = []
    for path, gt in zip(gt_files, gt_pages):
        hyp_path = args.hyp_dir / path.relative_to(args.gt_dir)
        if hyp_path.exists():
            hyp_pages.append(read_page(hyp_path))
        else:
            log.warning("no hypothesis for %s; scored as an empty page", path.name)
            hyp_pages.append(Page(gt.image_filename, gt.width, gt.height))
    if args.classes:
        class_order = {c: i for i, c in enumerate(args.classes.split(","), start=1)}
    else:
        class_order = build_class_order(r.class_label for p in (*gt_pages, *hyp_pages) for r in p.regions)
    if args.dump_pgm:
        args.dump_pgm.mkdir(parents=True, exist_ok=True)
    tasks = [(g, h, class_order, config, args.dump_pgm) for g, h in zip(gt_pages, hyp_pages)]
    evaluations = _map(_eval_task, tasks, args.jobs)
    report = EvaluationReport.from_pages(evaluations, class_order, config)
    text = report.to_json() if args.format == "json" else report.to_text()
    if args.output:
        args.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_post_process(args) -> int:
    config = _pipeline_config(args)
    _print_config({**config.flat(), "detections": args.detections, "out": args.out})
    dset = read_detections(args.detections)
    args.out.mkdir(parents=True, exist_ok=True)
    tasks = []
    for page_id in dset.page_ids():
        if page_id in dset.pages:
            w, h, image = dset.pages[page_id]
        elif args.width and args.height:
            w, h, image = args.width, args.height, page_id
        else:
            raise DLAError(f"no image size for page {page_id!r} (@page record or --width/--height)")
        tasks.append((page_id, dset.detections.get(page_id, []), (w, h), image, config, args.out))
    for page_id, n_regions, n_lines in _map(_post_task, tasks, args.jobs):
        print(f"{page_id}\tregions={n_regions}\tlines={n_lines}")
    return 0


def cmd_stats(args) -> int:
    _print_config({"page_dirs": " ".join(map(str, args.page_dirs))})
    tables = []
    for directory in args.page_dirs:
        files = _page_files(directory)
        pages = _map(read_page, files, args.jobs)
        tables.append((directory, corpus_stats(pages), len(pages), max_objects_per_page(pages)))
    total = merge_stats(*(t[1] for t in tables))
    for directory, table, n_pages, n_max in tables:
        if len(tables) > 1:
            print(f"# {directory}")
        print("# label regions lines")
        for label, (n_reg, n_lines) in table.items():
            print(f"{label} {n_reg} {n_lines}")
        print(f"# pages {n_pages}")
        print(f"# max_objects_per_page {n_max}")
    if len(tables) > 1:
        print("# total")
        for label, (n_reg, n_lines) in total.items():
            print(f"{label} {n_reg} {n_lines}")
    return 0


def cmd_synth(args) -> int:
    classes = tuple(c for c in args.classes.split(",") if c)
    spec = SynthSpec(n_regions=args.regions, lines_per_region=args.lines, classes=classes,
                     jitter=args.jitter, n_false_positives=args.false_positives,
                     n_false_negatives=args.false_negatives, width=args.width, height=args.height,
                     line_geometry=_line_geometry(args))
    _print_config({"seed": args.seed, "pages": args.pages, **{
        k: v for k, v in spec.__dict__.items() if k != "line_geometry"}, **spec.line_geometry.__dict__})
    gt_dir = args.out / "gt"
    gt_dir.mkdir(parents=True, exist_ok=True)
    dset = DetectionSet()
    pages = []
    for i in range(args.pages):
        page_id = f"page_{i:04d}"
        page, dets = generate_synthetic_page(args.seed * 100003 + i, spec, page_id)
        write_page(page, gt_dir / f"{page_id}.xml")
        dset.pages[page_id] = (page.width, page.height, page.image_filename)
        dset.detections[page_id] = dets
        pages.append(page)
    write_detections(dset, args.out / "detections.tsv")
    (args.out / "pipeline.cfg").write_text(
        f"n_train_max = {max_objects_per_page(pages)}\ntextline_label = {spec.textline_label}\n",
        encoding="utf-8")
    print(f"wrote {args.pages} pages to {args.out}")
    return 0


def cmd_lines(args) -> int:
    geo = _line_geometry(args)
    _print_config({"mode": args.mode, **geo.__dict__})
    page = read_page(args.input)

    def convert(line):
        if args.mode == "to-polygon":
            if line.baseline is None:
                return line
            return replace(line, polygon=baseline_to_polygon(line.baseline, geo))
        return replace(line, baseline=polygon_to_baseline(line.polygon, geo, (page.width, page.height)))

    regions = tuple(replace(r, lines=tuple(convert(ln) for ln in r.lines)) for r in page.regions)
    out = replace(page, regions=regions, orphan_lines=tuple(convert(ln) for ln in page.orphan_lines))
    write_page(out, args.output)
    print(f"converted {len(out.lines())} lines -> {args.output}")
    return 0


# ---------------------------------------------------------------- parser

def _add_geometry(p):
    p.add_argument("--offset-above", type=float, help="pixels above the baseline (default 16)")
    p.add_argument("--offset-below", type=float, help="pixels below the baseline (default 4)")
    p.add_argument("--resample-step", type=float, help="default 5")
    p.add_argument("--simplify-epsilon", type=float, help="Douglas-Peucker tolerance (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dlakit", description="Document layout analysis post-processing and evaluation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="score hypothesis PAGE files against ground truth")
    p.add_argument("gt_dir", type=Path)
    p.add_argument("hyp_dir", type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--tolerance", help="baseline tolerance in px, or 'auto'")
    p.add_argument("--step", type=float, help="baseline normalization step in px (default 5)")
    p.add_argument("--exclude-background", action="store_true")
    p.add_argument("--skip-absent-classes", action="store_true")
    p.add_argument("--classes", help="comma-separated class order (index 1..K-1)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--output", type=Path)
    p.add_argument("--dump-pgm", type=Path, help="write label maps as PGM into this directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("post-process", help="detections file -> PAGE files")
    p.add_argument("detections", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--config", type=Path)
    p.add_argument("--n-train-max", type=int)
    p.add_argument("--nms-threshold", type=float)
    p.add_argument("--roi-cap", type=int)
    p.add_argument("--score-threshold", type=float)
    p.add_argument("--textline-label")
    p.add_argument("--cross-class-nms", action="store_true")
    p.add_argument("--insertion-iou", choices=("mask", "box"))
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--jobs", type=int, default=1)
    _add_geometry(p)
    p.set_defaults(func=cmd_post_process)

    p = sub.add_parser("stats", help="regions and lines per class label")
    p.add_argument("page_dirs", type=Path, nargs="+")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="write synthetic ground truth and detections")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--pages", type=int, default=1)
    p.add_argument("--regions", type=int, default=4)
    p.add_argument("--lines", type=int, default=3)
    p.add_argument("--classes", default="paragraph,marginalia")
    p.add_argument("--jitter", type=int, default=0)
    p.add_argument("--false-positives", type=int, default=0)
    p.add_argument("--false-negatives", type=int, default=0)
    p.add_argument("--width", type=int, default=1000)
    p.add_argument("--height", type=int, default=1400)
    _add_geometry(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("lines", help="regenerate line polygons or baselines of a PAGE file")
    p.add_argument("mode", choices=("to-polygon", "to-baseline"))
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    _add_geometry(p)
    p.set_defaults(func=cmd_lines)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DLAError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
