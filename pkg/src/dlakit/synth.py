"""Synthetic layouts with matching detections, for testing against known targets.

Pages hold a column of rectangular regions, each with horizontal-ish text
lines. All coordinates are integers, so PAGE round trips are exact. A strip
along the right border is kept free for injected false positives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import LineGeometryConfig, baseline_to_polygon
from .detections import Detection
from .geometry import BBox
from .page_model import Baseline, Page, Polygon, Region, TextLine

MARGIN = 20
FP_STRIP = 120
LINE_GAP = 10


@dataclass(frozen=True)
class SynthSpec:
    n_regions: int = 4
    lines_per_region: int = 3
    classes: tuple[str, ...] = ("paragraph", "marginalia")
    jitter: int = 0
    n_false_positives: int = 0
    n_false_negatives: int = 0
    width: int = 1000
    height: int = 1400
    textline_label: str = "text-line"
    line_geometry: LineGeometryConfig = field(default_factory=LineGeometryConfig)

    def __post_init__(self):
        for name in ("n_regions", "lines_per_region", "jitter", "n_false_positives", "n_false_negatives"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.classes:
            raise ValueError("need at least one region class")
        if self.n_false_negatives > self.n_regions:
            raise ValueError("more false negatives than regions")


def _class_probs(rng, label: str, labels: list[str]) -> dict[str, float]:
    p = round(float(rng.uniform(0.7, 1.0)), 3)
    others = [lb for lb in labels if lb != label]
    rest = round((1.0 - p) / max(1, len(others)) * 0.9, 4)
    probs = {label: p}
    probs.update({lb: rest for lb in others})
    return probs


def _jittered(poly: Polygon, rng, jitter: int, width: int, height: int) -> Polygon:
    if jitter == 0:
        return poly
    d = rng.integers(-jitter, jitter + 1, size=(len(poly), 2))
    pts = np.asarray(poly.points) + d
    pts[:, 0] = np.clip(pts[:, 0], 0, width)
    pts[:, 1] = np.clip(pts[:, 1], 0, height)
    return Polygon(pts.tolist())


def _rect(x0, y0, x1, y1) -> Polygon:
    return Polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def _box(poly: Polygon) -> BBox:
    return BBox(*poly.bounds)


def generate_synthetic_page(seed: int, spec: SynthSpec = SynthSpec(),
                            page_id: str = "synth") -> tuple[Page, list[Detection]]:
    """Ground-truth page and a detection set derived from it.

    Detections copy every region and line (vertices moved by up to ``jitter``
    px), drop the first ``n_false_negatives`` regions and add
    ``n_false_positives`` regions in the free right-hand strip. Same seed,
    same output.
    """
    rng = np.random.default_rng(seed)
    geo = spec.line_geometry
    pitch = int(np.ceil(geo.offset_above + geo.offset_below)) + LINE_GAP
    usable_h = spec.height - 2 * MARGIN
    slot = usable_h // max(1, spec.n_regions)
    needed = spec.lines_per_region * pitch + 2 * LINE_GAP
    if spec.n_regions and slot - LINE_GAP < needed:
        raise ValueError(f"page too small: {spec.n_regions} regions of {spec.lines_per_region} lines")
    right_limit = spec.width - FP_STRIP - MARGIN
    if right_limit - MARGIN < 100:
        raise ValueError("page too narrow")
    labels = list(dict.fromkeys([*spec.classes, spec.textline_label]))

    regions: list[Region] = []
    dets: list[Detection] = []
    region_dets: list[Detection] = []
    for i in range(spec.n_regions):
        label = spec.classes[int(rng.integers(len(spec.classes)))]
        top = MARGIN + i * slot
        h = int(rng.integers(needed, slot - LINE_GAP + 1))
        x0 = int(rng.integers(MARGIN, MARGIN + 40))
        x1 = int(rng.integers(max(x0 + 100, right_limit - 200), right_limit + 1))
        rid = f"{page_id}_r{i}"
        lines = []
        for k in range(spec.lines_per_region):
            y = top + LINE_GAP + int(np.ceil(geo.offset_above)) + k * pitch
            lx0 = x0 + int(rng.integers(5, 20))
            lx1 = x1 - int(rng.integers(5, 20))
            n_pts = int(rng.integers(2, 5))
            xs = np.linspace(lx0, lx1, n_pts).round().astype(int)
            ys = y + rng.integers(-2, 3, size=n_pts)
            baseline = Baseline(zip(xs.tolist(), ys.tolist()))
            polygon = baseline_to_polygon(baseline, geo).rounded()
            lines.append(TextLine(f"{page_id}_l{i}_{k}", polygon, baseline))
        region = Region(rid, label, _rect(x0, top, x1, top + h), tuple(lines))
        regions.append(region)
        probs = _class_probs(rng, label, labels)
        poly = _jittered(region.polygon, rng, spec.jitter, spec.width, spec.height)
        region_dets.append(Detection(rid, page_id, probs, _box(poly), polygon=poly))
        for ln in lines:
            poly = _jittered(ln.polygon, rng, spec.jitter, spec.width, spec.height)
            dets.append(Detection(ln.id, page_id, _class_probs(rng, spec.textline_label, labels),
                                  _box(poly), polygon=poly))
    dets = region_dets[spec.n_false_negatives:] + dets

    if spec.n_false_positives:
        fp_slot = usable_h // spec.n_false_positives
        for j in range(spec.n_false_positives):
            label = spec.classes[int(rng.integers(len(spec.classes)))]
            top = MARGIN + j * fp_slot
            poly = _rect(spec.width - FP_STRIP, top, spec.width - MARGIN,
                         top + max(10, min(fp_slot - LINE_GAP, 200)))
            dets.append(Detection(f"{page_id}_fp{j}", page_id, _class_probs(rng, label, labels),
                                  _box(poly), polygon=poly))

    page = Page(f"{page_id}.png", spec.width, spec.height, tuple(regions))
    return page, dets


def touching_regions_page(page_id: str = "touching") -> tuple[Page, list[Detection]]:
    """Two same-class regions sharing an edge, one text line each."""
    geo = LineGeometryConfig()
    regions, dets = [], []
    for i, (top, bottom) in enumerate(((100, 300), (300, 500))):
        rid = f"{page_id}_r{i}"
        baseline = Baseline([(120, top + 100), (780, top + 100)])
        line = TextLine(f"{page_id}_l{i}", baseline_to_polygon(baseline, geo).rounded(), baseline)
        region = Region(rid, "paragraph", _rect(100, top, 800, bottom), (line,))
        regions.append(region)
        dets.append(Detection(rid, page_id, {"paragraph": 0.95 - 0.05 * i}, _box(region.polygon),
                              polygon=region.polygon))
        dets.append(Detection(line.id, page_id, {"text-line": 0.9}, _box(line.polygon), polygon=line.polygon))
    return Page(f"{page_id}.png", 900, 600, tuple(regions)), dets
