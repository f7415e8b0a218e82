"""Inference post-processing: from raw detections of one page to a Page.

Stages, in order: class-wise NMS capped at ``roi_cap``; keep the best
``max(100, n_train_max + 50)``; drop detections whose best class
probability is below ``score_threshold``; split text lines from regions;
extract a baseline from every text-line mask; put each line into the
region it overlaps with maximum IoU (lines overlapping no region become
orphans).
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .baselines import LineGeometryConfig, mask_to_baseline
from .detections import Detection
from .errors import EmptyMask
from .geometry import BBox, BitMask, bbox_iou, mask_to_polygon
from .page_model import Page, Polygon, Region, TextLine
from .proposals import (DEFAULT_NMS_THRESHOLD, DEFAULT_ROI_CAP, DEFAULT_SCORE_THRESHOLD,
                        filter_by_score, nms_indices, select_rois)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    n_train_max: int
    nms_threshold: float = DEFAULT_NMS_THRESHOLD
    roi_cap: int = DEFAULT_ROI_CAP
    score_threshold: float = DEFAULT_SCORE_THRESHOLD
    line_geometry: LineGeometryConfig = field(default_factory=LineGeometryConfig)
    textline_label: str = "text-line"
    class_wise_nms: bool = True
    insertion_iou: str = "mask"  # or "box"

    def __post_init__(self):
        if self.roi_cap < 1:
            raise ValueError("roi_cap must be >= 1")
        if self.n_train_max < 0:
            raise ValueError("n_train_max must be >= 0")
        for name in ("nms_threshold", "score_threshold"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.insertion_iou not in ("mask", "box"):
            raise ValueError("insertion_iou must be 'mask' or 'box'")

    def flat(self) -> dict:
        """Flat key/value view, line geometry keys inlined."""
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "line_geometry"}
        out.update(asdict(self.line_geometry))
        return out

    @classmethod
    def from_flat(cls, values: Mapping[str, object]) -> "PipelineConfig":
        geo_names = {f.name for f in fields(LineGeometryConfig)}
        own = {f.name: f for f in fields(cls)}
        kwargs, geo = {}, {}
        for key, value in values.items():
            if key in geo_names:
                geo[key] = float(value)
            elif key in own and key != "line_geometry":
                kwargs[key] = _coerce(value, own[key].type)
            else:
                raise KeyError(f"unknown pipeline setting {key!r}")
        return cls(line_geometry=LineGeometryConfig(**geo), **kwargs)


def _coerce(value, type_name):
    if not isinstance(value, str):
        return value
    if type_name == "int":
        return int(value)
    if type_name == "float":
        return float(value)
    if type_name == "bool":
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    return value


# ---------------------------------------------------------------- stages

def nms_stage(detections: Sequence[Detection], config: PipelineConfig) -> list[Detection]:
    if not detections:
        return []
    boxes = np.array([d.box.as_tuple() for d in detections], dtype=float)
    scores = np.array([d.score for d in detections], dtype=float)
    classes = None
    if config.class_wise_nms:
        index = {label: i for i, label in enumerate(sorted({d.class_label for d in detections}))}
        classes = np.array([index[d.class_label] for d in detections])
    keep = nms_indices(boxes, scores, config.nms_threshold, config.roi_cap, classes)
    return [detections[i] for i in keep]


def roi_stage(detections: Sequence[Detection], config: PipelineConfig) -> list[Detection]:
    return select_rois(detections, config.n_train_max)


def score_stage(detections: Sequence[Detection], config: PipelineConfig) -> list[Detection]:
    return filter_by_score(detections, config.score_threshold)


STAGES = (nms_stage, roi_stage, score_stage)


@dataclass
class _Shape:
    """A mask cropped to its bounding box, for cheap pairwise IoU."""

    det: Detection
    x0: int
    y0: int
    bits: np.ndarray
    area: int

    @classmethod
    def of(cls, det: Detection, mask: BitMask) -> "_Shape":
        box = mask.bbox()
        if box is None:
            return cls(det, 0, 0, np.zeros((0, 0), dtype=bool), 0)
        x0, y0, x1, y1 = (int(v) for v in box.as_tuple())
        bits = mask.bits[y0:y1, x0:x1].copy()
        return cls(det, x0, y0, bits, int(bits.sum()))

    def iou(self, other: "_Shape") -> float:
        if self.area == 0 and other.area == 0:
            return 0.0
        h1, w1 = self.bits.shape
        h2, w2 = other.bits.shape
        x0, y0 = max(self.x0, other.x0), max(self.y0, other.y0)
        x1, y1 = min(self.x0 + w1, other.x0 + w2), min(self.y0 + h1, other.y0 + h2)
        inter = 0
        if x0 < x1 and y0 < y1:
            a = self.bits[y0 - self.y0:y1 - self.y0, x0 - self.x0:x1 - self.x0]
            b = other.bits[y0 - other.y0:y1 - other.y0, x0 - other.x0:x1 - other.x0]
            inter = int(np.count_nonzero(a & b))
        return inter / (self.area + other.area - inter)


def _outline(det: Detection, mask: BitMask, width: int, height: int) -> Optional[Polygon]:
    poly = det.polygon if det.polygon is not None else mask_to_polygon(mask)
    if poly is None:
        return None
    return poly.clamped(width, height)


def _best_region(line: _Shape, regions: Sequence[_Shape], mode: str) -> Optional[_Shape]:
    scored = []
    for reg in regions:
        iou = line.iou(reg) if mode == "mask" else bbox_iou(line.det.box, reg.det.box)
        if iou > 0:
            scored.append((-iou, -reg.det.score, reg.det.id, reg))
    if not scored:
        return None
    # ties: higher-scoring region, then smaller id
    return min(scored, key=lambda t: t[:3])[3]


def post_process(detections: Sequence[Detection], config: PipelineConfig,
                 image_dims: tuple[int, int], image_filename: str = "") -> Page:
    """Turn one page's raw detections into a Page."""
    width, height = image_dims
    dets = list(detections)
    for stage in STAGES:
        dets = stage(dets, config)
    region_shapes: list[_Shape] = []
    regions: dict[str, tuple[Detection, Polygon]] = {}
    line_items: list[tuple[_Shape, TextLine]] = []
    for det in dets:
        mask = det.mask_on(width, height)
        poly = _outline(det, mask, width, height)
        if poly is None or len(poly) < 3:
            log.warning("detection %s has an empty mask, dropped", det.id)
            continue
        if det.class_label == config.textline_label:
            try:
                baseline = mask_to_baseline(mask, config.line_geometry)
            except EmptyMask:
                log.warning("text line %s has an empty mask, dropped", det.id)
                continue
            line_items.append((_Shape.of(det, mask), TextLine(det.id, poly, baseline, det.score)))
        else:
            region_shapes.append(_Shape.of(det, mask))
            regions[det.id] = (det, poly)
    assigned: dict[str, list[TextLine]] = {rid: [] for rid in regions}
    orphans: list[TextLine] = []
    for shape, line in line_items:
        best = _best_region(shape, region_shapes, config.insertion_iou)
        if best is None:
            orphans.append(line)
        else:
            assigned[best.det.id].append(line)
    out_regions = []
    for rid, (det, poly) in regions.items():
        lines = sorted(assigned[rid], key=lambda ln: (ln.polygon.bounds[1], ln.polygon.bounds[0], ln.id))
        out_regions.append(Region(rid, det.class_label, poly, tuple(lines), det.score))
    out_regions.sort(key=lambda r: (r.polygon.bounds[1], r.polygon.bounds[0], r.id))
    return Page(image_filename, width, height, tuple(out_regions), tuple(orphans))


def page_to_detections(page: Page, config: PipelineConfig, page_id: Optional[str] = None) -> list[Detection]:
    """Express a Page as detections with probability 1 (regions and text lines)."""
    pid = page_id or page.page_id
    out = []
    for r in page.regions:
        out.append(Detection(r.id, pid, {r.class_label: 1.0}, BBox(*r.polygon.bounds), polygon=r.polygon))
    for ln in page.lines():
        out.append(Detection(ln.id, pid, {config.textline_label: 1.0}, BBox(*ln.polygon.bounds),
                             polygon=ln.polygon))
    return out


def with_line_geometry(config: PipelineConfig, **changes) -> PipelineConfig:
    return replace(config, line_geometry=replace(config.line_geometry, **changes))
