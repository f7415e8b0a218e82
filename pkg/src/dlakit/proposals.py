"""Region-proposal geometry: anchors, box deltas, NMS and RoI selection."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .errors import NonPositiveAnchor
from .geometry import BBox

# anchor configuration used for every dataset in the reference experiments
DEFAULT_ANCHOR_SCALES = (32, 64, 128, 256, 512)
DEFAULT_ANCHOR_RATIOS = ("1:1", "1:2", "2:1")
DEFAULT_ROI_CAP = 1000
DEFAULT_SCORE_THRESHOLD = 0.5
DEFAULT_NMS_THRESHOLD = 0.5


@dataclass(frozen=True)
class AnchorShape:
    width: float
    height: float
    scale: float
    ratio: str  # "h:w"


@dataclass(frozen=True)
class ScoredBox:
    box: BBox
    score: float
    class_index: int = 0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class BoxDelta:
    dx: float
    dy: float
    dw: float
    dh: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.dx, self.dy, self.dw, self.dh)):
            raise ValueError(f"non-finite delta {self}")


RatioLike = Union[str, float, tuple[float, float]]


def _parse_ratio(ratio: RatioLike) -> tuple[float, str]:
    if isinstance(ratio, str):
        h, w = ratio.split(":")
        return float(h) / float(w), ratio
    if isinstance(ratio, tuple):
        h, w = ratio
        return float(h) / float(w), f"{h:g}:{w:g}"
    fr = Fraction(ratio).limit_denominator(1000)
    return float(ratio), f"{fr.numerator}:{fr.denominator}"


def anchor_shapes(scales: Iterable[float] = DEFAULT_ANCHOR_SCALES,
                  ratios: Iterable[RatioLike] = DEFAULT_ANCHOR_RATIOS) -> list[AnchorShape]:
    """One shape per (scale, ratio); ratio is height over width, area is scale**2."""
    scales = list(dict.fromkeys(scales))
    parsed = list(dict.fromkeys(_parse_ratio(r) for r in ratios))
    if not scales or not parsed:
        raise ValueError("need at least one scale and one ratio")
    out = []
    for s in scales:
        for r, label in parsed:
            root = math.sqrt(r)
            out.append(AnchorShape(width=s / root, height=s * root, scale=float(s), ratio=label))
    return out


def anchor_grid(shapes: Sequence[AnchorShape], width: int, height: int, stride: int) -> list[BBox]:
    """Anchors centred on every stride cell, row by row, all shapes per centre.

    Cells are counted as ``ceil(size / stride)`` (at least one per axis).
    Anchors crossing the border are kept; see :func:`overhanging`.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    nx = max(1, math.ceil(width / stride))
    ny = max(1, math.ceil(height / stride))
    out = []
    for j in range(ny):
        cy = j * stride + stride / 2.0
        for i in range(nx):
            cx = i * stride + stride / 2.0
            for s in shapes:
                out.append(BBox(cx - s.width / 2, cy - s.height / 2, cx + s.width / 2, cy + s.height / 2))
    return out


def overhanging(boxes: Iterable[BBox], width: float, height: float) -> list[bool]:
    return [b.x0 < 0 or b.y0 < 0 or b.x1 > width or b.y1 > height for b in boxes]


def encode_delta(anchor: BBox, target: BBox) -> BoxDelta:
    """Centre offsets in anchor units and log size ratios."""
    if anchor.width <= 0 or anchor.height <= 0:
        raise NonPositiveAnchor(f"anchor {anchor} has no area")
    if target.width <= 0 or target.height <= 0:
        raise ValueError(f"target {target} has no area")
    acx, acy = anchor.center
    tcx, tcy = target.center
    return BoxDelta(
        dx=(tcx - acx) / anchor.width,
        dy=(tcy - acy) / anchor.height,
        dw=math.log(target.width / anchor.width),
        dh=math.log(target.height / anchor.height),
    )


def decode_delta(anchor: BBox, delta: BoxDelta, clip: Optional[tuple[float, float]] = None) -> BBox:
    """Inverse of :func:`encode_delta`; ``clip=(width, height)`` clips to the image."""
    if anchor.width <= 0 or anchor.height <= 0:
        raise NonPositiveAnchor(f"anchor {anchor} has no area")
    acx, acy = anchor.center
    cx = acx + delta.dx * anchor.width
    cy = acy + delta.dy * anchor.height
    w = anchor.width * math.exp(delta.dw)
    h = anchor.height * math.exp(delta.dh)
    box = BBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
    if clip is not None:
        box = box.clipped(*clip)
    return box


def nms_indices(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float,
                cap: Optional[int] = None, classes: Optional[np.ndarray] = None) -> list[int]:
    """Greedy NMS over ``(N, 4)`` xyxy boxes; returns kept indices by descending score.

    Equal scores are visited in input order. A box is kept iff its IoU with
    every already-kept box (of the same class, when ``classes`` is given) is
    at most ``iou_threshold``.
    """
    boxes = np.asarray(boxes, dtype=float).reshape(-1, 4)
    scores = np.asarray(scores, dtype=float)
    n = len(scores)
    if n == 0:
        return []
    x0, y0, x1, y1 = boxes.T
    areas = (x1 - x0) * (y1 - y0)
    order = np.lexsort((np.arange(n), -scores))
    suppressed = np.zeros(n, dtype=bool)
    keep: list[int] = []
    for pos, i in enumerate(order):
        if suppressed[i]:
            continue
        keep.append(int(i))
        if cap is not None and len(keep) >= cap:
            break
        rest = order[pos + 1:]
        if classes is not None:
            rest = rest[classes[rest] == classes[i]]
        rest = rest[~suppressed[rest]]
        if rest.size == 0:
            continue
        iw = np.minimum(x1[i], x1[rest]) - np.maximum(x0[i], x0[rest])
        ih = np.minimum(y1[i], y1[rest]) - np.maximum(y0[i], y0[rest])
        inter = np.maximum(0.0, iw) * np.maximum(0.0, ih)
        union = areas[i] + areas[rest] - inter
        with np.errstate(divide="ignore", invalid="ignore"):
            iou = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
        suppressed[rest[iou > iou_threshold]] = True
    return keep


def nms(boxes: Sequence[ScoredBox], iou_threshold: float = DEFAULT_NMS_THRESHOLD,
        cap: int = DEFAULT_ROI_CAP, class_wise: bool = True) -> list[ScoredBox]:
    """Greedy non-maximal suppression, truncated to ``cap`` survivors.

    By default boxes only suppress boxes of their own class.
    """
    if cap < 1:
        raise ValueError("cap must be positive")
    if not boxes:
        return []
    arr = np.array([b.box.as_tuple() for b in boxes], dtype=float)
    scores = np.array([b.score for b in boxes], dtype=float)
    classes = np.array([b.class_index for b in boxes]) if class_wise else None
    return [boxes[i] for i in nms_indices(arr, scores, iou_threshold, cap, classes)]


def rois_for(n_train_max: int) -> int:
    """Number of RoIs passed on: ``max(100, n + 50)``."""
    if n_train_max < 0:
        raise ValueError("n_train_max must be nonnegative")
    return max(100, n_train_max + 50)


def select_rois(candidates: Sequence, n_train_max: int) -> list:
    """The best ``max(100, n_train_max + 50)`` candidates by score (stable on ties)."""
    m = rois_for(n_train_max)
    return sorted(candidates, key=lambda c: -c.score)[:m]


def filter_by_score(detections: Iterable, threshold: float = DEFAULT_SCORE_THRESHOLD) -> list:
    """Drop detections whose best class probability is strictly below ``threshold``."""
    return [d for d in detections if d.score >= threshold]


def combine_losses(l_rpn: float, l_r: float, l_bb: float, l_mask: float,
                   lambda_rpn: float = 1.0, lambda_r: float = 1.0,
                   lambda_bb: float = 1.0, lambda_mask: float = 1.0) -> float:
    return lambda_rpn * l_rpn + lambda_r * l_r + lambda_bb * l_bb + lambda_mask * l_mask
