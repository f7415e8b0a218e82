"""Evaluation: pixel Jaccard indices and baseline precision/recall/F1.

Region metrics use a corpus-level confusion matrix ``counts[i, j]`` =
pixels of true class ``i`` predicted as ``j``, class 0 being background.
Per-class IoU is ``eta_ii / (tau_i + sum_j eta_ji - eta_ii)`` with
``tau_i`` the row sum.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .baselines import INTERLINE_FALLBACK, estimate_interline, normalize_baseline
from .errors import DegenerateBaseline, DimensionMismatch, EmptyAccumulator, LabelOutOfRange
from .geometry import LabelMap, paint_label_map
from .page_model import Baseline, Page

BACKGROUND = "background"


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (counts < 0).any():
            raise ValueError("negative counts")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def zeros(cls, k: int) -> "ConfusionMatrix":
        return cls(np.zeros((k, k), dtype=np.int64))

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def tau(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        """Sum of two accumulators; associative and commutative."""
        if other.k != self.k:
            raise DimensionMismatch(f"K differs: {self.k} vs {other.k}")
        return ConfusionMatrix(self.counts + other.counts)

    __add__ = merge

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.counts.shape == other.counts.shape and bool((self.counts == other.counts).all())

    __hash__ = None


def accumulate_confusion(gt: LabelMap, hyp: LabelMap, acc: ConfusionMatrix) -> ConfusionMatrix:
    g = np.asarray(gt.labels)
    h = np.asarray(hyp.labels)
    if g.shape != h.shape:
        raise DimensionMismatch(f"label maps differ in size: {g.shape} vs {h.shape}")
    k = acc.k
    for name, arr in (("gt", g), ("hyp", h)):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise LabelOutOfRange(f"{name} label outside [0, {k})")
    flat = g.ravel().astype(np.int64) * k + h.ravel()
    return acc.merge(ConfusionMatrix(np.bincount(flat, minlength=k * k).reshape(k, k)))


def class_iou(acc: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-class IoU and a flag telling which classes have a nonzero denominator."""
    c = acc.counts.astype(float)
    inter = np.diag(c)
    denom = c.sum(axis=1) + c.sum(axis=0) - inter
    present = denom > 0
    iou = np.divide(inter, denom, out=np.zeros_like(inter), where=present)
    return iou, present


def _selected(acc: ConfusionMatrix, include_background: bool) -> slice:
    return slice(0 if include_background else 1, acc.k)


def mean_iou(acc: ConfusionMatrix, include_background: bool = True,
             skip_absent: bool = False) -> float:
    """Mean Jaccard index over the K classes.

    Classes absent from both ground truth and hypothesis score 0 and stay in
    K unless ``skip_absent`` drops them.
    """
    iou, present = class_iou(acc)
    sel = _selected(acc, include_background)
    iou, present = iou[sel], present[sel]
    if skip_absent:
        iou = iou[present]
    if iou.size == 0:
        return 0.0
    return float(iou.sum() / iou.size)


def fw_iou(acc: ConfusionMatrix, include_background: bool = True) -> float:
    """Frequency-weighted Jaccard index; each class IoU weighted by its pixel count."""
    iou, _ = class_iou(acc)
    sel = _selected(acc, include_background)
    tau = acc.tau[sel].astype(float)
    total = tau.sum()
    if total <= 0:
        raise EmptyAccumulator("no ground-truth pixels")
    return float((tau * iou[sel]).sum() / total)


# ---------------------------------------------------------------- baselines

TOLERANCE_FACTOR = 0.25
TOLERANCE_MIN = 10.0
TOLERANCE_MAX = 30.0


@dataclass(frozen=True)
class BaselineScore:
    matched_hyp_points: int
    total_hyp_points: int
    matched_gt_points: int
    total_gt_points: int
    tolerances: tuple[float, ...] = ()

    @staticmethod
    def _ratio(num, den, other_den):
        if den == 0:
            return 1.0 if other_den == 0 else 0.0
        return num / den

    @property
    def precision(self) -> float:
        return self._ratio(self.matched_hyp_points, self.total_hyp_points, self.total_gt_points)

    @property
    def recall(self) -> float:
        return self._ratio(self.matched_gt_points, self.total_gt_points, self.total_hyp_points)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def merge(self, other: "BaselineScore") -> "BaselineScore":
        return BaselineScore(
            self.matched_hyp_points + other.matched_hyp_points,
            self.total_hyp_points + other.total_hyp_points,
            self.matched_gt_points + other.matched_gt_points,
            self.total_gt_points + other.total_gt_points,
            self.tolerances + other.tolerances,
        )


def auto_tolerance(gt: Sequence[Baseline]) -> float:
    interline = estimate_interline(gt) if gt else INTERLINE_FALLBACK
    return float(np.clip(TOLERANCE_FACTOR * interline, TOLERANCE_MIN, TOLERANCE_MAX))


def _normalized_points(baseline: Baseline, step: float) -> np.ndarray:
    try:
        pts = normalize_baseline(baseline, step).points
    except DegenerateBaseline:
        pts = baseline.points[:1]
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def _distance_to_polyline(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    if len(poly) == 1:
        return np.hypot(*(points - poly[0]).T)
    a = poly[:-1][None, :, :]
    d = (poly[1:] - poly[:-1])[None, :, :]
    p = points[:, None, :]
    len2 = (d ** 2).sum(axis=2)
    proj = ((p - a) * d).sum(axis=2)
    t = np.divide(proj, len2, out=np.zeros_like(proj), where=len2 > 0)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[:, :, None] * d
    return np.sqrt(((p - closest) ** 2).sum(axis=2)).min(axis=1)


def _covered(points: list[np.ndarray], lines: list[np.ndarray], tol: float) -> int:
    """Number of points lying within ``tol`` of some polyline in ``lines``."""
    if not points:
        return 0
    pts = np.concatenate(points)
    hit = np.zeros(len(pts), dtype=bool)
    for poly in lines:
        lo = poly.min(axis=0) - tol
        hi = poly.max(axis=0) + tol
        cand = np.flatnonzero(~hit & (pts >= lo).all(axis=1) & (pts <= hi).all(axis=1))
        if cand.size:
            hit[cand] = _distance_to_polyline(pts[cand], poly) <= tol
    return int(hit.sum())


def baseline_prf(gt: Sequence[Baseline], hyp: Sequence[Baseline],
                 tolerance: Union[float, str] = "auto", step: float = 5.0) -> BaselineScore:
    """Point-coverage precision/recall on normalized baselines.

    Precision counts hypothesis points within ``tolerance`` of any ground-truth
    baseline, recall the converse. ``"auto"`` uses a quarter of the estimated
    interline distance of the ground truth, clamped to [10, 30] px.
    """
    tol = auto_tolerance(gt) if tolerance == "auto" else float(tolerance)
    gt_pts = [_normalized_points(b, step) for b in gt]
    hyp_pts = [_normalized_points(b, step) for b in hyp]
    return BaselineScore(
        matched_hyp_points=_covered(hyp_pts, gt_pts, tol),
        total_hyp_points=sum(len(p) for p in hyp_pts),
        matched_gt_points=_covered(gt_pts, hyp_pts, tol),
        total_gt_points=sum(len(p) for p in gt_pts),
        tolerances=(tol,),
    )


# ---------------------------------------------------------------- pages

@dataclass(frozen=True)
class EvalConfig:
    tolerance: Union[float, str] = "auto"
    step: float = 5.0
    include_background: bool = True
    skip_absent_classes: bool = False


@dataclass(frozen=True)
class PageEvaluation:
    page_id: str
    confusion: ConfusionMatrix
    baselines: BaselineScore


def build_class_order(labels: Iterable[str]) -> dict[str, int]:
    """Background at 0, other labels sorted from 1."""
    return {label: i for i, label in enumerate(sorted(set(labels) - {BACKGROUND}), start=1)}


def evaluate_page_pair(gt: Page, hyp: Page, class_order: Mapping[str, int],
                       config: EvalConfig = EvalConfig()) -> PageEvaluation:
    """Confusion of the painted region maps and baseline scores of one page."""
    if (gt.width, gt.height) != (hyp.width, hyp.height):
        raise DimensionMismatch(f"page sizes differ: {gt.width}x{gt.height} vs {hyp.width}x{hyp.height}")
    k = max(class_order.values(), default=0) + 1
    gt_map = paint_label_map(gt.regions, gt.width, gt.height, class_order)
    hyp_map = paint_label_map(hyp.regions, hyp.width, hyp.height, class_order)
    confusion = accumulate_confusion(gt_map, hyp_map, ConfusionMatrix.zeros(k))
    score = baseline_prf(gt.baselines(), hyp.baselines(), config.tolerance, config.step)
    return PageEvaluation(gt.page_id, confusion, score)


def _pct(v: float) -> str:
    return f"{100.0 * v:.1f}"


@dataclass
class EvaluationReport:
    class_order: dict[str, int]
    config: EvalConfig
    confusion: ConfusionMatrix
    baselines: BaselineScore
    n_pages: int = 0
    notes: list[str] = field(default_factory=list)

    @classmethod
    def from_pages(cls, evaluations: Sequence[PageEvaluation], class_order: Mapping[str, int],
                   config: EvalConfig) -> "EvaluationReport":
        k = max(class_order.values(), default=0) + 1
        confusion = ConfusionMatrix.zeros(k)
        score = BaselineScore(0, 0, 0, 0)
        for ev in evaluations:
            confusion = confusion.merge(ev.confusion)
            score = score.merge(ev.baselines)
        return cls(dict(class_order), config, confusion, score, len(evaluations))

    def values(self) -> dict:
        names = {0: BACKGROUND, **{i: name for name, i in self.class_order.items()}}
        iou, present = class_iou(self.confusion)
        try:
            fw = _pct(fw_iou(self.confusion, self.config.include_background))
        except EmptyAccumulator:
            fw = "nan"
        tols = self.baselines.tolerances
        return {
            "pages": self.n_pages,
            "baseline_precision": _pct(self.baselines.precision),
            "baseline_recall": _pct(self.baselines.recall),
            "baseline_f1": _pct(self.baselines.f1),
            "miou": _pct(mean_iou(self.confusion, self.config.include_background,
                                  self.config.skip_absent_classes)),
            "fwiou": fw,
            "class_iou": {names[i]: (_pct(iou[i]) if present[i] else "absent")
                          for i in range(self.confusion.k)},
            "tolerance": str(self.config.tolerance),
            "tolerance_px_min": f"{min(tols):.2f}" if tols else "n/a",
            "tolerance_px_max": f"{max(tols):.2f}" if tols else "n/a",
            "step": f"{self.config.step:g}",
            "include_background": self.config.include_background,
            "skip_absent_classes": self.config.skip_absent_classes,
            "accumulation": "global",
            "baseline_matching": "point-coverage (approximation, no one-to-one segment assignment)",
            "points": {
                "matched_hyp": self.baselines.matched_hyp_points,
                "total_hyp": self.baselines.total_hyp_points,
                "matched_gt": self.baselines.matched_gt_points,
                "total_gt": self.baselines.total_gt_points,
            },
        }

    def to_text(self) -> str:
        lines = []
        for key, value in self.values().items():
            if isinstance(value, dict):
                lines.extend(f"{key}[{k}]={v}" for k, v in value.items())
            else:
                if isinstance(value, bool):
                    value = str(value).lower()
                lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.values(), indent=2) + "\n"
