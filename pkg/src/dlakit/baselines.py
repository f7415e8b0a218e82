"""Baselines and text-line polygons.

A text-line polygon is obtained from its baseline by offsetting the
polyline a fixed distance upwards and downwards. The reverse direction
takes the bottom contour of the rasterized polygon, smooths it with a
moving median, lifts it by the lower offset and simplifies it with
Douglas-Peucker.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateBaseline, EmptyInput, EmptyMask
from .geometry import BitMask, rasterize
from .page_model import Baseline, Polygon

INTERLINE_FALLBACK = 60.0
MAX_MITER = 2.0


@dataclass(frozen=True)
class LineGeometryConfig:
    offset_above: float = 16.0
    offset_below: float = 4.0
    resample_step: float = 5.0
    simplify_epsilon: float = 2.0

    def __post_init__(self):
        for name in ("offset_above", "offset_below", "resample_step", "simplify_epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


DEFAULT_LINE_GEOMETRY = LineGeometryConfig()


def monotonize(baseline: Baseline) -> Baseline:
    """Sort points by x and merge points sharing an x into their mean y."""
    pts = np.asarray(baseline.points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return Baseline(())
    xs, inverse = np.unique(pts[:, 0], return_inverse=True)
    ys = np.bincount(inverse, weights=pts[:, 1]) / np.bincount(inverse)
    return Baseline(zip(xs.tolist(), ys.tolist()))


def baseline_to_polygon(baseline: Baseline, config: LineGeometryConfig = DEFAULT_LINE_GEOMETRY) -> Polygon:
    """Enclosing polygon: the baseline offset ``offset_above`` up and ``offset_below`` down.

    Offsets follow the local normal (segment normal at the ends, mitred
    bisector at interior vertices). Vertices run along the upper edge left
    to right, then back along the lower edge.
    """
    pts = np.asarray(monotonize(baseline).points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        raise DegenerateBaseline("baseline needs at least two distinct x positions")
    seg = np.diff(pts, axis=0)
    seg /= np.hypot(seg[:, 0], seg[:, 1])[:, None]
    # with y pointing down, (dy, -dx) is the upward normal of a rightward segment
    seg_normals = np.stack([seg[:, 1], -seg[:, 0]], axis=1)
    normals = np.empty_like(pts)
    normals[0] = seg_normals[0]
    normals[-1] = seg_normals[-1]
    if len(pts) > 2:
        bis = seg_normals[:-1] + seg_normals[1:]
        bis /= np.hypot(bis[:, 0], bis[:, 1])[:, None]
        cos_half = np.einsum("ij,ij->i", bis, seg_normals[1:])
        normals[1:-1] = bis * np.minimum(1.0 / cos_half, MAX_MITER)[:, None]
    upper = pts + config.offset_above * normals
    lower = pts - config.offset_below * normals
    return Polygon(np.concatenate([upper, lower[::-1]]).tolist())


def _moving_median(values: np.ndarray, window: int) -> np.ndarray:
    """Centred moving median; the window shrinks at the ends instead of padding."""
    half = window // 2
    padded = np.concatenate([np.full(half, np.nan), values, np.full(half, np.nan)])
    return np.nanmedian(sliding_window_view(padded, window), axis=1)


def _odd_window(config: LineGeometryConfig, n: int) -> int:
    w = max(1, int(round(config.resample_step * 3)))
    if w % 2 == 0:
        w += 1
    if w > n:
        w = n if n % 2 else n - 1
    return max(1, w)


def _trim_caps(cols: np.ndarray, bottom: np.ndarray, max_trim: float):
    """Drop end columns where the contour climbs a slanted end cap.

    Cap columns change by more than 1.5 px per column; at most ``max_trim``
    columns go from each end and at least two columns stay.
    """
    limit = int(max_trim)
    jumps = np.abs(np.diff(bottom)) > 1.5
    lo = 0
    while lo < min(limit, len(cols) - 2) and jumps[lo]:
        lo += 1
    hi = len(cols)
    while len(cols) - hi < limit and hi - lo > 2 and jumps[hi - 2]:
        hi -= 1
    return cols[lo:hi], bottom[lo:hi]


def douglas_peucker(points: Sequence[tuple[float, float]], epsilon: float) -> list[tuple[float, float]]:
    from shapely.geometry import LineString

    if len(points) <= 2:
        return list(points)
    return list(LineString(points).simplify(epsilon, preserve_topology=False).coords)


def mask_to_baseline(mask: BitMask, config: LineGeometryConfig = DEFAULT_LINE_GEOMETRY) -> Baseline:
    """Baseline of a rasterized text line from its bottom contour."""
    bits = mask.bits
    cols = np.flatnonzero(bits.any(axis=0))
    if cols.size == 0:
        raise EmptyMask("text-line mask is empty")
    height = bits.shape[0]
    # bottom edge of the lowest set pixel in each occupied column
    bottom = (height - np.argmax(bits[::-1, cols], axis=0)).astype(float)
    cols, bottom = _trim_caps(cols, bottom, config.offset_above + config.offset_below)
    x = cols + 0.5
    window = _odd_window(config, len(cols))
    smooth = _moving_median(bottom, window)
    # the lower offset was applied along the normal; lift by it over cos(slope)
    if len(cols) > 1:
        idx = np.arange(len(cols))
        lo = np.maximum(idx - window, 0)
        hi = np.minimum(idx + window, len(cols) - 1)
        slope = (smooth[hi] - smooth[lo]) / (x[hi] - x[lo])
    else:
        slope = np.zeros(1)
    y = smooth - config.offset_below * np.sqrt(1.0 + slope ** 2)
    if len(cols) == 1:
        pts = [(float(cols[0]), float(y[0])), (float(cols[0] + 1), float(y[0]))]
        return Baseline(pts)
    x[0] = cols[0]
    x[-1] = cols[-1] + 1
    return Baseline(douglas_peucker(list(zip(x.tolist(), y.tolist())), config.simplify_epsilon))


def polygon_to_baseline(polygon: Polygon, config: LineGeometryConfig = DEFAULT_LINE_GEOMETRY,
                        image_bounds: Optional[tuple[int, int]] = None) -> Baseline:
    """Baseline of a text-line polygon; ``image_bounds`` is ``(width, height)``.

    Without bounds the canvas is just large enough to hold the polygon.
    """
    if image_bounds is None:
        x0, y0, x1, y1 = polygon.bounds
        image_bounds = (max(1, math.ceil(x1) + 1), max(1, math.ceil(y1) + 1))
    mask = rasterize(polygon, *image_bounds)
    return mask_to_baseline(mask, config)


def normalize_baseline(baseline: Baseline, step: float) -> Baseline:
    """Resample at arc lengths 0, step, 2*step, ... and the full length.

    The first and last input points are kept exactly.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    pts = np.asarray(baseline.points, dtype=float).reshape(-1, 2)
    if len(pts) > 1:
        keep = np.concatenate([[True], np.any(np.diff(pts, axis=0) != 0, axis=1)])
        pts = pts[keep]
    if len(pts) < 2:
        raise DegenerateBaseline("baseline has fewer than two distinct points")
    cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    total = cum[-1]
    pos = np.arange(step, total, step)
    pos = np.concatenate([[0.0], pos[pos < total - 1e-9 * step]])
    xs = np.interp(pos, cum, pts[:, 0])
    ys = np.interp(pos, cum, pts[:, 1])
    out = list(zip(xs.tolist(), ys.tolist()))
    out[0] = tuple(pts[0].tolist())
    out.append(tuple(pts[-1].tolist()))
    return Baseline(out)


def estimate_interline(baselines: Sequence[Baseline]) -> float:
    """Median distance from each baseline's mean y to its nearest neighbour's.

    A single baseline gives the fallback of 60 px.
    """
    if not baselines:
        raise EmptyInput("no baselines")
    if len(baselines) == 1:
        return INTERLINE_FALLBACK
    ys = np.array([b.mean_y for b in baselines])
    gaps = np.abs(ys[:, None] - ys[None, :])
    np.fill_diagonal(gaps, np.inf)
    return float(np.median(gaps.min(axis=1)))
