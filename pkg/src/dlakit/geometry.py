"""Boxes, binary masks and label maps.

Rasterization samples pixel centres: pixel ``(i, j)`` (column ``i``, row
``j``) is set when ``(i + 0.5, j + 0.5)`` lies inside the polygon under the
even-odd rule.  Masks are stored row-major as ``bool`` arrays of shape
``(height, width)``.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DegeneratePolygonWarning, DimensionMismatch, LabelOutOfRange
from .page_model import Polygon


@dataclass(frozen=True)
class BBox:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"inverted box {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    def clipped(self, width: float, height: float) -> "BBox":
        return BBox(min(max(self.x0, 0.0), width), min(max(self.y0, 0.0), height),
                    min(max(self.x1, 0.0), width), min(max(self.y1, 0.0), height))

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]]) -> "BBox":
        xs, ys = zip(*((p[0], p[1]) for p in points))
        return cls(min(xs), min(ys), max(xs), max(ys))


@dataclass(frozen=True, eq=False)
class BitMask:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise ValueError("mask must be two-dimensional")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def empty(cls, width: int, height: int) -> "BitMask":
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.bits))

    def bbox(self) -> BBox | None:
        rows = np.flatnonzero(self.bits.any(axis=1))
        if rows.size == 0:
            return None
        cols = np.flatnonzero(self.bits.any(axis=0))
        return BBox(float(cols[0]), float(rows[0]), float(cols[-1] + 1), float(rows[-1] + 1))

    def __eq__(self, other):
        if not isinstance(other, BitMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel class indices, 0 meaning background."""

    labels: np.ndarray

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


# ---------------------------------------------------------------- rasterization

def _vertices(polygon) -> np.ndarray:
    pts = polygon.points if isinstance(polygon, Polygon) else polygon
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def polygon_spans(polygon, width: int, height: int) -> Iterator[tuple[int, int, int]]:
    """Yield ``(row, start, stop)`` runs of inside pixels, ``stop`` exclusive.

    Crossings of the centre line ``y = row + 0.5`` use the half-open edge rule
    ``(y0 > yc) != (y1 > yc)``, so every scanline meets an even number of edges
    and vertices are never double counted.
    """
    v = _vertices(polygon)
    if len(v) < 3:
        return
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    row_lo = max(0, int(math.floor(y0.min() - 0.5)))
    row_hi = min(height, int(math.ceil(y0.max() + 0.5)))
    for row in range(row_lo, row_hi):
        yc = row + 0.5
        s = (y0 > yc) != (y1 > yc)
        if not s.any():
            continue
        xi = x0[s] + (yc - y0[s]) * (x1[s] - x0[s]) / (y1[s] - y0[s])
        xi.sort()
        # centre i + 0.5 is inside iff xi[2k] <= i + 0.5 < xi[2k + 1]
        starts = np.ceil(xi[0::2] - 0.5)
        stops = np.ceil(xi[1::2] - 0.5)
        for a, b in zip(starts, stops):
            a = max(0, int(a))
            b = min(width, int(b))
            if a < b:
                yield row, a, b


def rasterize(polygon, width: int, height: int) -> BitMask:
    """Binary mask of the pixels whose centres fall inside ``polygon``.

    A zero-area polygon yields an empty mask and a DegeneratePolygonWarning.
    """
    bits = np.zeros((height, width), dtype=bool)
    v = _vertices(polygon)
    if len(v) < 3 or _shoelace(v) == 0.0:
        warnings.warn("zero-area polygon rasterized to an empty mask", DegeneratePolygonWarning,
                      stacklevel=2)
        return BitMask(bits)
    for row, a, b in polygon_spans(v, width, height):
        bits[row, a:b] = True
    return BitMask(bits)


def mask_to_polygon(mask: BitMask) -> Polygon | None:
    """Outline of the largest connected component, traced along pixel edges.

    For a component without holes, rasterizing the result reproduces the
    component exactly.
    """
    from shapely.geometry import MultiPolygon, box
    from shapely.ops import unary_union

    if mask.area == 0:
        return None
    boxes = []
    for row in np.flatnonzero(mask.bits.any(axis=1)):
        line = np.concatenate(([0], mask.bits[row].astype(np.int8), [0]))
        edges = np.flatnonzero(np.diff(line))
        for a, b in zip(edges[0::2], edges[1::2]):
            boxes.append(box(int(a), int(row), int(b), int(row) + 1))
    shape = unary_union(boxes)
    if isinstance(shape, MultiPolygon):
        shape = max(shape.geoms, key=lambda g: (g.area, g.bounds))
    shape = shape.simplify(0)
    coords = list(shape.exterior.coords)[:-1]
    return Polygon(coords)


# ---------------------------------------------------------------- overlap

def bbox_iou(a: BBox, b: BBox) -> float:
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    inter = max(0.0, iw) * max(0.0, ih)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def mask_iou(a: BitMask, b: BitMask) -> float:
    """Pixel IoU; two empty masks score 0."""
    if a.bits.shape != b.bits.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.bits.shape} vs {b.bits.shape}")
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 0.0
    return np.count_nonzero(a.bits & b.bits) / union


def object_mask(obj, width: int, height: int) -> BitMask:
    """Mask of a detection or region: its own mask if present, else its polygon."""
    mask = getattr(obj, "mask", None)
    if mask is not None:
        if (mask.width, mask.height) != (width, height):
            raise DimensionMismatch(f"mask {mask.width}x{mask.height}, canvas {width}x{height}")
        return mask
    return rasterize(obj.polygon, width, height)


def paint_label_map(detections: Iterable, width: int, height: int,
                    class_order: Mapping[str, int]) -> LabelMap:
    """Paint objects into a label map, highest score on top.

    Objects need ``score``, ``id``, ``class_label`` and a ``mask`` or
    ``polygon``. Equal scores: the lexicographically smallest id wins.
    """
    items = sorted(detections, key=lambda d: d.id, reverse=True)
    items.sort(key=lambda d: d.score)
    labels = np.zeros((height, width), dtype=np.int32)
    for d in items:
        try:
            idx = class_order[d.class_label]
        except KeyError:
            raise LabelOutOfRange(f"class {d.class_label!r} not in class order") from None
        if getattr(d, "mask", None) is None:
            for row, a, b in polygon_spans(d.polygon, width, height):
                labels[row, a:b] = idx
        else:
            labels[object_mask(d, width, height).bits] = idx
    return LabelMap(labels)


# ---------------------------------------------------------------- debug output

def write_pgm(path: Union[str, Path], image: Union[BitMask, LabelMap, np.ndarray]) -> None:
    """Dump a mask (0/255) or label map (raw indices) as binary PGM (P5)."""
    if isinstance(image, BitMask):
        data = image.bits.astype(np.uint8) * 255
    elif isinstance(image, LabelMap):
        data = image.labels
    else:
        data = np.asarray(image)
    maxval = max(1, int(data.max(initial=0)))
    if maxval > 65535:
        raise ValueError("values too large for PGM")
    dtype = ">u1" if maxval < 256 else ">u2"
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(data.astype(dtype).tobytes())
