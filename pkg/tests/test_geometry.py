import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dlakit.detections import Detection
from dlakit.errors import DegeneratePolygonWarning, DimensionMismatch, LabelOutOfRange
from dlakit.geometry import (BBox, BitMask, bbox_iou, mask_iou, mask_to_polygon, paint_label_map,
                             rasterize, write_pgm)
from dlakit.page_model import Polygon

from oracles import box_iou, paint_oracle, raster_oracle


def rect(x0, y0, x1, y1):
    return Polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def square_mask(x0, y0, size, w=30, h=30):
    bits = np.zeros((h, w), dtype=bool)
    bits[y0:y0 + size, x0:x0 + size] = True
    return BitMask(bits)


def test_rectangle_area():
    assert rasterize(rect(0, 0, 10, 10), 20, 20).area == 100


def test_triangle_matches_brute_force():
    tri = [(0, 0), (4, 0), (0, 4)]
    expected = sum(map(sum, raster_oracle(tri, 8, 8)))
    assert expected == 6
    assert rasterize(Polygon(tri), 8, 8).area == expected


def test_polygon_outside_canvas():
    assert rasterize(rect(30, 30, 40, 40), 20, 20).area == 0
    assert rasterize(rect(-15, -15, -5, -5), 20, 20).area == 0


def test_partially_outside_is_clipped():
    assert rasterize(rect(-5, -5, 5, 5), 20, 20).area == 25


def test_degenerate_polygon_warns():
    with pytest.warns(DegeneratePolygonWarning):
        mask = rasterize(Polygon([(0, 0), (10, 0), (20, 0)]), 20, 20)
    assert mask.area == 0


def test_orientation_does_not_matter():
    pts = [(1, 1), (15, 3), (12, 17), (2, 9)]
    a = rasterize(Polygon(pts), 20, 20)
    b = rasterize(Polygon(pts[::-1]), 20, 20)
    assert a == b


def test_concave_polygon_against_oracle():
    pts = [(0, 0), (20, 0), (20, 20), (10, 5), (0, 20)]
    assert np.array_equal(rasterize(Polygon(pts), 24, 24).bits, np.array(raster_oracle(pts, 24, 24)))


def test_pixel_centre_on_edge_rule():
    # x = 2.5 is a pixel centre; the half-open rule counts a left edge but not a right one
    bits = rasterize(rect(2.5, 0, 4.5, 1), 8, 1).bits[0]
    assert bits.tolist() == [False, False, True, True, False, False, False, False]


vertex = st.tuples(st.floats(-5, 37, allow_nan=False), st.floats(-5, 37, allow_nan=False))


@pytest.mark.filterwarnings("ignore::dlakit.errors.DegeneratePolygonWarning")
@settings(max_examples=150, deadline=None)
@given(st.lists(vertex, min_size=3, max_size=7))
def test_random_polygons_against_oracle(pts):
    poly = Polygon(pts)
    if poly.area == 0:
        return
    assert np.array_equal(rasterize(poly, 32, 32).bits, np.array(raster_oracle(pts, 32, 32)))


def test_bbox_iou_examples():
    a = BBox(0, 0, 10, 10)
    assert bbox_iou(a, a) == 1.0
    assert bbox_iou(a, BBox(20, 20, 30, 30)) == 0.0
    assert bbox_iou(a, BBox(1, 1, 11, 11)) == pytest.approx(81 / 119)


def test_bbox_iou_touching_is_zero():
    assert bbox_iou(BBox(0, 0, 10, 10), BBox(10, 0, 20, 10)) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=8, max_size=8))
def test_bbox_iou_against_oracle(v):
    a = (min(v[0], v[1]), min(v[2], v[3]), max(v[0], v[1]), max(v[2], v[3]))
    b = (min(v[4], v[5]), min(v[6], v[7]), max(v[4], v[5]), max(v[6], v[7]))
    got = bbox_iou(BBox(*a), BBox(*b))
    assert got == pytest.approx(box_iou(a, b), abs=1e-12)
    assert got == pytest.approx(bbox_iou(BBox(*b), BBox(*a)), abs=1e-15)
    assert 0.0 <= got <= 1.0


def test_bbox_rejects_inverted():
    with pytest.raises(ValueError):
        BBox(5, 0, 0, 5)


def test_mask_iou_examples():
    a = square_mask(0, 0, 10)
    assert mask_iou(a, a) == 1.0
    b = square_mask(5, 0, 10)
    inter = int(np.sum(a.bits & b.bits))
    union = int(np.sum(a.bits | b.bits))
    assert (inter, union) == (50, 150)
    assert mask_iou(a, b) == pytest.approx(50 / 150)
    empty = BitMask.empty(30, 30)
    assert mask_iou(empty, empty) == 0.0


def test_mask_iou_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        mask_iou(BitMask.empty(3, 3), BitMask.empty(4, 3))


@pytest.mark.parametrize("pts", [
    [(0, 0), (10, 0), (10, 10), (0, 10)],
    [(3, 2), (20, 4), (25, 18), (8, 22), (2, 12)],
    [(0, 0), (20, 0), (20, 20), (10, 5), (0, 20)],
])
def test_mask_to_polygon_reproduces_mask(pts):
    mask = rasterize(Polygon(pts), 30, 30)
    outline = mask_to_polygon(mask)
    assert rasterize(outline, 30, 30) == mask


def test_mask_to_polygon_keeps_largest_component():
    bits = np.zeros((20, 20), dtype=bool)
    bits[0:3, 0:3] = True
    bits[10:18, 10:18] = True
    outline = mask_to_polygon(BitMask(bits))
    assert outline.bounds == (10, 10, 18, 18)
    assert mask_to_polygon(BitMask.empty(5, 5)) is None


# ---------------------------------------------------------------- painting

def det(ident, label, score, poly):
    return Detection(ident, "p", {label: score}, BBox(*poly.bounds), polygon=poly)


ORDER = {"a": 1, "b": 2, "c": 3}


def test_paint_single_detection():
    lm = paint_label_map([det("d", "b", 0.9, rect(0, 0, 8, 5))], 20, 20, ORDER)
    assert int(np.sum(lm.labels == 2)) == 40
    assert int(np.sum(lm.labels == 0)) == 400 - 40


def test_paint_higher_score_on_top():
    d1 = det("x1", "a", 0.9, rect(0, 0, 10, 10))
    d2 = det("x2", "b", 0.6, rect(5, 5, 15, 15))
    for order in ([d1, d2], [d2, d1]):
        lm = paint_label_map(order, 20, 20, ORDER)
        assert np.all(lm.labels[5:10, 5:10] == 1)


def test_paint_equal_scores_smallest_id_wins():
    d1 = det("m", "a", 0.7, rect(0, 0, 10, 10))
    d2 = det("k", "b", 0.7, rect(5, 5, 15, 15))
    assert np.all(paint_label_map([d1, d2], 20, 20, ORDER).labels[5:10, 5:10] == 2)


def test_paint_unknown_label():
    with pytest.raises(LabelOutOfRange):
        paint_label_map([det("d", "zzz", 0.9, rect(0, 0, 5, 5))], 10, 10, ORDER)


def test_paint_uses_mask_when_present():
    bits = np.zeros((10, 10), dtype=bool)
    bits[2, 3] = True
    d = Detection("d", "p", {"c": 0.8}, BBox(0, 0, 10, 10), mask=BitMask(bits))
    lm = paint_label_map([d], 10, 10, ORDER)
    assert int(np.sum(lm.labels == 3)) == 1 and lm.labels[2, 3] == 3


def test_paint_three_overlapping_against_oracle():
    objects = [
        ("d0", 0.8, 1, [(2, 2), (30, 4), (20, 28)]),
        ("d1", 0.6, 2, [(10, 0), (34, 10), (34, 34), (8, 20)]),
        ("d2", 0.8, 3, [(0, 15), (25, 12), (28, 34), (0, 34)]),
    ]
    oracle = np.array(paint_oracle(objects, 36, 36))
    labels = {1: "a", 2: "b", 3: "c"}
    dets = [det(i, labels[lb], s, Polygon(p)) for i, s, lb, p in objects]
    for perm in itertools.permutations(dets):
        lm = paint_label_map(perm, 36, 36, ORDER)
        assert np.array_equal(lm.labels, oracle)
    counts = np.bincount(oracle.ravel(), minlength=4)
    assert all(counts[1:] > 0)


def test_paint_random_against_oracle():
    rng = random.Random(11)
    for _ in range(20):
        objects = []
        for k in range(rng.randint(1, 5)):
            pts = [(rng.uniform(0, 24), rng.uniform(0, 24)) for _ in range(rng.randint(3, 5))]
            objects.append((f"d{rng.randint(0, 9)}{k}", rng.choice([0.5, 0.7, 0.9]), rng.randint(1, 3), pts))
        labels = {1: "a", 2: "b", 3: "c"}
        dets = [det(i, labels[lb], s, Polygon(p)) for i, s, lb, p in objects if Polygon(p).area > 0]
        objects = [o for o in objects if Polygon(o[3]).area > 0]
        lm = paint_label_map(dets, 24, 24, ORDER)
        assert np.array_equal(lm.labels, np.array(paint_oracle(objects, 24, 24)))


def test_write_pgm(tmp_path):
    path = tmp_path / "m.pgm"
    write_pgm(path, square_mask(0, 0, 2, w=3, h=2))
    data = path.read_bytes()
    assert data.startswith(b"P5\n3 2\n255\n")
    assert data[len(b"P5\n3 2\n255\n"):] == bytes([255, 255, 0, 255, 255, 0])
