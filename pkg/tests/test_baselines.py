import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dlakit.baselines import (INTERLINE_FALLBACK, LineGeometryConfig, baseline_to_polygon,
                              douglas_peucker, estimate_interline, mask_to_baseline, monotonize,
                              normalize_baseline, polygon_to_baseline)
from dlakit.errors import DegenerateBaseline, EmptyInput, EmptyMask
from dlakit.geometry import BitMask, rasterize
from dlakit.page_model import Baseline, Polygon

from helpers import fuzzed_baseline, vertical_errors
from oracles import point_segment_distance

CFG = LineGeometryConfig(offset_above=16, offset_below=4, resample_step=5, simplify_epsilon=2)


def test_horizontal_baseline_gives_rectangle():
    poly = baseline_to_polygon(Baseline([(0, 100), (200, 100)]), CFG)
    assert poly.points == ((0, 84), (200, 84), (200, 104), (0, 104))


def test_single_point_baseline_is_degenerate():
    with pytest.raises(DegenerateBaseline):
        baseline_to_polygon(Baseline([(5, 5)]), CFG)
    with pytest.raises(DegenerateBaseline):
        baseline_to_polygon(Baseline([(5, 5), (5, 9)]), CFG)


def test_diagonal_offset():
    cfg = LineGeometryConfig(offset_above=10, offset_below=4)
    poly = baseline_to_polygon(Baseline([(0, 0), (100, 100)]), cfg)
    d = 10 / math.sqrt(2)
    (ux0, uy0), (ux1, uy1) = poly.points[:2]
    assert (ux0, uy0) == pytest.approx((d, -d))
    assert (ux1, uy1) == pytest.approx((100 + d, 100 - d))


def line_distance(p, a, c):
    (px, py), (ax, ay), (cx, cy) = p, a, c
    return abs((cx - ax) * (py - ay) - (cy - ay) * (px - ax)) / math.hypot(cx - ax, cy - ay)


def test_polygon_edges_keep_offset_distance():
    b = Baseline([(0, 50), (60, 40), (140, 70), (200, 65)])
    poly = baseline_to_polygon(b, CFG)
    n = len(b.points)
    upper, lower = poly.points[:n], poly.points[n:][::-1]
    segs = list(zip(b.points, b.points[1:]))
    for k in range(n):
        adjacent = segs[max(0, k - 1):k + 1]
        for a, c in adjacent:
            assert line_distance(upper[k], a, c) == pytest.approx(16, abs=1e-6)
            assert line_distance(lower[k], a, c) == pytest.approx(4, abs=1e-6)
        # offsets go up for the upper edge (smaller y)
        assert upper[k][1] < b.points[k][1] < lower[k][1]


def test_monotonize_sorts_and_merges():
    assert monotonize(Baseline([(10, 1), (0, 0), (10, 3)])).points == ((0, 0), (10, 2))


def test_rectangle_to_baseline():
    rect = Polygon([(0, 84), (200, 84), (200, 104), (0, 104)])
    b = polygon_to_baseline(rect, CFG)
    ys = [y for _, y in b.points]
    assert all(abs(y - 100) <= 1 for y in ys)
    assert b.points[0][0] == pytest.approx(0, abs=1)
    assert b.points[-1][0] == pytest.approx(200, abs=1)


def test_zero_area_polygon_gives_empty_mask():
    with pytest.warns(UserWarning), pytest.raises(EmptyMask):
        polygon_to_baseline(Polygon([(0, 0), (10, 0), (20, 0)]), CFG)
    with pytest.raises(EmptyMask):
        mask_to_baseline(BitMask.empty(10, 10), CFG)


def test_polygon_outside_image_bounds():
    with pytest.raises(EmptyMask):
        polygon_to_baseline(Polygon([(50, 50), (60, 50), (60, 60)]), CFG, image_bounds=(20, 20))


def test_one_column_mask():
    bits = np.zeros((20, 10), dtype=bool)
    bits[3:15, 4] = True
    b = mask_to_baseline(BitMask(bits), CFG)
    assert b.points == ((4, 11), (5, 11))


@pytest.mark.parametrize("seed", range(25))
def test_round_trip_within_tolerance(seed):
    rng = np.random.default_rng(seed)
    b = fuzzed_baseline(rng)
    recovered = polygon_to_baseline(baseline_to_polygon(b, CFG), CFG)
    err = vertical_errors(recovered, b)
    assert err.max() <= CFG.simplify_epsilon + 1
    assert err.mean() <= 2


def test_round_trip_endpoints():
    b = Baseline([(37, 200), (412, 230)])
    recovered = polygon_to_baseline(baseline_to_polygon(b, CFG), CFG)
    assert recovered.points[0][0] == pytest.approx(37, abs=2)
    assert recovered.points[-1][0] == pytest.approx(412, abs=2)


def test_douglas_peucker_drops_collinear():
    pts = [(0, 0), (1, 0.1), (2, 0), (3, 5), (4, 0)]
    assert douglas_peucker(pts, 0.5) == [(0, 0), (2, 0), (3, 5), (4, 0)]
    assert douglas_peucker([(0, 0), (1, 1)], 1) == [(0, 0), (1, 1)]


# ---------------------------------------------------------------- normalization

def test_normalize_straight_segment():
    n = normalize_baseline(Baseline([(0, 100), (200, 100)]), 5)
    assert len(n.points) == 41
    assert n.points[0] == (0, 100) and n.points[-1] == (200, 100)
    assert np.allclose(np.diff(np.asarray(n.points)[:, 0]), 5)


def test_normalize_short_baseline():
    assert normalize_baseline(Baseline([(0, 0), (3, 0)]), 5).points == ((0, 0), (3, 0))


def test_normalize_uneven_tail():
    n = normalize_baseline(Baseline([(0, 0), (12, 0)]), 5)
    assert [x for x, _ in n.points] == [0, 5, 10, 12]


def test_normalize_degenerate():
    with pytest.raises(DegenerateBaseline):
        normalize_baseline(Baseline([(1, 1), (1, 1)]), 5)
    with pytest.raises(ValueError):
        normalize_baseline(Baseline([(0, 0), (1, 1)]), 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 500), st.floats(0, 500)), min_size=2, max_size=8),
       st.floats(0.5, 50))
def test_normalize_points_lie_on_polyline(pts, step):
    b = Baseline(pts)
    if b.length == 0:
        return
    n = normalize_baseline(b, step)
    segs = list(zip(pts, pts[1:]))
    for p in n.points:
        assert min(point_segment_distance(p, a, c) for a, c in segs) <= 1e-6 * (1 + b.length)
    assert n.points[0] == tuple(map(float, pts[0]))
    assert n.points[-1] == tuple(map(float, pts[-1]))
    gaps = np.hypot(*np.diff(np.asarray(n.points), axis=0).T)
    assert np.all(gaps <= step + 1e-6)


# ---------------------------------------------------------------- interline

def flat(y):
    return Baseline([(0, y), (100, y)])


def test_interline_examples():
    assert estimate_interline([flat(100), flat(160), flat(220)]) == 60
    assert estimate_interline([flat(100)]) == INTERLINE_FALLBACK == 60
    assert estimate_interline([flat(100), flat(110), flat(300)]) == 10


def test_interline_empty():
    with pytest.raises(EmptyInput):
        estimate_interline([])


# ---------------------------------------------------------------- area sanity

@pytest.mark.parametrize("seed", range(5))
def test_polygon_area_close_to_length_times_height(seed):
    b = fuzzed_baseline(np.random.default_rng(100 + seed), max_slope=0.2)
    poly = baseline_to_polygon(b, CFG)
    assert poly.area == pytest.approx(b.length * 20, rel=0.1)
    assert rasterize(poly, 1000, 600).area == pytest.approx(poly.area, rel=0.1)
