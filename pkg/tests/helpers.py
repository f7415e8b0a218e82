"""Fixture builders shared by the unit and acceptance tests."""

import numpy as np

from dlakit.page_model import Baseline


def fuzzed_baseline(rng: np.random.Generator, max_slope: float = 0.3) -> Baseline:
    """A monotone-x baseline with 2 to 6 vertices and a bounded overall slope."""
    n = int(rng.integers(2, 7))
    x0 = float(rng.integers(20, 200))
    length = float(rng.integers(80, 700))
    xs = np.linspace(x0, x0 + length, n)
    xs[1:-1] += rng.uniform(-0.25, 0.25, n - 2) * length / (n - 1)
    xs = np.round(xs)
    slope = rng.uniform(-max_slope, max_slope)
    ys = 300.0 + slope * (xs - xs[0]) + rng.uniform(-3, 3, len(xs))
    return Baseline(zip(xs.tolist(), np.round(ys, 2).tolist()))


def vertical_errors(recovered: Baseline, truth: Baseline) -> np.ndarray:
    """|y - truth(x)| at every recovered vertex (truth held flat past its ends)."""
    rec = np.asarray(recovered.points)
    ref = np.asarray(truth.points)
    return np.abs(rec[:, 1] - np.interp(rec[:, 0], ref[:, 0], ref[:, 1]))
