"""Independent reference computations shared by the test modules."""

import numpy as np


def envelope_kinks(model, delta, B=1.0):
    """Points in (0, 1) where the envelope of `model` is not smooth."""
    if model in ("isotonic_bounded", "convex_bounded"):
        xs = min((delta / B) ** 2, 0.5)
        return [xs, 0.5, 1 - xs]
    if model == "single_changepoint":
        return [1 - min(delta**2, 1.0)]
    return []


def quadrature_sq_norm(fn, kinks, nodes=10_000):
    """About `nodes` Gauss-Legendre nodes; geometric panels towards each kink and 1/2."""
    edges = {0.0, 1.0}
    for k in kinks:
        if 0 < k < 1:
            edges.add(k)
    edges = sorted(edges)
    panels = []
    for a, b in zip(edges[:-1], edges[1:]):
        # grade panels towards both ends of each smooth piece
        r = np.geomspace(1e-12, 1.0, 40)
        pts = np.unique(np.concatenate([[0.0], r]))
        left = a + (b - a) / 2 * pts
        right = b - (b - a) / 2 * pts
        panels.append(np.unique(np.concatenate([left, right])))
    grid = np.unique(np.concatenate(panels))
    k = max(4, nodes // (grid.size - 1))
    t, w = np.polynomial.legendre.leggauss(k)
    lo, hi = grid[:-1], grid[1:]
    half = 0.5 * (hi - lo)
    x = lo[:, None] + half[:, None] * (t + 1)
    return float((half[:, None] * w * fn(x) ** 2).sum())
