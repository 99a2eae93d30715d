"""Isotonic least squares by pool-adjacent-violators, plus the min-max oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SortedSample, StepFunction

__all__ = ["IsotonicFit", "fit_isotonic", "pava", "minmax_value", "minmax_all", "step_extension"]


@dataclass(frozen=True, eq=False)
class IsotonicFit:
    fitted: np.ndarray
    extension: StepFunction
    blocks: list  # (start, end, mean, weight), end exclusive


def pava(y: np.ndarray, w: np.ndarray):
    """Weighted pool-adjacent-violators.

    Returns (fitted values, blocks). Runs in O(n): every index is pushed
    once and merged at most once.
    """
    n = len(y)
    # parallel stacks: block start, weighted sum, total weight
    starts = [0] * n
    sums = [0.0] * n
    wts = [0.0] * n
    top = -1
    yl = y.tolist()
    wl = w.tolist()
    for i in range(n):
        top += 1
        starts[top] = i
        sums[top] = yl[i] * wl[i]
        wts[top] = wl[i]
        while top > 0 and sums[top - 1] * wts[top] >= sums[top] * wts[top - 1]:
            # previous mean >= current mean: pool (ties pooled too, keeps blocks maximal)
            sums[top - 1] += sums[top]
            wts[top - 1] += wts[top]
            top -= 1
    blocks = []
    fitted = np.empty(n)
    for b in range(top + 1):
        s = starts[b]
        e = starts[b + 1] if b < top else n
        mean = sums[b] / wts[b]
        fitted[s:e] = mean
        blocks.append((s, e, mean, wts[b]))
    return fitted, blocks


def step_extension(xs: np.ndarray, blocks) -> StepFunction:
    """Left-continuous step function jumping only at the last point of each block.

    The leftmost piece carries the first fitted value down to x = 0; a block
    made of the single point x = 0 becomes a degenerate piece at 0.
    """
    ends = [xs[e - 1] for (_, e, _, _) in blocks[:-1]]
    vals = [m for (_, _, m, _) in blocks]
    vals = np.maximum.accumulate(np.asarray(vals, dtype=float))
    return StepFunction(np.array(ends + [1.0]), vals, isotonic=True)


def fit_isotonic(s: SortedSample, weights=None) -> IsotonicFit:
    """Least squares projection of the responses onto non-decreasing sequences."""
    w = s.weights if weights is None else np.asarray(weights, dtype=float)
    if w.shape != s.ys.shape:
        raise ValueError("weights must have one entry per design point")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be positive")
    fitted, blocks = pava(s.ys, w)
    return IsotonicFit(fitted, step_extension(s.xs, blocks), blocks)


def minmax_value(s: SortedSample, j: int) -> float:
    """Direct O(n^2) min over v >= j of max over u <= j of the (weighted) mean of y[u..v].

    ``j`` is a 0-based index.
    """
    n = s.n
    if not 0 <= j < n:
        raise IndexError(f"index {j} out of range for sample of size {n}")
    wy = np.concatenate([[0.0], np.cumsum(s.weights * s.ys)])
    ww = np.concatenate([[0.0], np.cumsum(s.weights)])
    best = np.inf
    for v in range(j, n):
        u = np.arange(0, j + 1)
        means = (wy[v + 1] - wy[u]) / (ww[v + 1] - ww[u])
        best = min(best, float(np.max(means)))
    return best


def minmax_all(s: SortedSample) -> np.ndarray:
    """The min-max formula evaluated at every index at once, O(n^2) memory."""
    n = s.n
    wy = np.concatenate([[0.0], np.cumsum(s.weights * s.ys)])
    ww = np.concatenate([[0.0], np.cumsum(s.weights)])
    u = np.arange(n)[:, None]
    v = np.arange(n)[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = (wy[v + 1] - wy[u]) / (ww[v + 1] - ww[u])
    avg = np.where(u <= v, avg, -np.inf)
    # inner[j, v] = max_{u <= j} avg[u, v]
    inner = np.maximum.accumulate(avg, axis=0)
    inner = np.where(np.arange(n)[:, None] <= v, inner, np.inf)
    return inner.min(axis=1)
