"""Convex least squares on [0, 1] and its cumulative-sum characterization."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .core import PiecewiseLinearFunction, SortedSample

__all__ = [
    "ConvexFit",
    "CharacterizationAudit",
    "fit_convex",
    "brute_force_convex",
    "characterization_audit",
    "active_set_qp",
    "divided_slopes",
]

KINK_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class ConvexFit:
    fitted: np.ndarray
    kinks: np.ndarray  # indices of design points where the slope changes
    extension: PiecewiseLinearFunction
    residual_norm: float


@dataclass(frozen=True)
class CharacterizationAudit:
    """Slacks T_j = sum_{k<j} (R_k - S_k)(X_{k+1} - X_k), j = 2..n (1-based).

    A fit is the convex LSE iff every slack is >= 0 with equality at kinks.
    ``min_nonkink_slack`` reports the converse direction (strict slack away
    from kinks), which may legitimately be zero in degenerate samples.
    """

    min_slack: float
    max_kink_gap: float
    min_nonkink_slack: float
    end_gap: float  # |T_n| + |R_n - S_n|, both zero at the LSE

    @property
    def passed(self) -> bool:
        return self.min_slack >= -1e-8 and self.max_kink_gap <= 1e-8


def divided_slopes(xs: np.ndarray, f: np.ndarray) -> np.ndarray:
    return np.diff(f) / np.diff(xs)


def _kink_indices(xs: np.ndarray, f: np.ndarray) -> np.ndarray:
    if xs.size < 3:
        return np.empty(0, dtype=int)
    s = divided_slopes(xs, f)
    tol = KINK_RTOL * max(1.0, float(np.max(np.abs(s))))
    return np.flatnonzero(np.diff(s) > tol) + 1


def _extension(xs: np.ndarray, f: np.ndarray, kinks: np.ndarray) -> PiecewiseLinearFunction:
    """Interpolate through the kinks and continue the boundary segments linearly to 0 and 1."""
    if xs.size == 1:
        return PiecewiseLinearFunction([0.0, 1.0], [f[0], f[0]], convex=True)
    s = divided_slopes(xs, f)
    inner = xs[kinks]
    f0 = f[0] + s[0] * (0.0 - xs[0])
    f1 = f[-1] + s[-1] * (1.0 - xs[-1])
    knots = np.concatenate([[0.0], inner, [1.0]])
    vals = np.concatenate([[f0], f[kinks], [f1]])
    keep = np.concatenate([[True], np.diff(knots) > 0])
    return PiecewiseLinearFunction(knots[keep], vals[keep], convex=True)


def _fit_on_knots(xs, y, w, nodes):
    """Weighted least squares over continuous piecewise-linear functions with the given node indices.

    ``nodes`` are sorted design indices including 0 and n-1. The hat-basis
    normal equations are tridiagonal; one step of iterative refinement keeps
    the residual orthogonal to the basis at rounding level.
    """
    n = xs.size
    k = nodes.size
    seg = np.searchsorted(nodes, np.arange(n), side="right") - 1
    seg = np.clip(seg, 0, k - 2)
    xl, xr = xs[nodes[seg]], xs[nodes[seg + 1]]
    lam = (xs - xl) / (xr - xl)
    a, b = 1.0 - lam, lam

    diag = np.bincount(seg, w * a * a, k) + np.concatenate([[0.0], np.bincount(seg, w * b * b, k - 1)])
    off = np.bincount(seg, w * a * b, k - 1)
    ab = np.zeros((2, k))
    ab[0, 1:] = off
    ab[1] = diag

    def project(r):
        return np.bincount(seg, w * a * r, k) + np.concatenate([[0.0], np.bincount(seg, w * b * r, k - 1)])

    def evaluate(c):
        return a * c[seg] + b * c[seg + 1]

    c = solveh_banded(ab, project(y))
    c = c + solveh_banded(ab, project(y - evaluate(c)))
    return evaluate(c)


def _hinge_gradient(xs, r, w):
    """G_j = sum_{i > j} w_i r_i (x_i - x_j) for every j."""
    wr = w * r
    tail_wr = np.cumsum(wr[::-1])[::-1]
    tail_wrx = np.cumsum((wr * xs)[::-1])[::-1]
    tail_wr = np.concatenate([tail_wr[1:], [0.0]])
    tail_wrx = np.concatenate([tail_wrx[1:], [0.0]])
    return tail_wrx - xs * tail_wr


def _slope_changes(xs, f, nodes):
    s = np.diff(f[nodes]) / np.diff(xs[nodes])
    return np.diff(s)


def fit_convex(s: SortedSample, weights=None, max_iter: int | None = None) -> ConvexFit:
    """Convex least squares fit at the design points.

    Primal active-set method on the knot set (the complement of the binding
    second-difference constraints): add the knot whose constraint is most
    violated, re-solve least squares on the working set, and step back
    towards the previous iterate whenever a slope change turns negative,
    dropping the knots that hit zero.
    """
    xs, y = s.xs, s.ys
    w = s.weights if weights is None else np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    n = xs.size
    if n < 2:
        raise ValueError("convex fit needs at least two design points")
    scale = float(np.sum(w * np.abs(y))) + float(np.sum(w))
    grad_tol = 1e-13 * scale
    support: list[int] = []
    f = _fit_on_knots(xs, y, w, np.array([0, n - 1]))
    max_iter = max_iter or 10 * n + 100
    banned: set[int] = set()
    for _ in range(max_iter):
        if n < 3:
            break
        g = _hinge_gradient(xs, y - f, w)
        cand = g[1:-1].copy()
        if support:
            cand[np.asarray(support) - 1] = -np.inf
        for j in banned:
            cand[j - 1] = -np.inf
        j_new = int(np.argmax(cand)) + 1
        if cand[j_new - 1] <= grad_tol:
            break
        support = sorted(support + [j_new])
        while True:
            nodes = np.array([0] + support + [n - 1])
            z = _fit_on_knots(xs, y, w, nodes)
            cz = _slope_changes(xs, z, nodes)
            if np.all(cz > 0):
                f = z
                banned.clear()
                break
            cf = _slope_changes(xs, f, nodes)
            neg = cz <= 0
            denom = cf[neg] - cz[neg]
            alpha = np.min(np.where(denom > 0, cf[neg] / np.where(denom > 0, denom, 1.0), 0.0))
            alpha = min(max(alpha, 0.0), 1.0)
            f = f + alpha * (z - f)
            cf = _slope_changes(xs, f, nodes)
            ctol = 1e-14 * max(1.0, float(np.max(np.abs(cf))))
            drop = {support[i] for i in np.flatnonzero(neg & (cf <= ctol))}
            if not drop:
                drop = {support[int(np.argmin(cf))]}
            support = [j for j in support if j not in drop]
            if j_new in drop:
                # numerically the new knot cannot enter; do not offer it again
                banned.add(j_new)
            if not support:
                f = _fit_on_knots(xs, y, w, np.array([0, n - 1]))
                break
    kinks = _kink_indices(xs, f)
    resid = float(np.sqrt(np.sum(w * (y - f) ** 2)))
    return ConvexFit(f, kinks, _extension(xs, f, kinks), resid)


def characterization_audit(s: SortedSample, fit: ConvexFit) -> CharacterizationAudit:
    f = np.asarray(fit.fitted, dtype=float)
    if f.shape != s.ys.shape:
        raise ValueError("fit and sample lengths differ")
    w = s.weights
    R = np.cumsum(w * f)
    S = np.cumsum(w * s.ys)
    dx = np.diff(s.xs)
    T = np.cumsum((R[:-1] - S[:-1]) * dx)  # T[j-2] is the slack for 1-based j
    if T.size == 0:
        return CharacterizationAudit(0.0, 0.0, np.inf, abs(R[-1] - S[-1]))
    kink_pos = np.asarray(fit.kinks, dtype=int) - 1
    kink_mask = np.zeros(T.size, dtype=bool)
    kink_mask[kink_pos[(kink_pos >= 0) & (kink_pos < T.size)]] = True
    max_gap = float(np.max(np.abs(T[kink_mask]))) if kink_mask.any() else 0.0
    nonkink = T[:-1][~kink_mask[:-1]]  # T_n is always zero, exclude it
    return CharacterizationAudit(
        min_slack=float(np.min(T)),
        max_kink_gap=max_gap,
        min_nonkink_slack=float(np.min(nonkink)) if nonkink.size else np.inf,
        end_gap=float(abs(T[-1]) + abs(R[-1] - S[-1])),
    )


def _second_differences(xs: np.ndarray) -> np.ndarray:
    n = xs.size
    h = np.diff(xs)
    D = np.zeros((max(n - 2, 0), n))
    for i in range(1, n - 1):
        D[i - 1, i - 1] = 1 / h[i - 1]
        D[i - 1, i] = -1 / h[i - 1] - 1 / h[i]
        D[i - 1, i + 1] = 1 / h[i]
    return D


def brute_force_convex(s: SortedSample) -> ConvexFit:
    """Exact convex LSE by enumerating every candidate active set (n <= 12).

    Each subset of second-difference constraints is imposed as equalities and
    the resulting least squares problem is solved in the null space of the
    active rows; the best feasible candidate is the projection.
    """
    xs, y, w = s.xs, s.ys, s.weights
    n = xs.size
    if n > 12:
        raise ValueError("brute force enumeration is limited to n <= 12")
    if n < 2:
        raise ValueError("convex fit needs at least two design points")
    D = _second_differences(xs)
    sw = np.sqrt(w)
    best, best_obj = None, np.inf
    rows = range(D.shape[0])
    for r in range(D.shape[0] + 1):
        for active in itertools.combinations(rows, r):
            if active:
                _, sv, vt = np.linalg.svd(D[list(active)])
                rank = int(np.sum(sv > 1e-12 * sv[0]))
                N = vt[rank:].T
            else:
                N = np.eye(n)
            coef, *_ = np.linalg.lstsq(sw[:, None] * N, sw * y, rcond=None)
            f = N @ coef
            d = D @ f if D.size else np.empty(0)
            if d.size and np.min(d) < -1e-9 * max(1.0, np.max(np.abs(d))):
                continue
            obj = float(np.sum(w * (y - f) ** 2))
            if best is None or obj < best_obj - 1e-14 * max(1.0, best_obj):
                best, best_obj = f, obj
    kinks = _kink_indices(xs, best)
    return ConvexFit(best, kinks, _extension(xs, best, kinks), float(np.sqrt(best_obj)))


def active_set_qp(A: np.ndarray, q: np.ndarray, D: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Minimize 1/2 c'Ac - q'c subject to Dc >= 0, A positive definite.

    Primal active-set method started from the feasible point c = 0 with every
    constraint in the working set.
    """
    k = A.shape[0]
    m = D.shape[0]
    c = np.zeros(k)
    if m == 0:
        return np.linalg.solve(A, q)
    work = list(range(m))
    scale = max(1.0, float(np.max(np.abs(q))))
    for _ in range(50 * (m + k)):
        Dw = D[work]
        kkt = np.block([[A, Dw.T], [Dw, np.zeros((len(work), len(work)))]]) if work else A
        rhs = np.concatenate([q, np.zeros(len(work))]) if work else q
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        target = sol[:k]
        p = target - c
        if np.max(np.abs(p)) <= tol * max(1.0, np.max(np.abs(c))):
            if not work:
                return c
            lam = -sol[k:]  # A c - q = Dw' lam
            i = int(np.argmin(lam))
            if lam[i] >= -tol * scale:
                return c
            work.pop(i)
            continue
        Dp = D @ p
        Dc = D @ c
        alpha, block = 1.0, None
        for i in range(m):
            if i not in work and Dp[i] < 0:
                a = -Dc[i] / Dp[i]
                if a < alpha:
                    alpha, block = a, i
        c = c + max(alpha, 0.0) * p
        if block is not None:
            work.append(block)
    raise RuntimeError("active-set QP did not converge")
