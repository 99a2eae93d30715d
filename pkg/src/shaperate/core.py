"""Domain types and exact L2 losses for functions on [0, 1] under the uniform law."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "SortedSample",
    "StepFunction",
    "PiecewiseLinearFunction",
    "SignalSpec",
    "make_sorted_sample",
    "l2_loss",
    "best_m_piece_approximation",
    "gauss_legendre",
]

SIGNAL_KINDS = ("constant", "linear", "step_train", "convex_poly", "custom_grid")

_GL_NODES = 16


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def gauss_legendre(a: float, b: float, k: int = _GL_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the k-point Gauss-Legendre rule on [a, b]."""
    t, w = np.polynomial.legendre.leggauss(k)
    half = 0.5 * (b - a)
    return a + half * (t + 1.0), half * w


@dataclass(frozen=True, eq=False)
class SortedSample:
    """Design points in [0, 1], strictly increasing, with paired responses.

    ``weights`` counts how many raw observations were pooled into each point.
    """

    xs: np.ndarray
    ys: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        xs = _as_float_array(self.xs, "xs")
        ys = _as_float_array(self.ys, "ys")
        if xs.size == 0:
            raise ValueError("sample must contain at least one point")
        if xs.shape != ys.shape:
            raise ValueError("xs and ys must have the same length")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        if np.any((xs < 0) | (xs > 1)):
            raise ValueError("xs must lie in [0, 1]")
        w = np.ones_like(xs) if self.weights is None else _as_float_array(self.weights, "weights")
        if w.shape != xs.shape:
            raise ValueError("weights must have the same length as xs")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.xs.size

    def with_responses(self, ys) -> "SortedSample":
        return SortedSample(self.xs, ys, self.weights)


def make_sorted_sample(xs_raw: Sequence[float], ys_raw: Sequence[float]) -> SortedSample:
    """Sort pairs by x and pool exact duplicate x values.

    Pooled points carry the mean response and a weight equal to their
    multiplicity.

    >>> s = make_sorted_sample([0.5, 0.5], [1.0, 3.0])
    >>> s.xs.tolist(), s.ys.tolist(), s.weights.tolist()
    ([0.5], [2.0], [2.0])
    """
    xs = _as_float_array(xs_raw, "xs")
    ys = _as_float_array(ys_raw, "ys")
    if xs.shape != ys.shape:
        raise ValueError(f"length mismatch: {xs.size} xs vs {ys.size} ys")
    if xs.size == 0:
        raise ValueError("empty input")
    if np.any((xs < 0) | (xs > 1)) or not np.all(np.isfinite(xs)):
        raise ValueError("all x values must lie in [0, 1]")
    ux, inverse, counts = np.unique(xs, return_inverse=True, return_counts=True)
    if ux.size == xs.size:
        order = np.argsort(xs, kind="stable")
        return SortedSample(xs[order], ys[order])
    sums = np.bincount(inverse, weights=ys, minlength=ux.size)
    return SortedSample(ux, sums / counts, counts.astype(float))


# ---------------------------------------------------------------------------
# function representations


class _PiecewiseFunction:
    """Shared interface used by the loss routines.

    ``interior_breaks`` lists points in (0, 1) where the function may fail to
    be smooth; between consecutive breaks it is a polynomial of degree at most
    ``piece_degree`` (``None`` when it is not a polynomial).
    """

    piece_degree: int | None = None

    def interior_breaks(self) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class StepFunction(_PiecewiseFunction):
    """Left-continuous step function; piece j covers (b_{j-1}, b_j] with b_0 = 0.

    The first piece also covers x = 0. A first breakpoint equal to 0 gives a
    degenerate piece holding the value at x = 0 alone (a design point at 0
    can carry its own fitted value).
    """

    breakpoints: np.ndarray
    values: np.ndarray
    isotonic: bool = False

    piece_degree = 0

    def __post_init__(self):
        b = _as_float_array(self.breakpoints, "breakpoints")
        v = _as_float_array(self.values, "values")
        if b.size == 0 or b.size != v.size:
            raise ValueError("need one value per breakpoint")
        if b[-1] != 1.0 or b[0] < 0.0 or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing in [0, 1] and end at 1")
        if self.isotonic and np.any(np.diff(v) < 0):
            raise ValueError("isotonic step function must have non-decreasing values")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, c: float) -> "StepFunction":
        return cls(np.array([1.0]), np.array([float(c)]), isotonic=True)

    def interior_breaks(self) -> np.ndarray:
        b = self.breakpoints[:-1]
        return b[b > 0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="left")
        return self.values[np.clip(idx, 0, self.values.size - 1)]


@dataclass(frozen=True, eq=False)
class PiecewiseLinearFunction(_PiecewiseFunction):
    """Continuous linear interpolant through ``(knots, knot_values)``, knots spanning [0, 1]."""

    knots: np.ndarray
    knot_values: np.ndarray
    convex: bool = False

    piece_degree = 1

    def __post_init__(self):
        k = _as_float_array(self.knots, "knots")
        v = _as_float_array(self.knot_values, "knot_values")
        if k.size < 2 or k.size != v.size:
            raise ValueError("need at least two knots and one value per knot")
        if k[0] != 0.0 or k[-1] != 1.0 or np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing from 0 to 1")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "knot_values", v)
        if self.convex:
            s = self.slopes()
            if np.any(np.diff(s) < -1e-10 * max(1.0, np.max(np.abs(s)))):
                raise ValueError("convex flag set but slopes decrease")

    def slopes(self) -> np.ndarray:
        return np.diff(self.knot_values) / np.diff(self.knots)

    def interior_breaks(self) -> np.ndarray:
        return self.knots[1:-1]

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.knots, self.knot_values)


@dataclass(frozen=True, eq=False)
class SignalSpec(_PiecewiseFunction):
    """A regression signal on [0, 1].

    Parameter layout by ``kind``:

    * ``constant``: ``(c,)``
    * ``linear``: ``(a, b)`` for ``a + b x``
    * ``step_train``: ``(b_1, ..., b_{m-1}, v_1, ..., v_m)``, left-continuous
    * ``convex_poly``: ascending polynomial coefficients ``(c_0, c_1, ...)``
      (convexity is the caller's concern; any polynomial evaluates)
    * ``custom_grid``: ``(t_0, ..., t_k, y_0, ..., y_k)`` with t_0 = 0 and
      t_k = 1, linear interpolation in between
    """

    kind: str
    params: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}; expected one of {SIGNAL_KINDS}")
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if not all(np.isfinite(p)):
            raise ValueError("signal parameters must be finite")
        if self.kind == "constant" and len(p) != 1:
            raise ValueError("constant signal takes one parameter")
        if self.kind == "linear" and len(p) != 2:
            raise ValueError("linear signal takes two parameters (a, b)")
        if self.kind == "convex_poly" and len(p) < 1:
            raise ValueError("polynomial signal needs at least one coefficient")
        if self.kind == "step_train":
            if len(p) % 2 != 1:
                raise ValueError("step_train takes m-1 breakpoints followed by m values")
            b = np.array(p[: len(p) // 2])
            if b.size and (b[0] <= 0 or b[-1] >= 1 or np.any(np.diff(b) <= 0)):
                raise ValueError("step_train breakpoints must increase strictly inside (0, 1)")
        if self.kind == "custom_grid":
            if len(p) < 4 or len(p) % 2:
                raise ValueError("custom_grid takes k+1 grid points followed by k+1 values")
            t = np.array(p[: len(p) // 2])
            if t[0] != 0 or t[-1] != 1 or np.any(np.diff(t) <= 0):
                raise ValueError("custom_grid points must increase strictly from 0 to 1")

    # convenience constructors
    @classmethod
    def constant(cls, c: float) -> "SignalSpec":
        return cls("constant", (c,))

    @classmethod
    def linear(cls, a: float, b: float) -> "SignalSpec":
        return cls("linear", (a, b))

    @classmethod
    def step_train(cls, breaks: Sequence[float], values: Sequence[float]) -> "SignalSpec":
        return cls("step_train", tuple(breaks) + tuple(values))

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "SignalSpec":
        return cls("convex_poly", tuple(coeffs))

    @classmethod
    def grid(cls, ts: Sequence[float], ys: Sequence[float]) -> "SignalSpec":
        return cls("custom_grid", tuple(ts) + tuple(ys))

    @property
    def piece_degree(self) -> int:
        if self.kind in ("constant", "step_train"):
            return 0
        if self.kind in ("linear", "custom_grid"):
            return 1
        return len(self.params) - 1

    def _split(self):
        h = len(self.params) // 2
        return np.array(self.params[:h]), np.array(self.params[h:])

    def interior_breaks(self) -> np.ndarray:
        if self.kind == "step_train":
            return self._split()[0]
        if self.kind == "custom_grid":
            return self._split()[0][1:-1]
        return np.empty(0)

    def shifted(self, d: float) -> "SignalSpec":
        p = list(self.params)
        if self.kind in ("constant", "linear", "convex_poly"):
            p[0] += d
        elif self.kind == "step_train":
            h = len(p) // 2
            p[h:] = [v + d for v in p[h:]]
        else:
            h = len(p) // 2
            p[h:] = [v + d for v in p[h:]]
        return SignalSpec(self.kind, tuple(p))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full_like(x, p[0])
        if self.kind == "linear":
            return p[0] + p[1] * x
        if self.kind == "convex_poly":
            return np.polynomial.polynomial.polyval(x, np.array(p)) + 0.0 * x
        if self.kind == "step_train":
            b, v = self._split()
            return v[np.searchsorted(b, x, side="left")]
        t, y = self._split()
        return np.interp(x, t, y)


FunctionLike = Union[StepFunction, PiecewiseLinearFunction, SignalSpec, Callable]


def _breaks_of(f) -> np.ndarray:
    if isinstance(f, _PiecewiseFunction):
        return f.interior_breaks()
    return np.empty(0)


def _degree_of(f) -> int | None:
    if isinstance(f, _PiecewiseFunction):
        return f.piece_degree
    return None


def _merged_edges(*fs, extra=()) -> np.ndarray:
    pts = [np.array([0.0, 1.0]), np.asarray(extra, dtype=float)]
    pts += [_breaks_of(f) for f in fs]
    e = np.unique(np.concatenate(pts))
    return e[(e >= 0) & (e <= 1)]


# interior nodes of [0, 1]; a quadratic is recovered exactly from its values there
_LAGRANGE_T = np.array([1 / 6, 1 / 2, 5 / 6])
_LAGRANGE_INV = np.linalg.inv(np.vander(_LAGRANGE_T, 3, increasing=True))


def _integrate_sq_quadratic(lo: np.ndarray, hi: np.ndarray, d_vals: np.ndarray) -> np.ndarray:
    """Exact integral of d(x)^2 over [lo, hi] for d quadratic on each segment.

    ``d_vals[:, k]`` holds d at lo + t_k (hi - lo).
    """
    c = d_vals @ _LAGRANGE_INV.T  # coefficients in the local variable t in [0, 1]
    c0, c1, c2 = c[:, 0], c[:, 1], c[:, 2]
    unit = c0 * c0 + c0 * c1 + (2 * c0 * c2 + c1 * c1) / 3 + c1 * c2 / 2 + c2 * c2 / 5
    return (hi - lo) * unit


def l2_loss(f: FunctionLike, g: FunctionLike) -> float:
    """Squared L2(P) distance between two functions on [0, 1], P uniform.

    Exact when both arguments are piecewise polynomials of degree at most
    two on a known partition; otherwise 16-point Gauss-Legendre per merged
    segment.
    """
    edges = _merged_edges(f, g)
    lo, hi = edges[:-1], edges[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    df, dg = _degree_of(f), _degree_of(g)
    if df is not None and dg is not None and max(df, dg) <= 2:
        x = lo[:, None] + (hi - lo)[:, None] * _LAGRANGE_T[None, :]
        d = f(x) - g(x)
        return float(max(np.sum(_integrate_sq_quadratic(lo, hi, d)), 0.0))
    t, w = np.polynomial.legendre.leggauss(_GL_NODES)
    half = 0.5 * (hi - lo)
    x = lo[:, None] + half[:, None] * (t[None, :] + 1.0)
    d = np.asarray(f(x), dtype=float) - np.asarray(g(x), dtype=float)
    return float(np.sum(half[:, None] * w[None, :] * d * d))


# ---------------------------------------------------------------------------
# best m-piece approximation


def _cell_moments(g: FunctionLike, grid: np.ndarray):
    """Per-cell integrals of g, x g and g^2 over consecutive grid cells.

    Cells are split at the breaks of g so each sub-piece is smooth; 16-point
    Gauss-Legendre is then exact for the polynomial signals used here.
    """
    edges = np.unique(np.concatenate([grid, _breaks_of(g)]))
    lo, hi = edges[:-1], edges[1:]
    t, w = np.polynomial.legendre.leggauss(_GL_NODES)
    half = 0.5 * (hi - lo)
    x = lo[:, None] + half[:, None] * (t[None, :] + 1.0)
    gx = np.asarray(g(x), dtype=float)
    ww = half[:, None] * w[None, :]
    m0 = np.sum(ww * gx, axis=1)
    m1 = np.sum(ww * gx * x, axis=1)
    m2 = np.sum(ww * gx * gx, axis=1)
    cell = np.searchsorted(grid, 0.5 * (lo + hi), side="right") - 1
    ncell = grid.size - 1
    return (np.bincount(cell, m0, ncell), np.bincount(cell, m1, ncell), np.bincount(cell, m2, ncell))


def _segment_costs(g: FunctionLike, grid: np.ndarray, family: str) -> np.ndarray:
    """cost[j, k] = min squared L2 error of one piece on [grid[j], grid[k]]."""
    m0, m1, m2 = _cell_moments(g, grid)
    c0 = np.concatenate([[0.0], np.cumsum(m0)])
    c1 = np.concatenate([[0.0], np.cumsum(m1)])
    c2 = np.concatenate([[0.0], np.cumsum(m2)])
    G0 = c0[None, :] - c0[:, None]
    G1 = c1[None, :] - c1[:, None]
    G2 = c2[None, :] - c2[:, None]
    L = grid[None, :] - grid[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = G2 - G0 * G0 / L
        if family == "linear_convex":
            mid = 0.5 * (grid[None, :] + grid[:, None])
            G1c = G1 - mid * G0
            cost = cost - G1c * G1c / (L ** 3 / 12.0)
    cost = np.where(L > 0, np.maximum(cost, 0.0), np.inf)
    return cost


def _dp_partitions(cost: np.ndarray, m: int) -> list[list[int]]:
    """Optimal grid partitions into exactly p pieces, for p = 1..m."""
    K = cost.shape[0]
    D = np.full(K, np.inf)
    D[0] = 0.0
    back = []
    out = []
    for _ in range(m):
        tot = D[:, None] + cost
        arg = np.argmin(tot, axis=0)
        D = tot[arg, np.arange(K)]
        back.append(arg)
        if np.isfinite(D[-1]):
            cuts = [K - 1]
            for b in reversed(back):
                cuts.append(int(b[cuts[-1]]))
            out.append(cuts[::-1])
        else:
            out.append(None)
    return out


def _segment_quadrature(g: FunctionLike, a: float, b: float):
    """Gauss-Legendre nodes and weights on [a, b], split at the breaks of g."""
    e = _merged_edges(g, extra=[a, b])
    e = e[(e >= a) & (e <= b)]
    rules = [gauss_legendre(lo, hi) for lo, hi in zip(e[:-1], e[1:]) if hi > lo]
    return np.concatenate([r[0] for r in rules]), np.concatenate([r[1] for r in rules])


def _segment_fit(g: FunctionLike, a: float, b: float, family: str) -> tuple[float, float]:
    """Best constant (slope 0) or line on [a, b], as (value at midpoint, slope)."""
    x, w = _segment_quadrature(g, a, b)
    gx = np.asarray(g(x), dtype=float)
    L = b - a
    mean = np.sum(w * gx) / L
    if family == "constant":
        return mean, 0.0
    slope = np.sum(w * gx * (x - 0.5 * (a + b))) / (L ** 3 / 12.0)
    return mean, slope


def _project_convex_pl(g: FunctionLike, knots: np.ndarray) -> PiecewiseLinearFunction:
    """L2(P) projection of g onto continuous convex piecewise-linear functions with the given knots."""
    from .convex import active_set_qp

    k = knots.size
    # Gram matrix of hat functions (tridiagonal) and inner products with g
    h = np.diff(knots)
    A = np.zeros((k, k))
    A[np.arange(k - 1), np.arange(k - 1)] += h / 3
    A[np.arange(1, k), np.arange(1, k)] += h / 3
    A[np.arange(k - 1), np.arange(1, k)] += h / 6
    A[np.arange(1, k), np.arange(k - 1)] += h / 6
    q = np.zeros(k)
    for j in range(k - 1):
        a, b = knots[j], knots[j + 1]
        x, w = _segment_quadrature(g, a, b)
        gx = np.asarray(g(x), dtype=float)
        lam = (x - a) / (b - a)
        q[j] += np.sum(w * gx * (1 - lam))
        q[j + 1] += np.sum(w * gx * lam)
    # slope(j+1) - slope(j) >= 0 at every interior knot
    D = np.zeros((max(k - 2, 0), k))
    for i in range(1, k - 1):
        D[i - 1, i - 1] = 1 / h[i - 1]
        D[i - 1, i] = -1 / h[i - 1] - 1 / h[i]
        D[i - 1, i + 1] = 1 / h[i]
    vals = active_set_qp(A, q, D)
    return PiecewiseLinearFunction(knots, vals)


def best_m_piece_approximation(
    g: FunctionLike, m: int, family: str = "constant", grid_size: int = 256
):
    """Best approximation of g by at most m pieces, breakpoints on an equispaced grid.

    ``family="constant"`` gives piecewise-constant approximants (each piece is
    the segment mean of g); ``family="linear_convex"`` gives continuous convex
    piecewise-linear approximants. For the latter the unconstrained piecewise-
    linear dynamic program picks the breakpoints and the result is projected
    onto continuous convex functions with those knots, so the error is an
    upper bound on the true infimum.

    Returns ``(approximant, squared_error)``.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if grid_size < 64:
        raise ValueError("grid_size must be at least 64")
    if m > grid_size:
        raise ValueError("m cannot exceed grid_size")
    if family not in ("constant", "linear_convex"):
        raise ValueError(f"unknown family {family!r}")
    grid = np.linspace(0.0, 1.0, grid_size + 1)
    cost = _segment_costs(g, grid, family)
    parts = _dp_partitions(cost, m)
    best = None
    for cuts in parts:
        if cuts is None:
            continue
        edges = grid[cuts]
        if family == "constant":
            vals = np.array([_segment_fit(g, a, b, "constant")[0] for a, b in zip(edges[:-1], edges[1:])])
            approx = StepFunction(edges[1:], vals)
        else:
            approx = _convex_from_pieces(g, edges)
        err = l2_loss(approx, g)
        if best is None or err < best[1]:
            best = (approx, err)
    return best


def _convex_from_pieces(g: FunctionLike, edges: np.ndarray) -> PiecewiseLinearFunction:
    """Turn per-segment best lines into a continuous convex piecewise-linear function.

    When the segment lines already join continuously with non-decreasing
    slopes they are used as is; otherwise the repair is the exact projection
    onto the convex cone over the same knots.
    """
    fits = [_segment_fit(g, a, b, "linear_convex") for a, b in zip(edges[:-1], edges[1:])]
    mids = 0.5 * (edges[:-1] + edges[1:])
    left = np.array([v + s * (a - c) for (v, s), a, c in zip(fits, edges[:-1], mids)])
    right = np.array([v + s * (b - c) for (v, s), b, c in zip(fits, edges[1:], mids)])
    slopes = np.array([s for _, s in fits])
    scale = max(1.0, float(np.max(np.abs(right))), float(np.max(np.abs(left))))
    continuous = np.all(np.abs(left[1:] - right[:-1]) <= 1e-9 * scale)
    if continuous and np.all(np.diff(slopes) >= -1e-9 * max(1.0, np.max(np.abs(slopes)))):
        vals = np.concatenate([[left[0]], right])
        return PiecewiseLinearFunction(edges, vals)
    return _project_convex_pl(g, edges)
