"""Additive shape-constrained least squares Y = f(X) + h(Z) + noise by backfitting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .convex import CharacterizationAudit, ConvexFit, characterization_audit, fit_convex
from .core import PiecewiseLinearFunction, SortedSample, StepFunction
from .isotonic import IsotonicFit, fit_isotonic, minmax_all

__all__ = [
    "BivariateSample",
    "HClass",
    "HFunction",
    "AdditiveFit",
    "fit_additive",
    "partial_residual_audit",
]

SHAPES = ("isotonic", "convex")
H_KINDS = ("affine_bounded", "binned_sieve", "centered_interval_indicators")


@dataclass(frozen=True, eq=False)
class BivariateSample:
    """Raw observations (X_i, Z_i, Y_i); order is arbitrary and x values may repeat."""

    xs: np.ndarray
    zs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=float) for a in (self.xs, self.zs, self.ys)]
        if any(a.ndim != 1 for a in arrs):
            raise ValueError("xs, zs and ys must be one-dimensional")
        if not arrs[0].size == arrs[1].size == arrs[2].size:
            raise ValueError("xs, zs and ys must have equal lengths")
        if arrs[0].size == 0:
            raise ValueError("sample must contain at least one point")
        for name, a in zip(("xs", "zs"), arrs[:2]):
            if not np.all(np.isfinite(a)) or np.any((a < 0) | (a > 1)):
                raise ValueError(f"{name} must lie in [0, 1]")
        if not np.all(np.isfinite(arrs[2])):
            raise ValueError("ys must be finite")
        for name, a in zip(("xs", "zs", "ys"), arrs):
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return self.xs.size


@dataclass(frozen=True)
class HClass:
    """Second-component class.

    affine_bounded ``{"B"}``: h(z) = beta (z - 1/2) with |beta| <= B.
    binned_sieve ``{"bins", "B"}``: piecewise constant on equal bins, values in [-B, B].
    centered_interval_indicators ``{"grid"}``: 1_[a,b](z) - (b - a), endpoints on
    the grid k / grid, plus the zero function.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in H_KINDS:
            raise ValueError(f"unknown H class {self.kind!r}; expected one of {H_KINDS}")
        defaults = {
            "affine_bounded": {"B": 1.0},
            "binned_sieve": {"bins": 8, "B": 1.0},
            "centered_interval_indicators": {"grid": 32},
        }[self.kind]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValueError(f"unknown parameter(s) {sorted(unknown)} for {self.kind}")
        p = {**defaults, **self.params}
        if "B" in p:
            p["B"] = float(p["B"])
            if p["B"] < 0:
                raise ValueError("B must be non-negative")
        for k in ("bins", "grid"):
            if k in p:
                if int(p[k]) != p[k] or p[k] < 1:
                    raise ValueError(f"{k} must be a positive integer")
                p[k] = int(p[k])
        object.__setattr__(self, "params", p)

    @property
    def sup_bound(self) -> float:
        return 1.0 if self.kind == "centered_interval_indicators" else self.params["B"]

    @property
    def entropy_condition_nominal(self) -> bool:
        """Whether log N(eps, H, L_inf) grows at most polynomially in 1/eps with exponent < 2.

        Recorded, not verified: finite-dimensional bounded classes qualify;
        interval indicators are not totally bounded in sup norm.
        """
        return self.kind != "centered_interval_indicators"

    def zero(self) -> "HFunction":
        return HFunction(self.kind, np.zeros(self._size()), 0.0, self.params)

    def _size(self) -> int:
        return {"affine_bounded": 1, "binned_sieve": self.params.get("bins", 1),
                "centered_interval_indicators": 2}[self.kind]

    def random_member(self, rng: np.random.Generator) -> "HFunction":
        p = self.params
        if self.kind == "affine_bounded":
            coef = rng.uniform(-p["B"], p["B"], 1)
        elif self.kind == "binned_sieve":
            coef = rng.uniform(-p["B"], p["B"], p["bins"])
        else:
            ends = np.sort(rng.choice(p["grid"] + 1, 2, replace=False)) / p["grid"]
            coef = ends
        return HFunction(self.kind, coef, 0.0, p)


@dataclass(frozen=True, eq=False)
class HFunction:
    """A member of an HClass minus an empirical offset.

    ``coef`` is beta (affine), bin values (sieve) or interval ends (indicators).
    """

    kind: str
    coef: np.ndarray
    offset: float
    params: dict

    def base(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.kind == "affine_bounded":
            return self.coef[0] * (z - 0.5)
        if self.kind == "binned_sieve":
            k = np.minimum((z * self.coef.size).astype(int), self.coef.size - 1)
            return self.coef[k]
        a, b = self.coef
        if b <= a:
            return np.zeros_like(z)
        return ((z >= a) & (z <= b)).astype(float) - (b - a)

    def __call__(self, z) -> np.ndarray:
        return self.base(z) - self.offset

    def recentered(self, zs) -> tuple["HFunction", float]:
        """Copy with empirical mean zero over ``zs``, and the removed constant."""
        m = float(np.mean(self(zs)))
        return HFunction(self.kind, self.coef, self.offset + m, self.params), m


@dataclass(frozen=True, eq=False)
class AdditiveFit:
    shape: str
    f_hat: IsotonicFit | ConvexFit
    f_sample: SortedSample  # pooled partial residuals the final f-step was fitted to
    h_hat: HFunction
    objective_trace: np.ndarray  # mean squared residual after each half-step
    converged: bool
    iterations: int

    def f_at(self, x) -> np.ndarray:
        return self.f_hat.extension(x)

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


class _Design:
    """Pooling structure of the x values, reused at every f-step."""

    def __init__(self, s: BivariateSample):
        self.ux, self.inverse, counts = np.unique(s.xs, return_inverse=True, return_counts=True)
        self.counts = counts.astype(float)

    def pooled(self, r: np.ndarray) -> SortedSample:
        means = np.bincount(self.inverse, weights=r, minlength=self.ux.size) / self.counts
        return SortedSample(self.ux, means, self.counts)


def _shape_fit(shape: str, sample: SortedSample):
    return fit_isotonic(sample) if shape == "isotonic" else fit_convex(sample)


def _h_step(hclass: HClass, zs: np.ndarray, r: np.ndarray) -> tuple[HFunction, float]:
    """Exact minimizer over h in H and a free constant c of sum (r - h(z) - c)^2.

    Returns the recentered member and the constant to move into f.
    """
    p = hclass.params
    if hclass.kind == "affine_bounded":
        u = zs - 0.5
        uc = u - u.mean()
        denom = float(uc @ uc)
        beta = float(uc @ r) / denom if denom > 0 else 0.0
        beta = float(np.clip(beta, -p["B"], p["B"]))
        h = HFunction(hclass.kind, np.array([beta]), 0.0, p)
        c = float(np.mean(r - h(zs)))
    elif hclass.kind == "binned_sieve":
        G = p["bins"]
        k = np.minimum((zs * G).astype(int), G - 1)
        cnt = np.bincount(k, minlength=G)
        sums = np.bincount(k, weights=r, minlength=G)
        means = np.divide(sums, cnt, out=np.zeros(G), where=cnt > 0)
        c = _sieve_constant(means, cnt.astype(float), p["B"])
        h = HFunction(hclass.kind, np.clip(means - c, -p["B"], p["B"]), 0.0, p)
    else:
        h, c = _best_interval(zs, r, p["grid"], p)
    h, m = h.recentered(zs)
    return h, c + m


def _sieve_constant(means, counts, B) -> float:
    """argmin over c of sum_k counts_k (|means_k - c| - B)_+^2.

    With bin values clipped to [-B, B] and a free constant, only the excess of
    each bin mean beyond c +- B remains. The profile is convex and piecewise
    quadratic with breaks at means +- B, so each piece is solved in closed form.
    """
    occupied = counts > 0
    m, w = means[occupied], counts[occupied]
    if m.size == 0:
        return 0.0
    breaks = np.unique(np.concatenate([m - B, m + B]))
    edges = np.concatenate([[-np.inf], breaks, [np.inf]])

    def profile(c):
        return float(w @ np.maximum(np.abs(m - c) - B, 0.0) ** 2)

    best_c, best_v = 0.0, profile(0.0) if B > 0 else np.inf
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi) if np.isfinite(lo) and np.isfinite(hi) else (hi - 1 if np.isfinite(hi) else lo + 1)
        above, below = m - B > mid, m + B < mid
        ww = w[above].sum() + w[below].sum()
        if ww == 0:
            c = float(np.clip(0.0, lo, hi))
        else:
            c = float(np.clip(((w[above] @ (m[above] - B)) + (w[below] @ (m[below] + B))) / ww, lo, hi))
        v = profile(c)
        if v < best_v:
            best_c, best_v = c, v
    return best_c


def _best_interval(zs, r, grid, params):
    """Exhaustive search over grid intervals [a, b] (and the zero function) via prefix sums."""
    n = r.size
    g = np.arange(grid + 1) / grid
    order = np.argsort(zs)
    zsorted = zs[order]
    csum = np.concatenate([[0.0], np.cumsum(r[order])])
    le = np.searchsorted(zsorted, g, side="right")  # number of z <= g_j
    lt = np.searchsorted(zsorted, g, side="left")  # number of z < g_i
    N = le[None, :] - lt[:, None]
    S = csum[le][None, :] - csum[lt][:, None]
    rbar = csum[-1] / n
    # sum (r - 1_in - c)^2 minimized over c, minus sum r^2
    obj = -2.0 * S + N - n * (rbar - N / n) ** 2
    obj = np.where(np.triu(np.ones_like(obj, dtype=bool), k=1), obj, np.inf)
    i, j = np.unravel_index(np.argmin(obj), obj.shape)
    if obj[i, j] < -n * rbar ** 2:
        h = HFunction("centered_interval_indicators", np.array([g[i], g[j]]), 0.0, params)
    else:
        h = HFunction("centered_interval_indicators", np.zeros(2), 0.0, params)
    return h, float(np.mean(r - h(zs)))


def _objective(s, fx, h) -> float:
    return float(np.mean((s.ys - fx - h(s.zs)) ** 2))


def _extrapolate(s, design, shape, hclass, h, h_prev, obj):
    """Try h + t (h - h_prev) for t = 1, 2, 4, ... with f refitted; keep the best.

    Backfitting between two cones zigzags slowly; for the linear-parameter
    classes this step restores fast convergence. A candidate is accepted only
    if it lowers the objective, so monotonicity is preserved.
    """
    d = h.coef - h_prev.coef
    if not np.any(d):
        return None
    B = hclass.params["B"]
    best = None
    t = 1.0
    for _ in range(30):
        cand, _ = HFunction(h.kind, np.clip(h.coef + t * d, -B, B), 0.0, h.params).recentered(s.zs)
        fit = _shape_fit(shape, design.pooled(s.ys - cand(s.zs)))
        val = _objective(s, fit.fitted[design.inverse], cand)
        if val >= obj:
            break
        best, obj = (cand, fit, val), val
        t *= 2.0
    return best


def _backfit(s, design, shape, hclass, h0, tol, max_iters):
    h = h0
    trace = []
    prev = np.inf
    converged = False
    accelerate = hclass.kind != "centered_interval_indicators"
    it = 0
    for it in range(1, max_iters + 1):
        fsample = design.pooled(s.ys - h(s.zs))
        fit = _shape_fit(shape, fsample)
        fx = fit.fitted[design.inverse]
        trace.append(_objective(s, fx, h))
        h_prev = h
        h, shift = _h_step(hclass, s.zs, s.ys - fx)
        obj = _objective(s, fx + shift, h)
        trace.append(obj)
        if accelerate and it > 1:
            step = _extrapolate(s, design, shape, hclass, h, h_prev, obj)
            if step is not None:
                h, fit, obj = step
                fsample = design.pooled(s.ys - h(s.zs))
                shift = 0.0
                trace.append(obj)
        if obj <= 0.0 or prev - obj < tol * prev:
            converged = True
            break
        prev = obj
    if converged:
        # the constant moved out of h belongs to f; refitting f restores the exact projection
        fsample = design.pooled(s.ys - h(s.zs))
        fit = _shape_fit(shape, fsample)
    else:
        fit = _shift_fit(fit, shift)
        fsample = fsample.with_responses(fsample.ys + shift)
    trace.append(_objective(s, fit.fitted[design.inverse], h))
    return fit, fsample, h, np.array(trace), converged, it


def _shift_fit(fit, c: float):
    """The same fit moved up by the constant c."""
    if isinstance(fit, IsotonicFit):
        ext = StepFunction(fit.extension.breakpoints, fit.extension.values + c, isotonic=True)
        blocks = [(a, b, m + c, w) for (a, b, m, w) in fit.blocks]
        return IsotonicFit(fit.fitted + c, ext, blocks)
    ext = PiecewiseLinearFunction(fit.extension.knots, fit.extension.knot_values + c, convex=True)
    return ConvexFit(fit.fitted + c, fit.kinks, ext, fit.residual_norm)


def fit_additive(
    s: BivariateSample,
    shape: str,
    hclass: HClass,
    tol: float = 1e-10,
    max_iters: int = 500,
    restarts: int = 1,
    seed=0,
) -> AdditiveFit:
    """Joint least squares over f in the shape class and h in ``hclass``.

    Backfitting alternates the exact shape-constrained fit of Y - h(Z) and the
    exact H-projection of Y - f(X); h is recentered to empirical mean zero and
    its mean moved into f, which keeps the objective non-increasing. Stops when
    a cycle lowers the objective by less than ``tol`` relative. ``restarts``
    > 1 adds random initial h and keeps the lowest objective, since the
    problem is non-convex for indicator classes.
    """
    if shape not in SHAPES:
        raise ValueError(f"shape must be one of {SHAPES}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iters < 1 or restarts < 1:
        raise ValueError("max_iters and restarts must be at least 1")
    design = _Design(s)
    rng = np.random.default_rng(seed)
    best = None
    for r in range(restarts):
        h0 = hclass.zero() if r == 0 else hclass.random_member(rng)
        h0, _ = h0.recentered(s.zs)
        fit, fsample, h, trace, conv, it = _backfit(s, design, shape, hclass, h0, tol, max_iters)
        cand = AdditiveFit(shape, fit, fsample, h, trace, conv, it)
        if best is None or cand.objective < best.objective:
            best = cand
    return best


def partial_residual_audit(s: BivariateSample, fit: AdditiveFit) -> float | CharacterizationAudit:
    """Check the fitted f against the fixed-point representation of the additive LSE.

    Isotonic: max_j |f(X_j) - min_{v>=j} max_{u<=j} mean(Y - h(Z))[u..v]| on the
    pooled, x-sorted partial residuals. Convex: the characterization audit of
    the convex fit on the same partial residuals.
    """
    design = _Design(s)
    sample = design.pooled(s.ys - fit.h_hat(s.zs))
    if fit.shape == "convex":
        return characterization_audit(sample, fit.f_hat)
    f_vals = fit.f_hat.extension(sample.xs)
    return float(np.max(np.abs(f_vals - minmax_all(sample))))
