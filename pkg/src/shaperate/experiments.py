"""Monte Carlo risk curves, slope fits, oracle audits and the tree-class lower-bound probe."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .additive import BivariateSample, HClass, fit_additive
from .convex import fit_convex
from .core import (
    PiecewiseLinearFunction,
    SignalSpec,
    StepFunction,
    SortedSample,
    best_m_piece_approximation,
    gauss_legendre,
    l2_loss,
    make_sorted_sample,
)
from .envelopes import TreeClass, build_tree_class
from .isotonic import fit_isotonic, pava
from .noise import ErrorLaw, lp1_norm, sample

__all__ = [
    "ExperimentPlan",
    "BivariateSignal",
    "RiskCurve",
    "OracleAudit",
    "BoundednessProbe",
    "replication_rng",
    "summarize",
    "fit_loglog_slope",
    "trend_test",
    "project_grid",
    "compute_f0_star",
    "run_risk_curve",
    "run_oracle_audit",
    "run_boundedness_probe",
    "tree_lse",
    "tree_lse_bruteforce",
    "run_lower_bound_probe",
    "paired_slope_gap",
    "log_e",
]

ESTIMATORS = ("isotonic", "convex", "additive")
SUMMARIES = ("median", "trimmed_mean", "quantile", "mean")


def log_e(x):
    """log(x v e), the logarithm convention of the rate bounds."""
    return np.log(np.maximum(x, math.e))


@dataclass(frozen=True)
class BivariateSignal:
    """phi(x, z) = f_part(x) + h_part(z) + interaction * x * z."""

    f_part: SignalSpec
    h_part: SignalSpec | None = None
    interaction: float = 0.0

    def __call__(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        h = 0.0 if self.h_part is None else self.h_part(z)
        return self.f_part(x) + h + self.interaction * x * z

    def marginal(self):
        """x -> integral of phi(x, z) dz, as a signal when that is exact.

        With no interaction the marginal is f_part plus the mean of h_part;
        otherwise it is evaluated by 64-node Gauss-Legendre quadrature in z.
        """
        zn, zw = gauss_legendre(0.0, 1.0, 64)
        if self.interaction == 0.0:
            c = 0.0 if self.h_part is None else float(zw @ self.h_part(zn))
            return self.f_part.shifted(c) if c else self.f_part

        def marginal(x):
            x = np.asarray(x, dtype=float)
            return (self(x[..., None], zn) * zw).sum(axis=-1)

        return marginal


@dataclass(frozen=True)
class ExperimentPlan:
    estimator: str
    signal: SignalSpec | None
    law: ErrorLaw
    n_grid: tuple
    replications: int
    base_seed: int = 0
    loss_summary: str = "median"
    summary_param: float | None = None  # trimming fraction or quantile level
    bivariate: BivariateSignal | None = None
    shape: str = "isotonic"  # shape of f for the additive estimator
    hclass: HClass | None = None
    restarts: int = 3

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        grid = tuple(int(n) for n in self.n_grid)
        if len(grid) == 0 or any(n < 1 for n in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("n_grid must be a strictly increasing sequence of positive integers")
        object.__setattr__(self, "n_grid", grid)
        if self.replications < 30:
            raise ValueError("replications must be at least 30")
        if self.loss_summary not in SUMMARIES:
            raise ValueError(f"loss_summary must be one of {SUMMARIES}")
        if self.loss_summary == "trimmed_mean" and not 0 <= (self.summary_param or 0.1) < 0.5:
            raise ValueError("trimming fraction must lie in [0, 0.5)")
        if self.loss_summary == "quantile" and not 0 < (self.summary_param or 0.5) < 1:
            raise ValueError("quantile level must lie in (0, 1)")
        if self.estimator == "additive":
            if self.bivariate is None or self.hclass is None:
                raise ValueError("additive plans need a bivariate signal and an H class")
            if self.shape not in ("isotonic", "convex"):
                raise ValueError("shape must be isotonic or convex")
        elif self.signal is None:
            raise ValueError("plan needs a signal")

    @property
    def f_shape(self) -> str:
        return self.shape if self.estimator == "additive" else self.estimator

    def target_signal(self):
        """The regression function of Y on X alone."""
        return self.bivariate.marginal() if self.estimator == "additive" else self.signal


def replication_rng(base_seed: int, rep: int, n: int) -> np.random.Generator:
    """Generator for one replication: seeded by (base_seed XOR rep, base_seed, n).

    XOR alone would map the replication indices of a small base seed onto a
    permutation of the same indices, so the base seed is also mixed in
    directly. The design is always drawn first, so plans differing only in
    the error law share their designs replication by replication.
    """
    b = int(base_seed)
    return np.random.default_rng([b ^ int(rep), b, int(n)])


def summarize(losses: np.ndarray, kind: str = "median", param: float | None = None):
    """Robust location summary along the last axis; ``mean`` may not exist for heavy-tailed losses."""
    losses = np.asarray(losses, dtype=float)
    if kind == "median":
        out = np.median(losses, axis=-1)
    elif kind == "trimmed_mean":
        out = stats.trim_mean(losses, 0.1 if param is None else param, axis=-1)
    elif kind == "quantile":
        out = np.quantile(losses, 0.5 if param is None else param, axis=-1)
    elif kind == "mean":
        out = np.mean(losses, axis=-1)
    else:
        raise ValueError(f"unknown summary {kind!r}")
    return float(out) if np.ndim(out) == 0 else out


def fit_loglog_slope(ns, summaries) -> tuple[float, float]:
    """OLS slope of log summary on log n and its standard error."""
    ns = np.asarray(ns, dtype=float)
    v = np.asarray(summaries, dtype=float)
    if ns.size != v.size:
        raise ValueError("ns and summaries differ in length")
    if ns.size < 4:
        raise ValueError("need at least four points to fit a slope")
    if np.any(v <= 0) or np.any(ns <= 0):
        raise ValueError("summaries and sample sizes must be positive")
    res = stats.linregress(np.log(ns), np.log(v))
    return float(res.slope), float(res.stderr)


def _bootstrap_slopes(ns, matrices, n_boot, seed, kind="median", param=None):
    """Bootstrap log-log slopes for one or more paired loss matrices.

    Each row of a matrix holds one n; replications are resampled within a row
    with the same indices across the paired matrices.
    """
    rng = np.random.default_rng(seed)
    reps = matrices[0].shape[1]
    out = np.empty((n_boot, len(matrices)))
    logn = np.log(np.asarray(ns, dtype=float))
    xc = logn - logn.mean()
    for b in range(n_boot):
        idx = rng.integers(0, reps, size=(len(ns), reps))
        for k, M in enumerate(matrices):
            res = np.take_along_axis(M, idx, axis=1)
            s = summarize(res, kind, param)
            out[b, k] = xc @ np.log(np.maximum(s, np.finfo(float).tiny)) / (xc @ xc)
    return out


def trend_test(ns, values: np.ndarray, n_boot: int = 2000, seed: int = 0, level: float = 0.95):
    """One-sided bootstrap test for an upward trend of the median across n.

    ``values`` has one row per n. Returns ``(slope, lower, no_upward_trend)``
    where ``lower`` is the (1 - level) bootstrap quantile of the log-log slope
    of the medians; an upward trend is declared only when it is positive.
    """
    values = np.asarray(values, dtype=float)
    slope, _ = fit_loglog_slope(ns, np.median(values, axis=1))
    boot = _bootstrap_slopes(ns, [values], n_boot, seed)[:, 0]
    lower = float(np.quantile(boot, 1 - level))
    return slope, lower, lower <= 0.0


# ---------------------------------------------------------------------------
# projections of the signal onto the shape class


def project_grid(values, shape: str) -> np.ndarray:
    """Least squares projection of equally weighted grid values onto the shape cone."""
    v = np.asarray(values, dtype=float)
    if shape == "isotonic":
        return pava(v, np.ones_like(v))[0]
    if shape == "convex":
        xs = (np.arange(v.size) + 0.5) / v.size
        return fit_convex(SortedSample(xs, v)).fitted
    raise ValueError("shape must be isotonic or convex")


def compute_f0_star(f0, shape: str, grid_size: int = 1024):
    """Proxy for the L2 projection of f0 onto the shape class.

    f0 is evaluated at the cell midpoints of an equispaced grid and projected
    with uniform weights. If f0 is already in the class (projection leaves the
    grid values unchanged) f0 itself is returned so losses stay exact.
    Otherwise the proxy is a step function on the grid cells (isotonic) or the
    linear interpolant of the projected midpoint values (convex).
    """
    if grid_size < 256:
        raise ValueError("grid_size must be at least 256")
    mids = (np.arange(grid_size) + 0.5) / grid_size
    g = np.asarray(f0(mids), dtype=float)
    proj = project_grid(g, shape)
    if np.max(np.abs(proj - g)) <= 1e-12 * max(1.0, np.max(np.abs(g))):
        return f0
    if shape == "isotonic":
        return StepFunction(np.arange(1, grid_size + 1) / grid_size, proj, isotonic=True)
    slope_lo = (proj[1] - proj[0]) * grid_size
    slope_hi = (proj[-1] - proj[-2]) * grid_size
    knots = np.concatenate([[0.0], mids, [1.0]])
    vals = np.concatenate([[proj[0] - 0.5 * slope_lo / grid_size], proj, [proj[-1] + 0.5 * slope_hi / grid_size]])
    return PiecewiseLinearFunction(knots, vals, convex=True)


# ---------------------------------------------------------------------------
# risk curves


@dataclass(frozen=True, eq=False)
class RiskCurve:
    n_grid: np.ndarray
    losses: np.ndarray  # squared L2 losses, shape (len(n_grid), replications)
    summary_kind: str
    summary: np.ndarray
    iqr_lo: np.ndarray
    iqr_hi: np.ndarray
    slope: float
    slope_stderr: float
    mean_flagged: bool = False  # the mean may not exist under heavy tails
    notes: tuple = ()
    summary_param: float | None = None

    @classmethod
    def from_losses(cls, ns, losses, kind="median", param=None, notes=()):
        losses = np.asarray(losses, dtype=float)
        if np.any(losses < 0):
            raise ValueError("losses must be non-negative")
        summ = summarize(losses, kind, param)
        lo, hi = np.quantile(losses, [0.25, 0.75], axis=1)
        if len(ns) >= 4 and np.all(summ > 0):
            slope, se = fit_loglog_slope(ns, summ)
        else:
            slope, se = math.nan, math.nan
        return cls(np.asarray(ns), losses, kind, summ, lo, hi, slope, se, kind == "mean", tuple(notes), param)

    def to_dict(self) -> dict:
        return {
            "n_grid": self.n_grid.tolist(),
            "summary_kind": self.summary_kind,
            "summary_param": self.summary_param,
            "summary": self.summary.tolist(),
            "iqr_lo": self.iqr_lo.tolist(),
            "iqr_hi": self.iqr_hi.tolist(),
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "mean_flagged": self.mean_flagged,
            "notes": list(self.notes),
        }


def _draw(plan: ExperimentPlan, n: int, rep: int):
    rng = replication_rng(plan.base_seed, rep, n)
    x = rng.uniform(size=n)
    if plan.estimator == "additive":
        z = rng.uniform(size=n)
        y = plan.bivariate(x, z) + sample(plan.law, n, rng)
        return x, z, y, rng
    y = plan.signal(x) + sample(plan.law, n, rng)
    return x, None, y, rng


def _fit_once(plan: ExperimentPlan, n: int, rep: int):
    """Fitted function of x for one replication."""
    x, z, y, rng = _draw(plan, n, rep)
    if plan.estimator == "additive":
        fit = fit_additive(BivariateSample(x, z, y), plan.shape, plan.hclass,
                           restarts=plan.restarts, seed=rng)
        return fit.f_hat.extension
    s = make_sorted_sample(x, y)
    fit = fit_isotonic(s) if plan.estimator == "isotonic" else fit_convex(s)
    return fit.extension


def _loss_task(args):
    plan, target, n, rep = args
    try:
        return l2_loss(_fit_once(plan, n, rep), target)
    except Exception as exc:  # keep the replication context
        raise RuntimeError(f"replication {rep} at n={n} failed: {exc}") from exc


def _sup_task(args):
    plan, n, rep = args
    f = _fit_once(plan, n, rep)
    v = f.values if isinstance(f, StepFunction) else f.knot_values
    return float(np.max(np.abs(v))), float(abs(f(0.0)))


def _map(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        # map preserves task order, so the reduction is independent of completion order
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


def loss_target(plan: ExperimentPlan, grid_size: int = 1024):
    """f0 when it lies in the shape class, else its projection proxy."""
    return compute_f0_star(plan.target_signal(), plan.f_shape, grid_size)


def run_risk_curve(plan: ExperimentPlan, workers: int = 1) -> RiskCurve:
    """Squared L2 loss of the fitted f per (n, replication), summarized across replications."""
    target = loss_target(plan)
    tasks = [(plan, target, n, r) for n in plan.n_grid for r in range(plan.replications)]
    losses = np.array(_map(_loss_task, tasks, workers)).reshape(len(plan.n_grid), plan.replications)
    notes = ("mean summary: the expected loss may be infinite under heavy tails",) if plan.loss_summary == "mean" else ()
    return RiskCurve.from_losses(plan.n_grid, losses, plan.loss_summary, plan.summary_param, notes)


# ---------------------------------------------------------------------------
# oracle inequality audit


@dataclass(frozen=True, eq=False)
class OracleAudit:
    n_grid: np.ndarray
    m_values: np.ndarray
    rhs: np.ndarray  # (len(n_grid), m_max)
    rhs_min: np.ndarray
    argmin_m: np.ndarray
    boundary_flag: np.ndarray  # minimum attained at m_max
    lhs: np.ndarray  # (len(n_grid), replications)
    ratios: np.ndarray
    # convex approximation errors come from a projection repair and bound the infimum from above
    approx_upper_bound: bool = False

    @property
    def lhs_median(self) -> np.ndarray:
        return np.median(self.lhs, axis=1)

    @property
    def ratio_median(self) -> np.ndarray:
        return np.median(self.ratios, axis=1)

    def ratio_quantiles(self, qs=(0.1, 0.5, 0.9)) -> np.ndarray:
        return np.quantile(self.ratios, qs, axis=1).T

    def to_dict(self) -> dict:
        return {
            "n_grid": self.n_grid.tolist(),
            "m_values": self.m_values.tolist(),
            "rhs": self.rhs.tolist(),
            "rhs_min": self.rhs_min.tolist(),
            "argmin_m": self.argmin_m.tolist(),
            "boundary_flag": self.boundary_flag.tolist(),
            "lhs_median": self.lhs_median.tolist(),
            "ratio_median": self.ratio_median.tolist(),
            "ratio_quantiles": self.ratio_quantiles().tolist(),
            "approx_upper_bound": self.approx_upper_bound,
        }


def approximation_errors(target, shape: str, m_max: int, grid_size: int = 256) -> np.ndarray:
    """Squared distance from target to the best m-piece member, m = 1..m_max."""
    family = "constant" if shape == "isotonic" else "linear_convex"
    return np.array([best_m_piece_approximation(target, m, family, grid_size)[1] for m in range(1, m_max + 1)])


def run_oracle_audit(plan: ExperimentPlan, m_max: int = 8, curve: RiskCurve | None = None,
                     workers: int = 1) -> OracleAudit:
    """Compare the loss of the LSE with inf_m approx^2(m) + m log^2 n / n.

    ``curve`` may carry the losses of the same plan to avoid refitting.
    """
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    if math.isinf(lp1_norm(plan.law, 2.0)):
        raise ValueError(
            "the oracle inequality requires errors with a finite L_{2,1} norm; "
            f"{plan.law.kind} with {plan.law.params} has an infinite one"
        )
    target = loss_target(plan)
    approx = approximation_errors(target, plan.f_shape, m_max)
    ns = np.asarray(plan.n_grid, dtype=float)
    ms = np.arange(1, m_max + 1)
    rhs = approx[None, :] + ms[None, :] * (log_e(ns) ** 2 / ns)[:, None]
    argmin = np.argmin(rhs, axis=1)
    rhs_min = rhs[np.arange(ns.size), argmin]
    if curve is None:
        curve = run_risk_curve(plan, workers)
    lhs = curve.losses
    return OracleAudit(np.asarray(plan.n_grid), ms, rhs, rhs_min, argmin + 1, argmin == m_max - 1,
                       lhs, lhs / rhs_min[:, None], plan.f_shape == "convex")


# ---------------------------------------------------------------------------
# stochastic boundedness


@dataclass(frozen=True, eq=False)
class BoundednessProbe:
    n_grid: np.ndarray
    sup_norms: np.ndarray  # (len(n_grid), replications), max |f_hat| over the fitted values
    at_zero: np.ndarray  # |f_hat(0)|
    slope: float  # log-log slope of the median |f_hat(0)|
    slope_lower: float
    sup_slope: float
    sup_slope_lower: float
    bounded: bool  # neither median shows an upward trend

    @property
    def median_sup(self) -> np.ndarray:
        return np.median(self.sup_norms, axis=1)

    @property
    def median_at_zero(self) -> np.ndarray:
        return np.median(self.at_zero, axis=1)


def run_boundedness_probe(plan: ExperimentPlan, workers: int = 1, n_boot: int = 2000) -> BoundednessProbe:
    """Medians of |f_hat(0)| and sup |f_hat| across n, each with a one-sided test for upward drift."""
    tasks = [(plan, n, r) for n in plan.n_grid for r in range(plan.replications)]
    out = np.array(_map(_sup_task, tasks, workers)).reshape(len(plan.n_grid), plan.replications, 2)
    slope, lower, ok0 = trend_test(plan.n_grid, out[..., 1], n_boot=n_boot, seed=plan.base_seed)
    sup_slope, sup_lower, ok_sup = trend_test(plan.n_grid, out[..., 0], n_boot=n_boot, seed=plan.base_seed)
    return BoundednessProbe(np.asarray(plan.n_grid), out[..., 0], out[..., 1], slope, lower,
                            sup_slope, sup_lower, ok0 and ok_sup)


# ---------------------------------------------------------------------------
# lower bound probe over the nested interval class


def _child_table(tree: TreeClass, level: int) -> np.ndarray:
    """Slots of the two children of every level-(level-1) interval, shape (2^(level-1), 2)."""
    return tree.paths[level - 1][:, -1].reshape(-1, 2)


def tree_lse(tree: TreeClass, xs: np.ndarray, ys: np.ndarray):
    """Least squares member of the tree class (indicators plus zero).

    For an indicator of I the residual sum of squares is
    sum y^2 - (2 S_I - N_I), so the LSE maximizes 2 S_I - N_I and returns
    zero when no interval scores above 0. Ties go to the shallower level,
    then to the leftmost interval. Returns ``(level, index)`` or ``None``.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    idx = np.zeros(xs.size, dtype=np.int64)
    left = np.zeros(xs.size)
    alive = np.ones(xs.size, dtype=bool)
    best_score, best = 0.0, None
    for level in range(1, tree.max_level + 1):
        length = tree.length(level)
        slot = np.floor((xs - left) / length).astype(np.int64)
        table = _child_table(tree, level)
        kids = table[idx]
        which = np.where(slot == kids[:, 0], 0, np.where(slot == kids[:, 1], 1, -1))
        alive &= which >= 0
        if not alive.any():
            break
        left = left + np.where(alive, slot, 0) * length
        idx = np.where(alive, 2 * idx + which, 0)
        ids = idx[alive]
        size = 2 ** level
        S = np.bincount(ids, weights=ys[alive], minlength=size)
        N = np.bincount(ids, minlength=size)
        score = 2.0 * S - N
        k = int(np.argmax(score))
        if score[k] > best_score:
            best_score, best = float(score[k]), (level, k)
    return best


def tree_lse_bruteforce(tree: TreeClass, xs: np.ndarray, ys: np.ndarray):
    """Residual sums of squares of every member, enumerated from the deepest level up.

    Independent of the descent in ``tree_lse``; ties broken by the same rule.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    best_rss, best = float((ys ** 2).sum()), None
    for level in range(tree.max_level, 0, -1):
        iv = tree.intervals(level)
        for k in range(iv.shape[0] - 1, -1, -1):
            inside = (xs >= iv[k, 0]) & (xs < iv[k, 1])
            rss = float(((ys - inside) ** 2).sum())
            if rss < best_rss or (rss == best_rss and best is not None and (level, k) < best):
                best_rss, best = rss, (level, k)
    return best


def prefix_lse(xs: np.ndarray, ys: np.ndarray):
    """Least squares member of {1_[0,t] : 0 <= t <= 1}, the class used at gamma = 1.

    With the points sorted by x, taking the first k of them scores
    2 S_k - k; the smallest maximizing k wins and zero is returned when no
    score is positive. Among the equivalent t the canonical choice is the
    k-th smallest x, the shortest interval holding those points.
    Returns t, or ``None`` for the zero function.
    """
    order = np.argsort(xs, kind="stable")
    score = 2.0 * np.cumsum(np.asarray(ys, dtype=float)[order]) - np.arange(1, len(xs) + 1)
    if score.size == 0:
        return None
    k = int(np.argmax(score))
    return float(np.asarray(xs)[order][k]) if score[k] > 0 else None


def default_lower_bound_law(gamma: float, eps: float) -> ErrorLaw:
    """Symmetric (2 - eps)-stable errors below gamma = 1; 50 eta at gamma = 1."""
    if gamma < 1:
        return ErrorLaw.sym_stable(2.0 - eps)
    return ErrorLaw.pareto_eta(50.0)


def run_lower_bound_probe(
    gamma: float,
    eps: float,
    n_grid,
    replications: int,
    law: ErrorLaw | None = None,
    base_seed: int = 0,
    max_level: int | None = None,
    tree: TreeClass | None = None,
    loss_summary: str = "trimmed_mean",
    summary_param: float | None = 0.1,
) -> RiskCurve:
    """Risk curve of the LSE over the lower-bound class with f0 = 0.

    For gamma < 1 the class is the nested interval tree; ``law`` defaults to
    the symmetric (2 - eps)-stable law. The squared loss of an indicator of
    I is |I|. The default depth places the expected number of points at the
    deepest level below one for the largest n; a note is attached when a
    supplied depth falls short of that. For gamma = 1 the class is the
    initial segments 1_[0,t] and the default law is 50 eta.

    The tree loss takes only the values ratio^l, so the median moves in jumps
    of a whole level; the default summary is the 10% trimmed mean, which is
    well defined because the loss is bounded by 1.
    """
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    if not 0 < eps < 0.5:
        raise ValueError("eps must lie in (0, 1/2)")
    n_grid = tuple(int(n) for n in n_grid)
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be increasing")
    if replications < 1:
        raise ValueError("replications must be positive")
    law = default_lower_bound_law(gamma, eps) if law is None else law
    notes = []
    if gamma < 1:
        if tree is None:
            ratio = 2.0 ** (-1.0 / (1.0 - gamma))
            # level l carries mass (2 ratio)^l, so about n (2 ratio)^l points
            need = math.ceil(math.log(n_grid[-1]) / -math.log(2 * ratio)) + 1
            tree = build_tree_class(gamma, need if max_level is None else max_level)
        if n_grid[-1] * (2 * tree.ratio) ** tree.max_level > 1:
            notes.append(f"depth {tree.max_level} is insufficient for n={n_grid[-1]}: deepest intervals hold points")
    losses = np.empty((len(n_grid), replications))
    for i, n in enumerate(n_grid):
        for r in range(replications):
            rng = replication_rng(base_seed, r, n)
            x = rng.uniform(size=n)
            y = sample(law, n, rng)
            if gamma < 1:
                best = tree_lse(tree, x, y)
                losses[i, r] = 0.0 if best is None else tree.length(best[0])
            else:
                t = prefix_lse(x, y)
                losses[i, r] = 0.0 if t is None else t
    return RiskCurve.from_losses(n_grid, losses, loss_summary, summary_param, notes)


def paired_slope_gap(heavy: RiskCurve, light: RiskCurve, n_boot: int = 2000, seed: int = 0,
                     level: float = 0.95):
    """Slope of the heavy arm minus slope of the light arm, with a one-sided lower bound.

    Replications are resampled jointly across the two arms, which share their
    designs. Returns ``(gap, lower)``; lower is the (1 - level) bootstrap quantile.
    """
    if not np.array_equal(heavy.n_grid, light.n_grid) or heavy.losses.shape != light.losses.shape:
        raise ValueError("arms must share n_grid and replication count")
    gap = heavy.slope - light.slope
    if heavy.summary_kind != light.summary_kind or heavy.summary_param != light.summary_param:
        raise ValueError("arms must use the same loss summary")
    boot = _bootstrap_slopes(heavy.n_grid, [heavy.losses, light.losses], n_boot, seed,
                             heavy.summary_kind, heavy.summary_param)
    return gap, float(np.quantile(boot[:, 0] - boot[:, 1], 1 - level))
