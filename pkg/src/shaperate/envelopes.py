"""Localized envelopes: closed-form norms, growth exponents, and the nested interval tree class."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "ENVELOPE_MODELS",
    "EnvelopeProfile",
    "TreeClass",
    "envelope_function",
    "envelope_norm",
    "envelope_profile",
    "fit_gamma",
    "predicted_rate_exponent",
    "build_tree_class",
    "tree_envelope_check",
    "tree_envelope_norm",
]

ENVELOPE_MODELS = ("isotonic_bounded", "convex_bounded", "linear_1d", "single_changepoint", "multi_changepoint")

# sup |f(x)| / (x^{-1/2} v (1-x)^{-1/2}) over convex f with unit L2 norm on [0, 1]
CONVEX_ENVELOPE_CONSTANT = 2.0 * math.sqrt(3.0)


def _check_model(model: str):
    if model not in ENVELOPE_MODELS:
        raise ValueError(f"unknown envelope model {model!r}; expected one of {ENVELOPE_MODELS}")


def _truncated_sq_norm(delta: float, B: float) -> float:
    """Squared L2 norm of x -> min(delta (x^{-1/2} v (1-x)^{-1/2}), B)."""
    if delta * delta <= B * B / 2:
        return 2 * delta * delta * (1 + math.log(B * B / (2 * delta * delta)))
    return B * B


def envelope_function(model: str, delta: float, B: float = 1.0):
    """The envelope F(delta) as a vectorized callable on [0, 1]."""
    _check_model(model)
    if delta <= 0:
        raise ValueError("delta must be positive")

    def shape(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.maximum(1.0 / np.sqrt(x), 1.0 / np.sqrt(1.0 - x))

    if model == "isotonic_bounded":
        return lambda x: np.minimum(delta * shape(x), B)
    if model == "convex_bounded":
        return lambda x: CONVEX_ENVELOPE_CONSTANT * np.minimum(delta * shape(x), B)
    if model == "linear_1d":
        # slopes |beta| <= min(sqrt(3) delta, 1)
        return lambda x: min(math.sqrt(3.0) * delta, 1.0) * np.abs(np.asarray(x, dtype=float))
    if model == "single_changepoint":
        cut = 1.0 - min(delta * delta, 1.0)
        return lambda x: (np.asarray(x, dtype=float) >= cut).astype(float)
    return lambda x: np.ones_like(np.asarray(x, dtype=float))


def envelope_norm(model: str, delta: float, B: float = 1.0) -> float:
    """Exact L2(P) norm of the localized envelope F(delta) of a built-in model.

    ``convex_bounded`` scales the truncated isotonic envelope by the constant
    2 sqrt(3), which bounds |f| for convex f of unit L2 norm.
    """
    _check_model(model)
    if delta <= 0:
        raise ValueError("delta must be positive")
    if model in ("isotonic_bounded", "convex_bounded") and B <= 0:
        raise ValueError("B must be positive")
    if model == "isotonic_bounded":
        return math.sqrt(_truncated_sq_norm(delta, B))
    if model == "convex_bounded":
        return CONVEX_ENVELOPE_CONSTANT * math.sqrt(_truncated_sq_norm(delta, B))
    if model == "linear_1d":
        return min(delta, 1.0 / math.sqrt(3.0))
    if model == "single_changepoint":
        return min(delta, 1.0)
    return 1.0


def fit_gamma(deltas, norms) -> tuple[float, float]:
    """Least squares fit of log norm = c + gamma log delta + tau log log(1/delta).

    Returns ``(gamma_hat, tau)`` with gamma_hat clipped to [0, 1].
    """
    d = np.asarray(deltas, dtype=float)
    v = np.asarray(norms, dtype=float)
    if d.size != v.size:
        raise ValueError("deltas and norms differ in length")
    if d.size < 4:
        raise ValueError("need at least four (delta, norm) points")
    if np.any(d <= 0) or np.any(d >= 1) or np.any(v <= 0):
        raise ValueError("deltas must lie in (0, 1) and norms must be positive")
    if np.log10(d.max() / d.min()) < 2 - 1e-12:
        raise ValueError("delta grid must span at least two decades")
    X = np.column_stack([np.ones_like(d), np.log(d), np.log(np.log(1.0 / d))])
    if np.linalg.matrix_rank(X) < 3:
        raise ValueError("degenerate delta grid")
    coef, *_ = np.linalg.lstsq(X, np.log(v), rcond=None)
    return float(np.clip(coef[1], 0.0, 1.0)), float(coef[2])


def predicted_rate_exponent(gamma: float) -> float:
    """r such that the L2 loss of the LSE is O(n^{-r}) under envelope growth delta^gamma."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    return 1.0 / (2.0 * (2.0 - gamma))


@dataclass(frozen=True)
class EnvelopeProfile:
    model: str
    deltas: np.ndarray
    norms: np.ndarray
    gamma_hat: float
    log_correction: float

    @property
    def predicted_rate(self) -> float:
        return predicted_rate_exponent(self.gamma_hat)


def envelope_profile(model: str, deltas, B: float = 1.0) -> EnvelopeProfile:
    deltas = np.sort(np.asarray(deltas, dtype=float))
    norms = np.array([envelope_norm(model, d, B) for d in deltas])
    g, tau = fit_gamma(deltas, norms)
    return EnvelopeProfile(model, deltas, norms, g, tau)


# ---------------------------------------------------------------------------
# nested interval class


@dataclass(frozen=True, eq=False)
class TreeClass:
    """Indicators of nested intervals plus the zero function.

    Level l holds 2^l intervals of length ``ratio ** l`` where
    ``ratio = 2^{-1/(1-gamma)}``; each level-l interval contains exactly two
    level-(l+1) intervals, chosen among the ``fanout`` equal-length slots
    that fit inside it. Interval positions are stored as integer slot paths,
    so containment is exact.
    """

    gamma: Fraction
    fanout: int
    ratio: float
    paths: list  # paths[l-1] is an int array of shape (2^l, l) of slot indices

    @property
    def max_level(self) -> int:
        return len(self.paths)

    def length(self, level: int) -> float:
        return self.ratio ** level

    def left_endpoints(self, level: int) -> np.ndarray:
        p = self.paths[level - 1]
        powers = self.ratio ** np.arange(1, level + 1)
        return p @ powers

    def intervals(self, level: int) -> np.ndarray:
        a = self.left_endpoints(level)
        return np.column_stack([a, a + self.length(level)])


def _as_fraction(gamma) -> Fraction:
    return gamma if isinstance(gamma, Fraction) else Fraction(str(gamma))


def build_tree_class(gamma, max_level: int, child_selector="leftmost") -> TreeClass:
    """Construct levels 1..max_level of the nested interval class.

    ``child_selector`` is ``"leftmost"`` (the two leftmost slots of each
    parent) or an integer seed for a random choice of two slots per parent.
    """
    g = _as_fraction(gamma)
    if not 0 < g < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if max_level < 1:
        raise ValueError("max_level must be at least 1")
    exponent = 1.0 / (1.0 - float(g))
    fanout = math.floor(2.0 ** exponent)
    if fanout < 2:
        raise ValueError("each parent must hold at least two child slots")
    ratio = 2.0 ** (-exponent)
    if ratio ** max_level < np.finfo(float).eps:
        raise ValueError(f"level {max_level} intervals are shorter than machine precision")
    rng = None if child_selector == "leftmost" else np.random.default_rng(child_selector)
    paths = []
    prev = np.zeros((1, 0), dtype=np.int64)
    for _ in range(max_level):
        kids = []
        for row in prev:
            slots = (0, 1) if rng is None else tuple(sorted(rng.choice(fanout, 2, replace=False)))
            for sl in slots:
                kids.append(np.append(row, sl))
        prev = np.array(kids, dtype=np.int64)
        paths.append(prev)
    return TreeClass(g, fanout, ratio, paths)


def critical_level(t: TreeClass, delta: float) -> int:
    """Smallest level whose interval length is at most delta^2.

    Uses log2 comparisons with the exact rational exponent 1/(1-gamma):
    length at level l is 2^{-l/(1-gamma)}.
    """
    e = 1 / (1 - t.gamma)
    target = -2.0 * math.log2(delta)  # need l * e >= target
    level = max(1, math.ceil(target / float(e) - 1e-12))
    while float(level * e) < target - 1e-12:
        level += 1
    return level


def tree_envelope_norm(t: TreeClass, delta: float) -> tuple[float, bool]:
    """L2 norm of the envelope of members with P f^2 <= delta^2, and whether it was truncated.

    Nesting means the union of all qualifying intervals is the union at the
    critical level: 2^l disjoint intervals of length 2^{-l/(1-gamma)}, so
    the squared norm is 2^{-l gamma/(1-gamma)} exactly in log2. When the
    critical level lies below the deepest constructed level the norm of the
    deepest level is reported instead and the result is flagged.
    """
    level = critical_level(t, delta)
    truncated = level > t.max_level
    level = min(level, t.max_level)
    log2_sq = -level * float(t.gamma / (1 - t.gamma))
    return 2.0 ** (0.5 * log2_sq), truncated


def tree_envelope_check(t: TreeClass, deltas) -> float:
    """Maximum over the grid of ||F(delta)||_{L2} / delta^gamma.

    Raises if some delta reaches below the deepest constructed level, where
    the reported norm is a truncation and the ratio is meaningless.
    """
    worst = 0.0
    for d in deltas:
        norm, truncated = tree_envelope_norm(t, float(d))
        if truncated:
            raise ValueError(f"delta={d} lies below level {t.max_level}; build more levels")
        worst = max(worst, 2.0 ** (math.log2(norm) - float(t.gamma) * math.log2(d)))
    return worst
