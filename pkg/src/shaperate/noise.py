"""Error laws: seeded samplers, survival functions and L_{p,1} norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

__all__ = ["ErrorLaw", "sample", "survival", "lp1_norm", "tail_exponent", "rng_for"]

LAW_KINDS = ("gaussian", "student_t", "sym_stable", "pareto_eta", "uniform", "zero")


@dataclass(frozen=True)
class ErrorLaw:
    """Symmetric error distribution.

    ``params`` by kind: gaussian ``{"sigma"}``, student_t ``{"nu", "scale"}``,
    sym_stable ``{"alpha", "scale"}`` with characteristic function
    ``exp(-|scale t|^alpha)``, pareto_eta ``{"scale"}`` with
    ``P(|eta| > t) = 1 / (1 + (t/scale)^2)``, uniform ``{"half_width"}`` on
    [-half_width, half_width] (a bounded control), zero (no noise).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise ValueError(f"unknown error law {self.kind!r}; expected one of {LAW_KINDS}")
        p = dict(self.params)
        defaults = {
            "gaussian": {"sigma": 1.0},
            "student_t": {"nu": 2.5, "scale": 1.0},
            "sym_stable": {"alpha": 1.5, "scale": 1.0},
            "pareto_eta": {"scale": 1.0},
            "uniform": {"half_width": 1.0},
            "zero": {},
        }[self.kind]
        unknown = set(p) - set(defaults)
        if unknown:
            raise ValueError(f"unknown parameter(s) {sorted(unknown)} for {self.kind}")
        p = {**defaults, **{k: float(v) for k, v in p.items()}}
        for k in ("sigma", "scale", "half_width"):
            if k in p and not p[k] > 0:
                raise ValueError(f"{k} must be positive")
        if self.kind == "student_t" and not p["nu"] > 0:
            raise ValueError("nu must be positive")
        if self.kind == "sym_stable" and not 0 < p["alpha"] <= 2:
            raise ValueError("alpha must lie in (0, 2]")
        object.__setattr__(self, "params", p)

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "ErrorLaw":
        return cls("gaussian", {"sigma": sigma})

    @classmethod
    def student_t(cls, nu: float, scale: float = 1.0) -> "ErrorLaw":
        return cls("student_t", {"nu": nu, "scale": scale})

    @classmethod
    def sym_stable(cls, alpha: float, scale: float = 1.0) -> "ErrorLaw":
        return cls("sym_stable", {"alpha": alpha, "scale": scale})

    @classmethod
    def pareto_eta(cls, scale: float = 1.0) -> "ErrorLaw":
        return cls("pareto_eta", {"scale": scale})

    @classmethod
    def uniform(cls, half_width: float = 1.0) -> "ErrorLaw":
        return cls("uniform", {"half_width": half_width})

    @classmethod
    def zero(cls) -> "ErrorLaw":
        return cls("zero")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


def rng_for(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _stable_cms(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Chambers-Mallows-Stuck transform for the symmetric stable law, unit scale."""
    v = rng.uniform(-np.pi / 2, np.pi / 2, size)
    w = rng.standard_exponential(size)
    if alpha == 1.0:
        return np.tan(v)
    return (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * v) / w) ** ((1.0 - alpha) / alpha))


def sample(law: ErrorLaw, n: int, seed) -> np.ndarray:
    """n i.i.d. draws; ``seed`` is an integer seed or an existing Generator."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = rng_for(seed)
    p = law.params
    if law.kind == "zero":
        return np.zeros(n)
    if law.kind == "gaussian":
        return p["sigma"] * rng.standard_normal(n)
    if law.kind == "student_t":
        return p["scale"] * rng.standard_t(p["nu"], n)
    if law.kind == "sym_stable":
        return p["scale"] * _stable_cms(p["alpha"], n, rng)
    if law.kind == "uniform":
        return rng.uniform(-p["half_width"], p["half_width"], n)
    u = rng.uniform(size=n)
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    mag = p["scale"] * np.sqrt(1.0 / u - 1.0)
    sign = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
    return sign * mag


def tail_exponent(law: ErrorLaw) -> float:
    """kappa with P(|xi| > t) ~ C t^{-kappa}; infinity for light tails."""
    if law.kind in ("gaussian", "uniform", "zero"):
        return math.inf
    if law.kind == "student_t":
        return law.params["nu"]
    if law.kind == "sym_stable":
        a = law.params["alpha"]
        return math.inf if a == 2.0 else a
    return 2.0


def _stable_survival(t: float, alpha: float) -> float:
    """P(|X| > t) for the unit symmetric stable law by Gil-Pelaez inversion."""
    if t <= 0:
        return 1.0
    if alpha == 2.0:
        return float(2 * stats.norm.sf(t / math.sqrt(2.0)))
    # the characteristic function is below 1e-300 beyond this point
    upper = 700.0 ** (1.0 / alpha)

    def integrand(u):
        return math.exp(-(u ** alpha)) * (math.sin(u * t) / u if u > 0 else t)

    n_osc = max(1, int(upper * t / math.pi))
    val, _ = integrate.quad(integrand, 0.0, upper, limit=max(200, 4 * n_osc), epsabs=1e-13, epsrel=1e-12)
    return 1.0 - 2.0 / math.pi * val


def _stable_tail_series(t, alpha: float, terms: int = 4):
    """Asymptotic expansion of P(|X| > t) for the unit symmetric stable law."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for k in range(1, terms + 1):
        c = (-1) ** (k + 1) * special.gamma(alpha * k) / math.factorial(k) * math.sin(k * math.pi * alpha / 2)
        out = out + 2.0 / math.pi * c * t ** (-alpha * k)
    return out


def survival(law: ErrorLaw, t):
    """P(|xi| > t), elementwise over t."""
    t = np.asarray(t, dtype=float)
    p = law.params
    if law.kind == "zero":
        return np.where(t < 0, 1.0, 0.0)
    if law.kind == "gaussian":
        return np.where(t < 0, 1.0, 2 * stats.norm.sf(t / p["sigma"]))
    if law.kind == "student_t":
        return np.where(t < 0, 1.0, 2 * stats.t.sf(t / p["scale"], p["nu"]))
    if law.kind == "pareto_eta":
        return np.where(t < 0, 1.0, 1.0 / (1.0 + (t / p["scale"]) ** 2))
    if law.kind == "uniform":
        return np.where(t < 0, 1.0, np.clip(1.0 - t / p["half_width"], 0.0, 1.0))
    alpha, scale = p["alpha"], p["scale"]
    out = np.vectorize(lambda v: _stable_survival(v / scale, alpha))(t)
    return out[()] if out.ndim == 0 else out


def lp1_norm(law: ErrorLaw, p: float = 2.0) -> float:
    """Integral of P(|xi| > t)^{1/p} over t >= 0, or +inf when it diverges.

    Finite exactly when the tail exponent exceeds p. The body is integrated
    numerically and the tail beyond a cut-off uses the power-law asymptote
    in closed form.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    if law.kind == "zero":
        return 0.0
    if law.kind == "uniform":
        return law.params["half_width"] * p / (p + 1.0)
    kappa = tail_exponent(law)
    if kappa <= p:
        return math.inf

    def f(t):
        return float(survival(law, t)) ** (1.0 / p)

    if math.isinf(kappa):
        sigma = law.params.get("sigma", law.params.get("scale", 1.0))
        if law.kind == "sym_stable":
            sigma *= math.sqrt(2.0)
        val, _ = integrate.quad(f, 0.0, 60.0 * sigma, limit=200, epsabs=1e-12, epsrel=1e-11)
        return val
    scale = law.params["scale"]
    cut = {"student_t": 1e4, "pareto_eta": 1e6, "sym_stable": 60.0}[law.kind] * scale
    body, _ = integrate.quad(f, 0.0, cut, limit=500, epsabs=1e-12, epsrel=1e-11,
                             points=[v for v in (scale, 10 * scale, 100 * scale) if v < cut])
    if law.kind == "sym_stable":
        alpha = law.params["alpha"]
        tail, _ = integrate.quad(
            lambda t: float(_stable_tail_series(t / scale, alpha)) ** (1.0 / p), cut, np.inf,
            epsabs=1e-13, epsrel=1e-11)
        return body + tail
    const = float(survival(law, cut)) * cut ** kappa
    r = kappa / p
    return body + const ** (1.0 / p) * cut ** (1.0 - r) / (r - 1.0)
