import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from shaperate.noise import ErrorLaw, lp1_norm, sample, survival, tail_exponent

LAWS = [
    ErrorLaw.gaussian(1.0),
    ErrorLaw.student_t(2.5),
    ErrorLaw.sym_stable(1.5),
    ErrorLaw.pareto_eta(1.0),
]


def test_same_seed_same_draws():
    law = ErrorLaw.gaussian(1.0)
    assert np.array_equal(sample(law, 100, 7), sample(law, 100, 7))
    assert not np.array_equal(sample(law, 100, 7), sample(law, 100, 8))


@pytest.mark.parametrize("kind, params", [("student_t", {"nu": 0}), ("sym_stable", {"alpha": 2.5}),
                                          ("sym_stable", {"alpha": 0}), ("gaussian", {"sigma": -1}),
                                          ("gaussian", {"nu": 3}), ("cauchy", {})])
def test_invalid_parameters(kind, params):
    with pytest.raises(ValueError):
        ErrorLaw(kind, params)


def test_pareto_survival_is_exact():
    t = np.array([0.0, 0.5, 1.0, 3.0])
    assert survival(ErrorLaw.pareto_eta(2.0), t) == pytest.approx(1 / (1 + (t / 2) ** 2), rel=1e-15)


def test_stable_survival_matches_scipy_levy_stable():
    # scipy's S1 parametrization with beta = 0 and unit scale has characteristic function exp(-|t|^alpha)
    for t in (0.5, 1.0, 2.0, 5.0):
        ref = 2 * stats.levy_stable.sf(t, 1.5, 0.0)
        assert float(survival(ErrorLaw.sym_stable(1.5), t)) == pytest.approx(ref, abs=2e-5)


def test_stable_alpha_two_is_gaussian_with_variance_two():
    t = np.array([0.3, 1.0, 2.5])
    assert survival(ErrorLaw.sym_stable(2.0), t) == pytest.approx(2 * stats.norm.sf(t / math.sqrt(2)), rel=1e-12)


def test_pareto_fraction_above_one():
    x = sample(ErrorLaw.pareto_eta(1.0), 10**6, 1)
    assert np.mean(np.abs(x) > 1) == pytest.approx(0.5, abs=0.002)


def test_stable_characteristic_function_at_one():
    x = sample(ErrorLaw.sym_stable(1.5), 10**6, 2)
    assert np.mean(np.cos(x)) == pytest.approx(math.exp(-1), abs=0.01)


def test_pareto_mean_absolute_value():
    x = sample(ErrorLaw.pareto_eta(1.0), 10**6, 3)
    assert np.mean(np.abs(x)) == pytest.approx(math.pi / 2, abs=0.02)


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.kind)
def test_empirical_survival_within_three_standard_errors(law):
    x = np.abs(sample(law, 10**6, 4))
    for t in (0.5, 1.0, 2.0, 5.0):
        p = float(survival(law, t))
        se = math.sqrt(p * (1 - p) / x.size)
        assert abs(np.mean(x > t) - p) <= 3 * se + 1e-12


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.kind)
def test_symmetric(law):
    x = sample(law, 200_000, 5)
    assert abs(np.mean(x > 0) - 0.5) < 0.005


def test_lp1_infinite_for_pareto_at_two():
    assert lp1_norm(ErrorLaw.pareto_eta(1.0), 2) == math.inf


def test_lp1_finite_for_student_t():
    assert math.isfinite(lp1_norm(ErrorLaw.student_t(2.5), 2))
    assert math.isfinite(lp1_norm(ErrorLaw.student_t(3.0), 2))


def test_lp1_gaussian_matches_direct_quadrature():
    ref, _ = integrate.quad(lambda t: math.sqrt(2 * stats.norm.sf(t)), 0, np.inf, epsabs=1e-13)
    assert lp1_norm(ErrorLaw.gaussian(1.0), 2) == pytest.approx(ref, rel=1e-9)
    assert lp1_norm(ErrorLaw.gaussian(1.0), 2) == pytest.approx(1.3037853169509, rel=1e-10)


def test_lp1_at_one_is_mean_absolute_value():
    assert lp1_norm(ErrorLaw.gaussian(1.0), 1) == pytest.approx(math.sqrt(2 / math.pi), rel=1e-10)
    nu = 2.5
    mean_abs_t = 2 * math.sqrt(nu) * special.gamma((nu + 1) / 2) / (math.sqrt(math.pi) * (nu - 1) * special.gamma(nu / 2))
    assert lp1_norm(ErrorLaw.student_t(nu), 1) == pytest.approx(mean_abs_t, rel=1e-9)
    a = 1.5
    assert lp1_norm(ErrorLaw.sym_stable(a), 1) == pytest.approx(2 * special.gamma(1 - 1 / a) / math.pi, rel=1e-9)


def test_lp1_student_t_tail_quadrature_cross_check():
    law = ErrorLaw.student_t(2.5)
    f = lambda t: math.sqrt(2 * stats.t.sf(t, 2.5))
    body, _ = integrate.quad(f, 0, 100, limit=400, epsabs=1e-12)
    tail, _ = integrate.quad(lambda u: f(1 / u) / u**2, 0, 1 / 100, limit=400, epsabs=1e-13)
    assert lp1_norm(law, 2) == pytest.approx(body + tail, rel=1e-6)


@pytest.mark.parametrize("kind, p", [("student_t", 2.0), ("gaussian", 2.0), ("pareto_eta", 1.5), ("sym_stable", 1.2)])
def test_lp1_non_decreasing_in_scale(kind, p):
    key = "sigma" if kind == "gaussian" else "scale"
    vals = [lp1_norm(ErrorLaw(kind, {key: s}), p) for s in (0.5, 1.0, 2.0)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    # scaling the law scales the norm exactly
    assert vals[2] == pytest.approx(4 * vals[0], rel=1e-6)


@pytest.mark.parametrize("law", LAWS + [ErrorLaw.student_t(3.5)], ids=lambda l: l.kind)
@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_lp1_finite_iff_tail_exponent_exceeds_p(law, p):
    assert math.isfinite(lp1_norm(law, p)) == (tail_exponent(law) > p)


def test_uniform_law():
    law = ErrorLaw.uniform(2.0)
    x = sample(law, 10**5, 9)
    assert np.all(np.abs(x) <= 2.0)
    assert np.allclose(survival(law, [-1.0, 0.0, 1.0, 2.0, 3.0]), [1.0, 1.0, 0.5, 0.0, 0.0])
    ref, _ = integrate.quad(lambda t: (1 - t / 2.0) ** 0.5, 0, 2.0)
    assert lp1_norm(law, 2.0) == pytest.approx(ref, rel=1e-12)
    assert math.isinf(tail_exponent(law))
