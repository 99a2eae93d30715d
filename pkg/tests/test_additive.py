import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shaperate.additive import (
    BivariateSample,
    HClass,
    _h_step,
    fit_additive,
    partial_residual_audit,
)
from shaperate.core import make_sorted_sample
from shaperate.convex import fit_convex
from shaperate.isotonic import fit_isotonic


def grid_sample(n, seed, noise=0.0, f=lambda x: x, h=lambda z: 0 * z):
    rng = np.random.default_rng(seed)
    xs = np.arange(1, n + 1) / n
    zs = rng.uniform(size=n)
    ys = f(xs) + h(zs) + noise * rng.standard_normal(n)
    return BivariateSample(xs, zs, ys)


@pytest.mark.parametrize("shape", ["isotonic", "convex"])
def test_noiseless_single_component_recovered(shape):
    s = grid_sample(40, 0)
    fit = fit_additive(s, shape, HClass("affine_bounded"))
    assert abs(fit.h_hat.coef[0]) < 1e-8
    assert np.allclose(fit.f_at(s.xs), s.xs, atol=1e-8)
    assert fit.objective < 1e-15


def test_noiseless_additive_convex_exact_slope():
    s = grid_sample(50, 1, h=lambda z: 0.5 * (z - 0.5))
    fit = fit_additive(s, "convex", HClass("affine_bounded"))
    assert fit.h_hat.coef[0] == pytest.approx(0.5, abs=1e-6)
    assert fit.objective < 1e-12


def test_noiseless_additive_isotonic_slope_in_feasible_set():
    # with an isotonic f the slope is not identified: any beta leaving
    # y - beta (z - 1/2) non-decreasing in x gives zero residual
    s = grid_sample(50, 2, h=lambda z: 0.5 * (z - 0.5))
    fit = fit_additive(s, "isotonic", HClass("affine_bounded"))
    beta = fit.h_hat.coef[0]
    dy, du = np.diff(s.ys), np.diff(s.zs - 0.5)
    assert np.all(dy - beta * du >= -1e-9)
    assert fit.objective < 1e-12


@pytest.mark.parametrize("shape, plain", [("isotonic", fit_isotonic), ("convex", fit_convex)])
def test_trivial_h_class_reduces_to_plain_fit(shape, plain):
    s = grid_sample(60, 3, noise=0.3)
    for hc in (HClass("affine_bounded", {"B": 0}), HClass("binned_sieve", {"B": 0})):
        fit = fit_additive(s, shape, hc)
        ref = plain(make_sorted_sample(s.xs, s.ys))
        assert np.allclose(fit.f_at(s.xs), ref.fitted, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(5, 60),
       kind=st.sampled_from(["affine_bounded", "binned_sieve", "centered_interval_indicators"]),
       shape=st.sampled_from(["isotonic", "convex"]))
def test_objective_trace_non_increasing(seed, n, kind, shape):
    s = grid_sample(n, seed, noise=0.5, h=lambda z: (z > 0.4).astype(float))
    fit = fit_additive(s, shape, HClass(kind), restarts=2, seed=seed)
    tr = fit.objective_trace
    assert np.all(np.diff(tr) <= 1e-12 * (1 + tr[:-1]))
    assert fit.objective == pytest.approx(np.mean((s.ys - fit.f_at(s.xs) - fit.h_hat(s.zs)) ** 2), rel=1e-9, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(5, 80),
       kind=st.sampled_from(["affine_bounded", "binned_sieve", "centered_interval_indicators"]))
def test_converged_isotonic_matches_minmax(seed, n, kind):
    s = grid_sample(n, seed, noise=0.4, f=lambda x: np.sqrt(x), h=lambda z: np.sin(6 * z))
    fit = fit_additive(s, "isotonic", HClass(kind))
    if fit.converged:
        assert partial_residual_audit(s, fit) <= 1e-8


@pytest.mark.parametrize("kind", ["affine_bounded", "binned_sieve", "centered_interval_indicators"])
def test_converged_convex_passes_characterization(kind):
    s = grid_sample(120, 5, noise=0.2, f=lambda x: (x - 0.3) ** 2, h=lambda z: np.cos(4 * z))
    fit = fit_additive(s, "convex", HClass(kind))
    assert fit.converged
    assert partial_residual_audit(s, fit).passed


def test_single_iteration_leaves_a_fixed_point_gap():
    s = grid_sample(200, 6, noise=0.1, h=lambda z: 0.8 * (z - 0.5))
    fit = fit_additive(s, "isotonic", HClass("affine_bounded"), max_iters=1)
    assert not fit.converged
    assert partial_residual_audit(s, fit) > 1e-6


def test_tied_x_values_are_pooled():
    rng = np.random.default_rng(7)
    xs = np.repeat(np.linspace(0.1, 1, 10), 4)
    zs = rng.uniform(size=40)
    ys = xs + 0.3 * rng.standard_normal(40)
    s = BivariateSample(xs, zs, ys)
    fit = fit_additive(s, "isotonic", HClass("binned_sieve", {"bins": 4}))
    assert fit.f_sample.n == 10 and np.all(fit.f_sample.weights == 4)
    assert partial_residual_audit(s, fit) <= 1e-8


def test_h_is_empirically_centered():
    s = grid_sample(80, 8, noise=0.3, h=lambda z: 2 * (z > 0.7))
    for kind in ("affine_bounded", "binned_sieve", "centered_interval_indicators"):
        fit = fit_additive(s, "convex", HClass(kind))
        assert abs(np.mean(fit.h_hat(s.zs))) < 1e-12


def brute_interval(zs, r, grid):
    g = np.arange(grid + 1) / grid
    best = np.sum((r - r.mean()) ** 2)  # zero function
    for i in range(grid + 1):
        for j in range(i + 1, grid + 1):
            v = ((zs >= g[i]) & (zs <= g[j])).astype(float)
            res = r - v
            best = min(best, np.sum((res - res.mean()) ** 2))
    return best


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 30), grid=st.integers(1, 9))
def test_interval_search_matches_enumeration(seed, n, grid):
    rng = np.random.default_rng(seed)
    zs = np.round(rng.uniform(size=n), 2)  # ties with grid points are common
    r = rng.normal(size=n) + (zs > 0.5)
    h, c = _h_step(HClass("centered_interval_indicators", {"grid": grid}), zs, r)
    got = np.sum((r - h(zs) - c) ** 2)
    assert got == pytest.approx(brute_interval(zs, r, grid), rel=1e-10, abs=1e-10)


def test_sieve_step_uses_free_constant():
    # bin means 4 and -0.5 differ by 4.5 > 2B: both bin values clip and the
    # constant splits the remaining excess of 0.5 evenly
    zs = np.array([0.05, 0.1, 0.6, 0.9])
    r = np.array([3.0, 5.0, -1.0, 0.0])
    h, c = _h_step(HClass("binned_sieve", {"bins": 2, "B": 2.0}), zs, r)
    assert np.all(np.abs(h.coef) <= 2.0)
    assert np.allclose(h(zs) + c, [3.75, 3.75, -0.25, -0.25])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 40), bins=st.integers(1, 6),
       B=st.floats(0.0, 2.0))
def test_sieve_step_matches_box_constrained_solver(seed, n, bins, B):
    from scipy.optimize import minimize

    rng = np.random.default_rng(seed)
    zs = rng.uniform(size=n)
    r = 3 * rng.normal(size=n) + 2
    h, c = _h_step(HClass("binned_sieve", {"bins": bins, "B": B}), zs, r)
    got = np.sum((r - h(zs) - c) ** 2)
    k = np.minimum((zs * bins).astype(int), bins - 1)

    def obj(v):
        return np.sum((r - v[k] - v[-1]) ** 2)

    bounds = [(-B, B)] * bins + [(None, None)]
    ref = minimize(obj, np.zeros(bins + 1), bounds=bounds, method="L-BFGS-B",
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10_000}).fun
    assert got <= ref + 1e-7 * (1 + ref)
    assert np.all(np.abs(h.coef) <= B)


def test_sieve_recovers_step_signal():
    s = grid_sample(400, 9, noise=0.05, f=lambda x: x ** 2, h=lambda z: (z >= 0.5) - 0.5)
    fit = fit_additive(s, "convex", HClass("binned_sieve", {"bins": 4}))
    vals = fit.h_hat.base(np.array([0.1, 0.3, 0.6, 0.9]))
    assert vals[2] - vals[1] == pytest.approx(1.0, abs=0.05)
    assert abs(vals[1] - vals[0]) < 0.05 and abs(vals[3] - vals[2]) < 0.05


def test_validation_errors():
    with pytest.raises(ValueError):
        BivariateSample(np.array([0.1, 1.2]), np.array([0.1, 0.2]), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        BivariateSample(np.array([0.1]), np.array([0.1, 0.2]), np.array([0.0]))
    with pytest.raises(ValueError):
        BivariateSample(np.array([0.1]), np.array([0.1]), np.array([np.nan]))
    with pytest.raises(ValueError):
        HClass("splines")
    with pytest.raises(ValueError):
        HClass("affine_bounded", {"B": -1})
    with pytest.raises(ValueError):
        HClass("binned_sieve", {"bins": 2.5})
    with pytest.raises(ValueError):
        HClass("affine_bounded", {"bins": 3})
    s = grid_sample(10, 0)
    with pytest.raises(ValueError):
        fit_additive(s, "concave", HClass("affine_bounded"))
    with pytest.raises(ValueError):
        fit_additive(s, "isotonic", HClass("affine_bounded"), max_iters=0)


def test_entropy_condition_record():
    assert HClass("affine_bounded").entropy_condition_nominal
    assert HClass("binned_sieve").entropy_condition_nominal
    assert not HClass("centered_interval_indicators").entropy_condition_nominal


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(5, 40), shape=st.sampled_from(["isotonic", "convex"]))
def test_affine_fit_beats_beta_grid_scan(seed, n, shape):
    # joint minimum over beta by scanning a grid and refitting f for each beta
    s = grid_sample(n, seed, noise=0.3, f=lambda x: x**2, h=lambda z: 0.7 * (z - 0.5))
    plain = fit_isotonic if shape == "isotonic" else fit_convex
    best = np.inf
    for beta in np.linspace(-1, 1, 401):
        r = s.ys - beta * (s.zs - 0.5)
        fitted = plain(make_sorted_sample(s.xs, r)).fitted
        best = min(best, float(np.mean((r - fitted) ** 2)))
    fit = fit_additive(s, shape, HClass("affine_bounded"))
    assert fit.objective <= best + 1e-9
    assert fit.objective >= best - 0.01  # the scan resolution is 0.005 in beta
