"""Acceptance criteria, each run at its stated size and tolerance.

Every test records one PASS/FAIL line, shown in the terminal summary.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from oracles import envelope_kinks, quadrature_sq_norm
from shaperate.additive import HClass
from shaperate.convex import brute_force_convex, characterization_audit, fit_convex
from shaperate.core import SignalSpec, make_sorted_sample
from shaperate.envelopes import (
    ENVELOPE_MODELS,
    build_tree_class,
    critical_level,
    envelope_function,
    envelope_norm,
    fit_gamma,
    tree_envelope_check,
    tree_envelope_norm,
)
from shaperate.experiments import (
    BivariateSignal,
    ExperimentPlan,
    paired_slope_gap,
    run_lower_bound_probe,
    run_oracle_audit,
    run_risk_curve,
    trend_test,
)
from shaperate.isotonic import fit_isotonic, minmax_all
from shaperate.noise import ErrorLaw, lp1_norm, sample, survival

pytestmark = pytest.mark.slow

N_GRID = tuple(2**k for k in range(7, 14))
SLOPE_BAND_FAST = (-1.30, -0.70)


def test_isotonic_matches_minmax(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 51))
        s = make_sorted_sample(rng.uniform(size=n), rng.standard_normal(n))
        worst = max(worst, float(np.max(np.abs(fit_isotonic(s).fitted - minmax_all(s)))))
    dt = time.perf_counter() - t0
    report("isotonic min-max equivalence", worst <= 1e-10 and dt < 10,
           f"max gap {worst:.2e} (tol 1e-10), {dt:.1f}s (limit 10s)")


def test_convex_matches_enumeration_and_audit(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(3, 13))
        s = make_sorted_sample(rng.uniform(size=n), rng.standard_normal(n))
        worst = max(worst, float(np.max(np.abs(fit_convex(s).fitted - brute_force_convex(s).fitted))))
    failures, min_slack, max_gap = 0, np.inf, 0.0
    for i in range(1000):
        n = int(rng.integers(3, 501))
        xs = rng.uniform(size=n)
        ys = (xs - 0.4) ** 2 * (i % 3) + rng.standard_normal(n)
        s = make_sorted_sample(xs, ys)
        a = characterization_audit(s, fit_convex(s))
        failures += not a.passed
        min_slack, max_gap = min(min_slack, a.min_slack), max(max_gap, a.max_kink_gap)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and failures == 0 and min_slack >= -1e-8 and max_gap <= 1e-8 and dt < 60
    report("convex enumeration + characterization", ok,
           f"max gap vs enumeration {worst:.2e} (tol 1e-8), audit failures {failures}/1000, "
           f"min slack {min_slack:.1e}, max kink gap {max_gap:.1e}, {dt:.1f}s (limit 60s)")


def test_isotonic_gaussian_slope(report):
    t0 = time.perf_counter()
    plan = ExperimentPlan("isotonic", SignalSpec.linear(0.0, 1.0), ErrorLaw.gaussian(1.0), N_GRID, 200)
    curve = run_risk_curve(plan)
    dt = time.perf_counter() - t0
    ok = -0.80 <= curve.slope <= -0.55 and dt < 600
    report("isotonic gaussian rate", ok,
           f"slope {curve.slope:.3f} +- {curve.slope_stderr:.3f} (band [-0.80, -0.55]), {dt:.1f}s (limit 600s)")


def test_isotonic_heavy_tailed_adaptation(report):
    t0 = time.perf_counter()
    law = ErrorLaw.student_t(2.5)
    lp1 = lp1_norm(law, 2.0)
    plan = ExperimentPlan("isotonic", SignalSpec.constant(0.0), law, N_GRID, 200)
    curve = run_risk_curve(plan)
    audit = run_oracle_audit(plan, curve=curve)
    _, lower, no_trend = trend_test(audit.n_grid, audit.ratios, seed=4)
    dt = time.perf_counter() - t0
    in_band = SLOPE_BAND_FAST[0] <= curve.slope <= SLOPE_BAND_FAST[1]
    ok = math.isfinite(lp1) and in_band and no_trend and dt < 600
    report("isotonic heavy-tailed adaptation", ok,
           f"L21 norm {lp1:.3f}, slope {curve.slope:.3f} (band [-1.30, -0.70]), "
           f"ratio medians {np.round(audit.ratio_median, 2).tolist()}, trend lower bound {lower:.3f} "
           f"(upward trend iff > 0), {dt:.1f}s (limit 600s)")


def test_convex_heavy_tailed_adaptation(report):
    t0 = time.perf_counter()
    plan = ExperimentPlan("convex", SignalSpec.linear(0.2, 0.5), ErrorLaw.student_t(2.5), N_GRID, 200,
                          loss_summary="quantile", summary_param=0.5)
    curve = run_risk_curve(plan)
    dt = time.perf_counter() - t0
    ok = SLOPE_BAND_FAST[0] <= curve.slope <= SLOPE_BAND_FAST[1] and dt < 1200
    report("convex heavy-tailed adaptation", ok,
           f"slope of 0.5-quantile {curve.slope:.3f} (band [-1.30, -0.70]), {dt:.1f}s (limit 1200s)")


def test_additive_misspecified_h(report):
    t0 = time.perf_counter()
    step = SignalSpec.step_train([0.5], [0.0, 1.0])
    plan = ExperimentPlan("additive", None, ErrorLaw.student_t(2.5), N_GRID, 200,
                          bivariate=BivariateSignal(step), shape="isotonic",
                          hclass=HClass("centered_interval_indicators"), restarts=3)
    curve = run_risk_curve(plan)
    dt = time.perf_counter() - t0
    ok = SLOPE_BAND_FAST[0] <= curve.slope <= SLOPE_BAND_FAST[1] and dt < 1200
    report("additive with interval-indicator H", ok,
           f"slope {curve.slope:.3f} (band [-1.30, -0.70]), {dt:.1f}s (limit 1200s)")


def test_envelope_formulas(report):
    deltas = [1e-1, 1e-2, 1e-3, 1e-4]
    expected = {"isotonic_bounded": (1, 0.5), "convex_bounded": (1, 0.5), "linear_1d": (1, 0),
                "single_changepoint": (1, 0), "multi_changepoint": (0, 0)}
    worst, fit_ok, fits = 0.0, True, []
    for model in ENVELOPE_MODELS:
        norms = []
        for d in deltas:
            ref = math.sqrt(quadrature_sq_norm(envelope_function(model, d), envelope_kinks(model, d)))
            norms.append(envelope_norm(model, d))
            worst = max(worst, abs(norms[-1] - ref))
        g, tau = fit_gamma(deltas, norms)
        g0, tau0 = expected[model]
        fit_ok &= abs(g - g0) <= 0.05 and abs(tau - tau0) <= 0.1
        fits.append(f"{model} gamma {g:.3f} tau {tau:.3f}")
    report("envelope closed forms + growth fit", worst <= 1e-8 and fit_ok,
           f"max |closed form - quadrature| {worst:.1e} (tol 1e-8); " + "; ".join(fits))


def test_tree_envelope_bound(report):
    deltas = np.geomspace(1e-3, 1.0, 301)
    checks, truncated = [], False
    for gamma in (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)):
        depth = critical_level(build_tree_class(gamma, 1), 1e-3)
        tree = build_tree_class(gamma, depth)
        truncated |= any(tree_envelope_norm(tree, d)[1] for d in deltas)
        checks.append(tree_envelope_check(tree, deltas))
    ok = all(c <= math.sqrt(2) for c in checks) and not truncated
    report("tree envelope bound", ok,
           f"max ||F(delta)|| / delta^gamma = {[round(c, 4) for c in checks]} (bound {math.sqrt(2):.4f}), "
           f"truncated levels: {truncated}")


def test_lower_bound_direction(report):
    t0 = time.perf_counter()
    ns = tuple(2**k for k in range(9, 14))
    heavy = run_lower_bound_probe(0.5, 0.25, ns, 300)
    light = run_lower_bound_probe(0.5, 0.25, ns, 300, law=ErrorLaw.gaussian(math.sqrt(2.0)))
    gap, lower = paired_slope_gap(heavy, light, n_boot=2000, seed=0)
    dt = time.perf_counter() - t0
    report("heavy-tail lower bound direction", lower >= 0.05 and dt < 900,
           f"heavy slope {heavy.slope:.3f}, gaussian slope {light.slope:.3f}, gap {gap:.3f}, "
           f"95% lower bound {lower:.3f} (needs >= 0.05), {dt:.1f}s (limit 900s)")


def test_sampler_fidelity(report):
    laws = [ErrorLaw.gaussian(1.0), ErrorLaw.student_t(2.5), ErrorLaw.sym_stable(1.5), ErrorLaw.pareto_eta(1.0)]
    worst_z = 0.0
    for i, law in enumerate(laws):
        x = np.abs(sample(law, 10**6, 100 + i))
        for t in (0.5, 1.0, 2.0, 5.0):
            p = float(survival(law, t))
            worst_z = max(worst_z, abs(np.mean(x > t) - p) / math.sqrt(p * (1 - p) / x.size))
    cf = float(np.mean(np.cos(sample(ErrorLaw.sym_stable(1.5), 10**6, 200))))
    frac = float(np.mean(np.abs(sample(ErrorLaw.pareto_eta(1.0), 10**6, 201)) > 1))
    mean_abs = float(np.mean(np.abs(sample(ErrorLaw.pareto_eta(1.0), 10**6, 202))))
    lp_pareto = lp1_norm(ErrorLaw.pareto_eta(1.0), 2.0)
    lp_t = lp1_norm(ErrorLaw.student_t(2.5), 2.0)
    ok = (worst_z <= 3 and abs(cf - math.exp(-1)) <= 0.01 and abs(frac - 0.5) <= 0.002
          and abs(mean_abs - math.pi / 2) <= 0.02 and math.isinf(lp_pareto) and math.isfinite(lp_t))
    report("sampler fidelity", ok,
           f"max survival z-score {worst_z:.2f} (<= 3), stable cf(1) {cf:.4f} vs {math.exp(-1):.4f}, "
           f"P(|eta|>1) {frac:.4f}, E|eta| {mean_abs:.4f} vs {math.pi / 2:.4f}, "
           f"L21(pareto) {lp_pareto}, L21(t2.5) {lp_t:.4f}")
