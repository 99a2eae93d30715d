"""Command line entry point: ``shaperate [command] --config PATH --out DIR``.

Config files are JSON objects. Keys by command:

* every command: ``command``, ``base_seed``, ``threads``
* fit: ``shape``, ``xs``, ``ys``
* simulate / oracle: ``plan`` (see ``plan_from_dict``); oracle also ``m_max``
* envelope: ``model``, ``deltas``, ``B``
* lower-bound: ``gamma``, ``eps``, ``n_grid``, ``replications``, ``max_level``,
  ``loss_summary``, ``summary_param``, ``n_boot``

Exit status: 0 on success, 2 on an invalid config, 3 on a runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .additive import HClass
from .convex import characterization_audit, fit_convex
from .core import SignalSpec, make_sorted_sample
from .envelopes import ENVELOPE_MODELS, envelope_norm, fit_gamma
from .experiments import (
    BivariateSignal,
    ExperimentPlan,
    paired_slope_gap,
    run_lower_bound_probe,
    run_oracle_audit,
    run_risk_curve,
    trend_test,
)
from .isotonic import fit_isotonic, minmax_all
from .noise import ErrorLaw

COMMANDS = ("fit", "simulate", "oracle", "envelope", "lower-bound")
COMMON_KEYS = {"command", "base_seed", "threads"}
COMMAND_KEYS = {
    "fit": {"shape", "xs", "ys"},
    "simulate": {"plan"},
    "oracle": {"plan", "m_max"},
    "envelope": {"model", "deltas", "B"},
    "lower-bound": {"gamma", "eps", "n_grid", "replications", "max_level", "loss_summary",
                    "summary_param", "n_boot"},
}
PLAN_KEYS = {"estimator", "signal", "law", "n_grid", "replications", "loss_summary", "summary_param",
             "bivariate", "shape", "hclass", "restarts"}
MODEL_ALIASES = {"isotonic": "isotonic_bounded", "convex": "convex_bounded"}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class RunConfig:
    command: str
    base_seed: int = 0
    threads: int = 1
    options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing key '{where}{key}'")
    return d[key]


def _wrap(key: str, fn, *args):
    try:
        return fn(*args)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid value for '{key}': {exc}") from exc


def signal_from_dict(d: dict, key: str) -> SignalSpec:
    if not isinstance(d, dict):
        raise ConfigError(f"'{key}' must be an object with 'kind' and 'params'")
    extra = set(d) - {"kind", "params"}
    if extra:
        raise ConfigError(f"unknown key '{key}.{sorted(extra)[0]}'")
    return _wrap(key, lambda: SignalSpec(_require(d, "kind", key + "."), tuple(d.get("params", ()))))


def law_from_dict(d: dict, key: str = "plan.law") -> ErrorLaw:
    if not isinstance(d, dict):
        raise ConfigError(f"'{key}' must be an object with 'kind' and parameters")
    params = {k: v for k, v in d.items() if k != "kind"}
    return _wrap(key, lambda: ErrorLaw(_require(d, "kind", key + "."), params))


def plan_from_dict(d: dict, base_seed: int) -> ExperimentPlan:
    """Build an ExperimentPlan from its JSON form.

    ``signal`` and ``bivariate.f_part`` / ``bivariate.h_part`` are
    ``{"kind", "params"}`` objects; ``law`` is ``{"kind", ...parameters}``;
    ``hclass`` is ``{"kind", "params"}``.
    """
    if not isinstance(d, dict):
        raise ConfigError("'plan' must be an object")
    extra = set(d) - PLAN_KEYS
    if extra:
        raise ConfigError(f"unknown key 'plan.{sorted(extra)[0]}'")
    estimator = _require(d, "estimator", "plan.")
    signal = signal_from_dict(d["signal"], "plan.signal") if "signal" in d else None
    law = law_from_dict(_require(d, "law", "plan."))
    biv = None
    if "bivariate" in d:
        b = d["bivariate"]
        extra = set(b) - {"f_part", "h_part", "interaction"}
        if extra:
            raise ConfigError(f"unknown key 'plan.bivariate.{sorted(extra)[0]}'")
        biv = BivariateSignal(
            signal_from_dict(_require(b, "f_part", "plan.bivariate."), "plan.bivariate.f_part"),
            signal_from_dict(b["h_part"], "plan.bivariate.h_part") if b.get("h_part") else None,
            float(b.get("interaction", 0.0)),
        )
    hclass = None
    if "hclass" in d:
        h = d["hclass"]
        extra = set(h) - {"kind", "params"}
        if extra:
            raise ConfigError(f"unknown key 'plan.hclass.{sorted(extra)[0]}'")
        hclass = _wrap("plan.hclass", lambda: HClass(_require(h, "kind", "plan.hclass."), dict(h.get("params", {}))))
    kwargs = {k: d[k] for k in ("loss_summary", "summary_param", "shape", "restarts") if k in d}
    n_grid = _require(d, "n_grid", "plan.")
    reps = _require(d, "replications", "plan.")
    try:
        return ExperimentPlan(estimator, signal, law, tuple(n_grid), int(reps),
                              base_seed=base_seed, bivariate=biv, hclass=hclass, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid value for 'plan.{_plan_key(str(exc))}': {exc}") from exc


_PLAN_MESSAGE_KEYS = (
    ("n_grid", "n_grid"), ("replications", "replications"), ("loss_summary", "loss_summary"),
    ("trimming", "summary_param"), ("quantile level", "summary_param"), ("estimator", "estimator"),
    ("shape", "shape"), ("bivariate", "bivariate"), ("signal", "signal"),
)


def _plan_key(msg: str) -> str:
    """The plan key a validation message refers to."""
    return next((key for word, key in _PLAN_MESSAGE_KEYS if word in msg), "estimator")


def parse_deltas(text) -> list[float]:
    """A list of numbers, a comma list, or ``a..b`` for one delta per decade from a to b."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text)
    if ".." in text:
        a, b = (float(v) for v in text.split(".."))
        if a <= 0 or b <= 0:
            raise ValueError("deltas must be positive")
        k = int(round(abs(math.log10(b / a)))) + 1
        return np.geomspace(a, b, k).tolist()
    return [float(v) for v in text.split(",") if v.strip()]


def validate(raw: dict, seed_override=None, threads_override=None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    command = _require(raw, "command", "")
    if command not in COMMANDS:
        raise ConfigError(f"invalid value for 'command': expected one of {COMMANDS}")
    allowed = COMMON_KEYS | COMMAND_KEYS[command]
    extra = set(raw) - allowed
    if extra:
        raise ConfigError(f"unknown key '{sorted(extra)[0]}' for command {command}")
    seed = raw.get("base_seed", 0) if seed_override is None else seed_override
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
        raise ConfigError("invalid value for 'base_seed': must be an unsigned 64-bit integer")
    threads = raw.get("threads", 1) if threads_override is None else threads_override
    if not isinstance(threads, int) or threads < 0:
        raise ConfigError("invalid value for 'threads': must be a non-negative integer")
    if threads == 0:
        threads = os.cpu_count() or 1
    opts = {}
    if command == "fit":
        shape = _require(raw, "shape", "")
        if shape not in ("isotonic", "convex"):
            raise ConfigError("invalid value for 'shape': expected isotonic or convex")
        opts["shape"] = shape
        opts["sample"] = _wrap("xs", make_sorted_sample, _require(raw, "xs", ""), _require(raw, "ys", ""))
    elif command in ("simulate", "oracle"):
        opts["plan"] = plan_from_dict(_require(raw, "plan", ""), seed)
        if command == "oracle":
            m_max = raw.get("m_max", 8)
            if not isinstance(m_max, int) or m_max < 1:
                raise ConfigError("invalid value for 'm_max': must be a positive integer")
            opts["m_max"] = m_max
    elif command == "envelope":
        model = MODEL_ALIASES.get(raw.get("model"), raw.get("model"))
        if model not in ENVELOPE_MODELS:
            raise ConfigError(f"invalid value for 'model': expected one of {ENVELOPE_MODELS}")
        deltas = _wrap("deltas", parse_deltas, _require(raw, "deltas", ""))
        if not deltas or any(not d > 0 for d in deltas):
            raise ConfigError("invalid value for 'deltas': must be positive")
        B = raw.get("B", 1.0)
        if not isinstance(B, (int, float)) or B <= 0:
            raise ConfigError("invalid value for 'B': must be positive")
        opts.update(model=model, deltas=deltas, B=float(B))
    else:
        gamma = _require(raw, "gamma", "")
        eps = _require(raw, "eps", "")
        if not isinstance(gamma, (int, float)) or not 0 < gamma <= 1:
            raise ConfigError("invalid value for 'gamma': must lie in (0, 1]")
        if not isinstance(eps, (int, float)) or not 0 < eps < 0.5:
            raise ConfigError("invalid value for 'eps': must lie in (0, 1/2)")
        n_grid = _require(raw, "n_grid", "")
        if not isinstance(n_grid, list) or len(n_grid) < 4 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
            raise ConfigError("invalid value for 'n_grid': need at least four increasing sizes")
        reps = _require(raw, "replications", "")
        if not isinstance(reps, int) or reps < 30:
            raise ConfigError("invalid value for 'replications': must be an integer >= 30")
        opts.update(gamma=float(gamma), eps=float(eps), n_grid=[int(n) for n in n_grid], replications=reps,
                    max_level=raw.get("max_level"), loss_summary=raw.get("loss_summary", "trimmed_mean"),
                    summary_param=raw.get("summary_param", 0.1), n_boot=int(raw.get("n_boot", 2000)))
    echo = dict(raw)
    echo["base_seed"] = seed
    return RunConfig(command, seed, threads, opts, echo)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return _jsonable(v.item())
    return v


def execute(cfg: RunConfig, out: Path) -> dict:
    """Run a validated config, write CSV tables into ``out`` and return the results record."""
    o = cfg.options
    res: dict = {}
    if cfg.command == "fit":
        s = o["sample"]
        if o["shape"] == "isotonic":
            fit = fit_isotonic(s)
            gap = float(np.max(np.abs(fit.fitted - minmax_all(s))))
            res = {"fitted": fit.fitted.tolist(), "minmax_gap": gap}
        else:
            fit = fit_convex(s)
            a = characterization_audit(s, fit)
            res = {"fitted": fit.fitted.tolist(), "kinks": fit.kinks.tolist(), "min_slack": a.min_slack,
                   "max_kink_gap": a.max_kink_gap, "audit_passed": a.passed}
        _write_csv(out / "fit.csv", ["x", "fitted"], zip(s.xs.tolist(), fit.fitted.tolist()))
    elif cfg.command == "simulate":
        curve = run_risk_curve(o["plan"], cfg.threads)
        res = curve.to_dict()
        _write_csv(out / "simulate.csv", ["n", "summary", "iqr_lo", "iqr_hi"],
                   zip(curve.n_grid.tolist(), curve.summary.tolist(), curve.iqr_lo.tolist(), curve.iqr_hi.tolist()))
    elif cfg.command == "oracle":
        audit = run_oracle_audit(o["plan"], o["m_max"], workers=cfg.threads)
        res = audit.to_dict()
        slope, lower, ok = trend_test(audit.n_grid, audit.ratios, seed=cfg.base_seed)
        res["ratio_trend"] = {"slope": slope, "lower_95": lower, "no_upward_trend": bool(ok)}
        _write_csv(out / "oracle.csv", ["n", "lhs_median", "rhs_min", "ratio_median"],
                   zip(audit.n_grid.tolist(), audit.lhs_median.tolist(), audit.rhs_min.tolist(),
                       audit.ratio_median.tolist()))
    elif cfg.command == "envelope":
        deltas = sorted(o["deltas"])
        norms = [envelope_norm(o["model"], d, o["B"]) for d in deltas]
        res = {"model": o["model"], "deltas": deltas, "norms": norms}
        try:
            g, tau = fit_gamma(deltas, norms)
            res.update(gamma_hat=g, log_correction=tau)
        except ValueError as exc:
            res["gamma_fit_skipped"] = str(exc)
        _write_csv(out / "envelope.csv", ["delta", "norm"], zip(deltas, norms))
    else:
        kw = dict(base_seed=cfg.base_seed, max_level=o["max_level"], loss_summary=o["loss_summary"],
                  summary_param=o["summary_param"])
        heavy = run_lower_bound_probe(o["gamma"], o["eps"], o["n_grid"], o["replications"], **kw)
        light = run_lower_bound_probe(o["gamma"], o["eps"], o["n_grid"], o["replications"],
                                      law=ErrorLaw.gaussian(math.sqrt(2.0)), **kw)
        gap, lower = paired_slope_gap(heavy, light, n_boot=o["n_boot"], seed=cfg.base_seed)
        res = {"heavy": heavy.to_dict(), "light": light.to_dict(), "slope_gap": gap, "slope_gap_lower_95": lower}
        rows = [(arm, n, s, lo, hi) for arm, c in (("heavy", heavy), ("light", light))
                for n, s, lo, hi in zip(c.n_grid.tolist(), c.summary.tolist(), c.iqr_lo.tolist(), c.iqr_hi.tolist())]
        _write_csv(out / "lower_bound.csv", ["arm", "n", "summary", "iqr_lo", "iqr_hi"], rows)
    record = {"config": cfg.raw, "seed": cfg.base_seed, "version": __version__, "command": cfg.command,
              "results": res}
    with open(out / "results.json", "w") as fh:
        json.dump(_jsonable(record), fh, indent=2)
    return record


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shaperate", description="Shape-constrained regression experiments.")
    p.add_argument("command", nargs="?", choices=COMMANDS, help="overrides the config's command")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker processes, 0 = all cores")
    p.add_argument("--seed", type=int, default=None, help="overrides base_seed")
    p.add_argument("--model", help="envelope model (envelope command without a config)")
    p.add_argument("--deltas", help="envelope deltas: a..b (one per decade) or a comma list")
    return p


def _threads_default():
    env = os.environ.get("SHAPERATE_THREADS")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise ConfigError("invalid value for 'SHAPERATE_THREADS': must be an integer")


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    raw = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config '{args.config}': {exc}")
        if args.command:
            raw = {**raw, "command": args.command} if isinstance(raw, dict) else raw
        if isinstance(raw, dict):
            if args.model is not None:
                raw["model"] = args.model
            if args.deltas is not None:
                raw["deltas"] = args.deltas
        threads = args.threads if args.threads is not None else _threads_default()
        cfg = validate(raw, args.seed, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        record = execute(cfg, out)
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    if cfg.command == "fit":
        print(json.dumps(_jsonable(record["results"])))
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
