"""Command-line entry point: ``smoothwass <command> [options]``.

Every command prints a JSON summary on stdout and writes CSV (and, with
``--svg``, SVG) files to the output directory.  Exit status is 0 on
success, 2 for invalid input and 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import outputs, svg
from .config import COMMANDS, ConfigError, RunConfig, build_config, load_config, options_for, parse_model
from .errors import SwdError
from .experiments import kde, ks_distance, limit_scatter, rate_experiment
from .inference import ConcentrationBound, bootstrap_swd, concentration_empirical, concentration_eval, two_sample_test
from .measures import DiscreteMeasure, GaussianMixture, ModelFamily, ParametricModel, ThetaSpace, Uniform, sample_model
from .mswe import ObjectiveConfig, OptimizerConfig, fit_mswe
from .rng import RngStream
from .swd import EstimatorConfig, swd_1d_exact
from .transport import brute_force_w1, sinkhorn_w1, solve_w1_1d_sorted, solve_w1_exact

CONSTANT_CAVEAT = (
    "note: psi_alpha and poly bounds hold only up to the unspecified constant C; "
    "the value shown uses the C you supplied"
)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smoothwass", description="Gaussian-smoothed Wasserstein tools")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file or run manifest")
        for key, opt in options_for(name).items():
            flag = "--" + key.replace("_", "-")
            if opt.kind == "flag":
                p.add_argument(flag, dest=key, action="store_true", default=argparse.SUPPRESS, help=opt.help)
            else:
                p.add_argument(flag, dest=key, default=argparse.SUPPRESS, help=opt.help)
    return parser


def _require(cfg: RunConfig, key: str):
    value = cfg.get(key)
    if value is None:
        raise ConfigError(f"{key}: required for {cfg.command!r}", key=key)
    return value


def _source(cfg, key):
    return parse_model(_require(cfg, key), cfg.get("d"), key)


def _as_data(source, n, rng):
    if isinstance(source, DiscreteMeasure):
        return source
    return sample_model(source, int(n), rng)


def _estimator(cfg) -> EstimatorConfig:
    return EstimatorConfig(cfg["method"], cfg["quad_tol"], cfg["m"], cfg.get("reps", 1), cfg["solver"],
                           cfg["epsilon"])


def _objective(cfg) -> ObjectiveConfig:
    return ObjectiveConfig(cfg["method"], cfg["quad_tol"], cfg["m"], cfg["solver"], cfg["epsilon"])


def _optimizer(cfg, trace=False) -> OptimizerConfig:
    return OptimizerConfig(max_evals=cfg["max_evals"], xtol=cfg["xtol"], restarts=cfg["restarts"],
                           record_trace=trace)


def _family(cfg, template: ParametricModel) -> ModelFamily:
    free = cfg.get("free")
    if free is None:
        groups = template.param_groups()
        names = [g for g in groups if g != "weights"]
    else:
        names = [s.strip() for s in free.split(",") if s.strip()]
    try:
        return ModelFamily.from_names(template, names)
    except SwdError as exc:
        raise ConfigError(f"free: {exc}", key="free") from None


def _space(cfg, family: ModelFamily, center) -> ThetaSpace:
    lower, upper = cfg.get("lower"), cfg.get("upper")
    center = np.asarray(center, dtype=float)
    # default box: truth +- 2, scales kept away from zero
    if lower is None:
        lower = center - 2.0
        scale_idx = [i for i, j in enumerate(family.free) if j in _scale_indices(family.template)]
        lower[scale_idx] = np.maximum(lower[scale_idx], 0.05)
    if upper is None:
        upper = center + 2.0
    for key, v in (("lower", lower), ("upper", upper)):
        if len(v) != family.n_params:
            raise ConfigError(f"{key}: need {family.n_params} values, got {len(v)}", key=key)
    try:
        return ThetaSpace(np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
    except SwdError as exc:
        raise ConfigError(f"lower: {exc}", key="lower") from None


def _scale_indices(template):
    groups = template.param_groups()
    return set(groups.get("scale", []) + groups.get("scales", []))


# ---------------------------------------------------------------- commands


def cmd_swd(cfg, root, out):
    P, Q = _source(cfg, "p"), _source(cfg, "q")
    est = _estimator(cfg).estimate(P, Q, cfg["sigma"], rng=root, threads=cfg.threads)
    result = est.to_dict()
    header = ["value", "std_error", "method", "m", "replications"]
    return result, [("swd.csv", header, [[result[h] for h in header]])]


def cmd_ot(cfg, root, out):
    P = _as_data(_source(cfg, "p"), cfg["n"], root.child("p"))
    Q = _as_data(_source(cfg, "q"), cfg["n"], root.child("q"))
    if cfg["ot_method"] == "sinkhorn":
        res = sinkhorn_w1(P, Q, cfg["epsilon"])
        result = {"cost": res.cost, "converged": res.converged, "iterations": res.n_iter,
                  "marginal_error": res.marginal_error, "lower_band": res.lower_band}
        plan = res.plan
    else:
        tp = solve_w1_exact(P, Q, method=cfg["ot_method"])
        result = {"cost": tp.cost, "marginal_errors": list(tp.marginal_errors(P.weights, Q.weights))}
        plan = tp.plan
    i, j = np.nonzero(plan > 0)
    rows = [(int(a), int(b), float(plan[a, b])) for a, b in zip(i, j)]
    result.update(n=P.n, m=Q.n)
    return result, [("ot_plan.csv", ["i", "j", "mass"], rows)]


def cmd_mswe(cfg, root, out):
    data = _as_data(_source(cfg, "data"), cfg["n"], root.child("data"))
    template = parse_model(_require(cfg, "family"), cfg.get("d"), "family")
    family = _family(cfg, template)
    for key in ("lower", "upper"):
        _require(cfg, key)
    space = _space(cfg, family, family.theta_of(template))
    res = fit_mswe(data, family, space, cfg["sigma"], _objective(cfg), _optimizer(cfg, trace=True),
                   root.child("fit"))
    result = {"theta_hat": res.theta_hat.tolist(), "objective": res.objective.to_dict(),
              "evaluations": res.evaluations, "converged": res.converged}
    header = ["evaluation"] + [f"theta{k}" for k in range(family.n_params)] + ["objective"]
    rows = [[k, *theta.tolist(), value] for k, (theta, value) in enumerate(res.trace)]
    return result, [("mswe_trace.csv", header, rows)]


def cmd_bootstrap(cfg, root, out):
    data = _as_data(_source(cfg, "data"), cfg["n"], root.child("data"))
    res = bootstrap_swd(data, cfg["sigma"], cfg["B"], _estimator(cfg), root.child("boot"), cfg.threads)
    q = res.quantile(cfg["alpha"])
    result = {"B": res.B, "n": res.n, "sigma": res.sigma, "alpha": cfg["alpha"], "q_hat": q,
              "mean": float(res.stats.mean())}
    plots = []
    if cfg["svg"]:
        curve = kde(res.stats)
        plots.append(lambda: svg.curve_plot(out / "bootstrap_kde.svg", [("bootstrap", curve.grid, curve.density)],
                                            title="bootstrap law", xlabel="sqrt(n) SWD"))
    return result, [("bootstrap_stats.csv", ["b", "stat"], list(enumerate(res.stats.tolist())))], plots


def cmd_twosample(cfg, root, out):
    X = _as_data(_source(cfg, "p"), cfg["n"], root.child("p"))
    Y = _as_data(_source(cfg, "q"), cfg["m_samples"], root.child("q"))
    res = two_sample_test(X, Y, cfg["sigma"], cfg["B"], cfg["alpha"], _estimator(cfg), root.child("test"),
                          cfg.threads)
    result = {**res.to_dict(), "n": X.n, "m": Y.n, "alpha": cfg["alpha"]}
    return result, [("twosample_stats.csv", ["b", "stat"], list(enumerate(res.stats.tolist())))]


def cmd_rates(cfg, root, out):
    P = _source(cfg, "p")
    if not isinstance(P, ParametricModel):
        raise ConfigError("p: rates need a model, not a file", key="p")
    res = rate_experiment(P, cfg["sigmas"], cfg["ns"], cfg["trials"], _estimator(cfg), root, cfg.threads)
    result = {"fits": [f.to_dict() for f in res.fits], "reference_size": res.reference_size}
    summary = [(f.sigma, int(n), m, s) for f in res.fits for n, m, s in zip(f.ns, f.means, f.stderrs)]
    files = [
        ("rates_trials.csv", ["sigma", "n", "trial", "swd"], res.rows),
        ("rates_summary.csv", ["sigma", "n", "mean", "stderr"], summary),
    ]
    plots = []
    if cfg["svg"]:
        series = [(f"sigma={f.sigma:g}", f.ns, f.means, f.stderrs) for f in res.fits]
        plots.append(lambda: svg.loglog_plot(out / "rates.svg", series, title="mean SWD vs n"))
    return result, files, plots


def cmd_scatter(cfg, root, out):
    truth = _source(cfg, "truth")
    if not isinstance(truth, ParametricModel):
        raise ConfigError("truth: must be a model", key="truth")
    template = parse_model(cfg["family"], cfg.get("d"), "family") if cfg.get("family") else truth
    family = _family(cfg, template)
    theta_star = family.canonical(family.theta_of(truth))
    space = _space(cfg, family, theta_star)
    res = limit_scatter(truth, family, space, cfg["sigmas"], cfg["ns"], cfg["trials"], _objective(cfg),
                        _optimizer(cfg), root, cfg.threads)
    cells = []
    for sigma in cfg["sigmas"]:
        ns = [int(n) for n in cfg["ns"]]
        for n in ns:
            cells.append({"sigma": sigma, "n": n, "failures": res.failures[(float(sigma), n)],
                          "median_abs_scaled_error": [float(np.median(np.abs(res.cloud(sigma, n, c))))
                                                      for c in range(family.n_params)]})
        for a, b in zip(ns, ns[1:]):
            cells.append({"sigma": sigma, "ks": [a, b],
                          "distance": [ks_distance(res.cloud(sigma, a, c), res.cloud(sigma, b, c))
                                       for c in range(family.n_params)]})
    result = {"theta_star": theta_star.tolist(), "lower": space.lower.tolist(), "upper": space.upper.tolist(),
              "cells": cells}
    header = ["sigma", "n", "trial", "component", "estimate", "scaled_error"]
    plots = []
    if cfg["svg"] and family.n_params >= 2:
        clouds = [(f"n={n}", res.cloud(s, n, 0), res.cloud(s, n, 1)) for s in cfg["sigmas"] for n in cfg["ns"]]
        plots.append(lambda: svg.scatter_plot(out / "scatter.svg", clouds, title="scaled estimation error",
                                              xlabel="component 0", ylabel="component 1"))
    return result, [("scatter.csv", header, res.rows)], plots


def cmd_concentration(cfg, root, out):
    P = _source(cfg, "p")
    if not isinstance(P, ParametricModel):
        raise ConfigError("p: must be a model", key="p")
    kind = cfg["kind"]
    diam = cfg.get("diam")
    if kind == "compact" and diam is None:
        if not isinstance(P, Uniform):
            raise ConfigError("diam: required for the compact bound", key="diam")
        diam = P.diameter
    try:
        bound = ConcentrationBound(kind, diam=diam, alpha=cfg.get("alpha_exp"), psi_norm=cfg.get("psi_norm"),
                                   second_moment=cfg.get("second_moment"), q=cfg.get("q"),
                                   max_moment=cfg.get("max_moment"), eta=cfg.get("eta"), C=cfg.get("C"),
                                   sigma=cfg["sigma"], d=P.dim)
    except SwdError as exc:
        key = str(exc).split(" ")[0]
        raise ConfigError(str(exc), key="alpha_exp" if key == "alpha" else key) from None
    if kind != "compact":
        _require(cfg, "C")
        print(CONSTANT_CAVEAT, file=sys.stderr)
    emp = concentration_empirical(P, cfg["sigma"], cfg["n"], cfg["trials"], cfg["ts"], root, _estimator(cfg),
                                  threads=cfg.threads)
    bounds = [concentration_eval(bound, cfg["n"], t) for t in emp.t]
    rows = list(zip(emp.t.tolist(), emp.frequency.tolist(), emp.half_width.tolist(), bounds))
    result = {"kind": kind, "mean": emp.mean, "t": emp.t.tolist(), "frequency": emp.frequency.tolist(),
              "half_width": emp.half_width.tolist(), "bound": bounds,
              "within_bound": bool(all(f <= b + h for f, h, b in zip(emp.frequency, emp.half_width, bounds)))}
    if kind != "compact":
        result["caveat"] = CONSTANT_CAVEAT
    return result, [("concentration.csv", ["t", "frequency", "half_width", "bound"], rows)]


def selftest_checks(seed: int = 0) -> dict:
    """Small oracle-equivalence and analytic-identity checks."""
    from .measures import Gaussian

    root = RngStream(seed, ()).child("selftest")
    checks = {}
    worst = 0.0
    for k in range(30):
        gen = root.child("ot", k).generator()
        n, d = int(gen.integers(2, 7)), (1, 2, 5)[k % 3]
        mu, nu = DiscreteMeasure(gen.standard_normal((n, d))), DiscreteMeasure(gen.standard_normal((n, d)))
        worst = max(worst, abs(solve_w1_exact(mu, nu, method="simplex").cost - brute_force_w1(mu, nu)))
    checks["simplex_vs_brute_force"] = {"ok": worst <= 1e-10, "max_error": worst}
    worst = 0.0
    for k in range(20):
        gen = root.child("sorted", k).generator()
        n = int(gen.integers(2, 40))
        mu, nu = DiscreteMeasure(gen.standard_normal((n, 1))), DiscreteMeasure(gen.standard_normal((n, 1)))
        worst = max(worst, abs(solve_w1_1d_sorted(mu, nu) - solve_w1_exact(mu, nu, method="simplex").cost))
    checks["sorted_vs_simplex"] = {"ok": worst <= 1e-10, "max_error": worst}
    g = Gaussian([0.0], 1.0)
    errs = [swd_1d_exact(g, g, 1.0).value]
    for a in (0.5, 1.0, 2.0):
        errs.append(abs(swd_1d_exact(g, Gaussian([a], 1.0), 1.0).value - a))
    errs.append(abs(swd_1d_exact(DiscreteMeasure.point_mass([0.0]), g, 1.0).value
                    - (math.sqrt(2) - 1) * math.sqrt(2 / math.pi)))
    checks["swd_identities"] = {"ok": max(errs) <= 1e-5, "max_error": max(errs)}
    b = ConcentrationBound("compact", diam=1.0)
    same = all(concentration_eval(b, 2 * n, 0.05) == concentration_eval(b, n, 0.05) ** 2 for n in (1, 7, 100))
    checks["concentration_doubling"] = {"ok": same}
    return checks


def cmd_selftest(cfg, root, out):
    checks = selftest_checks(cfg["seed"])
    result = {"checks": checks, "ok": all(c["ok"] for c in checks.values())}
    rows = [(name, c["ok"], c.get("max_error", 0.0)) for name, c in checks.items()]
    return result, [("selftest.csv", ["check", "ok", "max_error"], rows)]


HANDLERS = {
    "swd": cmd_swd,
    "ot": cmd_ot,
    "mswe": cmd_mswe,
    "bootstrap": cmd_bootstrap,
    "twosample": cmd_twosample,
    "rates": cmd_rates,
    "scatter": cmd_scatter,
    "concentration": cmd_concentration,
    "selftest": cmd_selftest,
}


def run(cfg: RunConfig) -> tuple[dict, dict]:
    """Execute a validated config; returns (manifest, result) after writing files."""
    out = outputs.output_dir(cfg.get("out"))
    root = RngStream(cfg["seed"], ()).child(cfg.command)
    produced = HANDLERS[cfg.command](cfg, root, out)
    result, files = produced[0], produced[1]
    plots = produced[2] if len(produced) > 2 else []
    manifest = outputs.make_manifest(cfg.command, cfg["seed"], cfg.manifest_config())
    written = []
    for name, header, rows in files:
        written.append(str(outputs.write_csv(out / name, header, rows, manifest).name))
    for plot in plots:
        written.append(plot().name)
    outputs.write_json(out / f"{cfg.command}_summary.json", manifest, result)
    result = {**result, "files": written}
    return manifest, result


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = vars(parser.parse_args(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    command = args.pop("command")
    try:
        file_values = load_config(args.pop("config")) if "config" in args else None
        cfg = build_config(command, file_values, args)
        manifest, result = run(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"smoothwass {command}: invalid input: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"smoothwass {command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if command == "selftest" and not result.get("ok", False):
        print(outputs.summary_json(manifest, result))
        return 1
    print(outputs.summary_json(manifest, result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
