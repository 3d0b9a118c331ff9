"""Run configuration: option tables, model-spec grammar, JSON config files.

Model specs are ``family:params``:

``gaussian:m1,...,md,s``
    isotropic Gaussian with mean (m1..md) and scale s
``diag:m1,...,md,s1,...,sd``
    diagonal Gaussian
``mixture:[w,m1..md,s;w,m1..md,s;...]``
    Gaussian mixture
``uniform:lo,hi``
    uniform on a box (lo, hi given per axis, low bounds first)
``file:path``
    equal-weight point cloud read from a text/CSV file (rows are points)
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, SwdError
from .measures import DiagGaussian, DiscreteMeasure, Gaussian, GaussianMixture, Uniform


def _floats(text: str, key: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}", key=key) from None
    if not values:
        raise ConfigError(f"{key}: empty parameter list", key=key)
    return values


def parse_model(spec: str, d: int | None = None, key: str = "model"):
    """Turn a model spec string into a ParametricModel or DiscreteMeasure."""
    if not isinstance(spec, str) or ":" not in spec:
        raise ConfigError(f"{key}: model spec must look like family:params, got {spec!r}", key=key)
    family, _, body = spec.partition(":")
    family = family.strip().lower()
    try:
        if family == "file":
            return _load_points(body.strip(), d, key)
        if family == "mixture":
            body = body.strip()
            if not (body.startswith("[") and body.endswith("]")):
                raise ConfigError(f"{key}: mixture parameters go in brackets", key=key)
            comps = []
            for part in body[1:-1].split(";"):
                vals = _floats(part, key)
                dim = d if d is not None else len(vals) - 2
                if len(vals) != dim + 2 or dim < 1:
                    raise ConfigError(f"{key}: mixture component needs w, {dim} mean(s), s", key=key)
                comps.append((vals[0], vals[1:-1], vals[-1]))
            return GaussianMixture(comps)
        vals = _floats(body, key)
        if family == "gaussian":
            dim = d if d is not None else len(vals) - 1
            if len(vals) != dim + 1 or dim < 1:
                raise ConfigError(f"{key}: gaussian needs {dim} mean(s) and a scale", key=key)
            return Gaussian(vals[:-1], vals[-1])
        if family == "diag":
            dim = d if d is not None else len(vals) // 2
            if len(vals) != 2 * dim or dim < 1:
                raise ConfigError(f"{key}: diag needs {dim} means and {dim} scales", key=key)
            return DiagGaussian(vals[:dim], vals[dim:])
        if family == "uniform":
            dim = d if d is not None else len(vals) // 2
            if len(vals) != 2 * dim or dim < 1:
                raise ConfigError(f"{key}: uniform needs {dim} low and {dim} high bounds", key=key)
            return Uniform(vals[:dim], vals[dim:])
    except ConfigError:
        raise
    except (SwdError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}", key=key) from None
    raise ConfigError(f"{key}: unknown model family {family!r}", key=key)


def _load_points(path: str, d, key):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{key}: no such file {path!r}", key=key)
    text = p.read_text(encoding="utf-8")
    delim = "," if "," in text else None
    pts = np.loadtxt(p, delimiter=delim, ndmin=2, comments="#")
    if d is not None and pts.shape[1] != d:
        raise ConfigError(f"{key}: file has {pts.shape[1]} columns, expected {d}", key=key)
    return DiscreteMeasure(pts)


# ---------------------------------------------------------------- option tables

# validators return an error message or None


def _positive(v):
    return None if v > 0 and math.isfinite(v) else "must be positive"


def _all_positive(vs):
    return None if vs and all(v > 0 and math.isfinite(v) for v in vs) else "must be positive numbers"


def _at_least(k):
    return lambda v: None if v >= k else f"must be at least {k}"


def _all_at_least(k):
    return lambda vs: None if vs and all(v >= k for v in vs) else f"entries must be at least {k}"


def _open_unit(v):
    return None if 0 < v < 1 else "must lie in (0, 1)"


def _choice(*options):
    return lambda v: None if v in options else f"must be one of {list(options)}"


@dataclass(frozen=True)
class Option:
    kind: str  # float | int | str | floats | ints | flag
    default: object = None
    check: object = None
    help: str = ""


COMMON = {
    "seed": Option("int", 0, _at_least(0), "master seed"),
    "threads": Option("int", None, _at_least(1), "worker threads (default: all cores)"),
    "out": Option("str", None, None, "output directory"),
    "svg": Option("flag", False, None, "also write SVG plots"),
    "d": Option("int", None, _at_least(1), "dimension used to read model specs"),
}

_ESTIMATOR = {
    "method": Option("str", "auto", _choice("auto", "exact1d", "mc"), "SWD estimator"),
    "m": Option("int", 1000, _at_least(2), "plug-in sample size"),
    "reps": Option("int", 1, _at_least(1), "plug-in replications"),
    "solver": Option("str", "exact", _choice("exact", "sinkhorn"), "discrete OT solver"),
    "epsilon": Option("float", 0.01, _positive, "Sinkhorn regularization"),
    "quad_tol": Option("float", 1e-8, _positive, "1-D quadrature tolerance"),
}

_FIT = {
    "family": Option("str", None, None, "model template spec"),
    "free": Option("str", None, None, "comma list of free parameter groups or indices"),
    "lower": Option("floats", None, None, "box lower bounds"),
    "upper": Option("floats", None, None, "box upper bounds"),
    "max_evals": Option("int", 2000, _at_least(1), "Nelder-Mead evaluation cap"),
    "xtol": Option("float", 1e-4, _open_unit, "simplex diameter tolerance (box fraction)"),
    "restarts": Option("int", 3, _at_least(0), "random restarts"),
}

COMMANDS = {
    "swd": {
        "p": Option("str", None, None, "first source"),
        "q": Option("str", None, None, "second source"),
        "sigma": Option("float", 1.0, _positive, "smoothing scale"),
        **_ESTIMATOR,
    },
    "ot": {
        "p": Option("str", None, None, "first source"),
        "q": Option("str", None, None, "second source"),
        "n": Option("int", 100, _at_least(1), "sample size when a source is a model"),
        "ot_method": Option("str", "auto", _choice("auto", "simplex", "assignment", "sinkhorn"), "solver"),
        "epsilon": Option("float", 0.01, _positive, "Sinkhorn regularization"),
    },
    "mswe": {
        "data": Option("str", None, None, "data source (file: or a model to sample)"),
        "n": Option("int", 1000, _at_least(1), "sample size when data is a model"),
        "sigma": Option("float", 1.0, _positive, "smoothing scale"),
        **_FIT,
        **{k: _ESTIMATOR[k] for k in ("method", "m", "solver", "epsilon", "quad_tol")},
    },
    "bootstrap": {
        "data": Option("str", None, None, "data source"),
        "n": Option("int", 500, _at_least(2), "sample size when data is a model"),
        "sigma": Option("float", 1.0, _positive, "smoothing scale"),
        "B": Option("int", 500, _at_least(10), "bootstrap replicates"),
        "alpha": Option("float", 0.1, _open_unit, "quantile level"),
        **_ESTIMATOR,
    },
    "twosample": {
        "p": Option("str", None, None, "first sample source"),
        "q": Option("str", None, None, "second sample source"),
        "n": Option("int", 500, _at_least(2), "first sample size when p is a model"),
        "m_samples": Option("int", 500, _at_least(2), "second sample size when q is a model"),
        "sigma": Option("float", 1.0, _positive, "smoothing scale"),
        "B": Option("int", 200, _at_least(50), "bootstrap replicates"),
        "alpha": Option("float", 0.05, _open_unit, "test level"),
        **_ESTIMATOR,
    },
    "rates": {
        "p": Option("str", "gaussian:0,1", None, "population model"),
        "sigmas": Option("floats", [1.0], _all_positive, "smoothing scales"),
        "ns": Option("ints", [128, 256, 512, 1024, 2048], _all_at_least(1), "sample sizes"),
        "trials": Option("int", 50, _at_least(20), "trials per cell"),
        **_ESTIMATOR,
    },
    "scatter": {
        "truth": Option("str", "mixture:[0.5,0,1;0.5,1,1]", None, "true model"),
        "sigmas": Option("floats", [1.0], _all_positive, "smoothing scales"),
        "ns": Option("ints", [256, 1024], _all_at_least(1), "sample sizes"),
        "trials": Option("int", 50, _at_least(1), "trials per cell"),
        **_FIT,
        **{k: _ESTIMATOR[k] for k in ("method", "m", "solver", "epsilon", "quad_tol")},
    },
    "concentration": {
        "p": Option("str", "uniform:0,1", None, "population model"),
        "sigma": Option("float", 1.0, _positive, "smoothing scale"),
        "n": Option("int", 200, _at_least(1), "sample size"),
        "trials": Option("int", 500, _at_least(100), "Monte-Carlo trials"),
        "ts": Option("floats", [0.05, 0.1, 0.2, 0.3], _all_positive, "deviation grid"),
        "kind": Option("str", "compact", _choice("compact", "psi_alpha", "poly"), "bound kind"),
        "diam": Option("float", None, _positive, "support diameter (compact)"),
        "alpha_exp": Option("float", None, _positive, "psi_alpha exponent"),
        "psi_norm": Option("float", None, _positive, "psi_alpha norm proxy"),
        "second_moment": Option("float", None, _positive, "second moment P|x|^2"),
        "q": Option("float", None, _at_least(1), "moment order"),
        "max_moment": Option("float", None, _positive, "E max|X_i|^q proxy"),
        "eta": Option("float", None, _positive, "mean slack"),
        "C": Option("float", None, _positive, "user-supplied constant"),
        **{k: _ESTIMATOR[k] for k in ("method", "m", "solver", "epsilon", "quad_tol")},
    },
    "selftest": {},
}

# options that never change results and are kept out of the manifest
RUNTIME_ONLY = ("threads", "out", "svg")


def options_for(command: str) -> dict:
    return {**COMMON, **COMMANDS[command]}


def convert(kind: str, raw, key: str):
    """Coerce a CLI string or JSON value to the option's type."""
    try:
        if kind == "flag":
            if not isinstance(raw, bool):
                raise ValueError
            return raw
        if kind == "float":
            if isinstance(raw, bool):
                raise ValueError
            return float(raw)
        if kind == "int":
            if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
                raise ValueError
            return int(raw)
        if kind == "str":
            if not isinstance(raw, str):
                raise ValueError
            return raw
        if kind in ("floats", "ints"):
            items = raw.split(",") if isinstance(raw, str) else list(raw)
            return [convert(kind[:-1], v.strip() if isinstance(v, str) else v, key) for v in items]
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind}", key=key) from None
    raise ConfigError(f"{key}: unknown option type {kind}", key=key)


@dataclass(frozen=True)
class RunConfig:
    command: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def threads(self) -> int:
        return self.values.get("threads") or os.cpu_count() or 1

    def manifest_config(self) -> dict:
        return {k: v for k, v in sorted(self.values.items()) if k not in RUNTIME_ONLY}


def _reject_duplicates(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise ConfigError(f"{k}: duplicate key in config file", key=k)
        seen[k] = v
    return seen


def load_config(path) -> dict:
    """Read a UTF-8 JSON object; duplicate keys are an error."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {str(path)!r} does not exist", key="config")
    try:
        text = p.read_text(encoding="utf-8")
        data = json.loads(text, object_pairs_hook=_reject_duplicates)
    except UnicodeDecodeError:
        raise ConfigError("config file is not UTF-8", key="config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}", key="config") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object", key="config")
    # a run manifest (or a summary holding one) is accepted as a config
    if "manifest" in data and isinstance(data["manifest"], dict):
        data = data["manifest"]
    if "config_hash" in data and isinstance(data.get("config"), dict):
        return {"command": data.get("command"), **data["config"]}
    return data


def build_config(command: str, file_values: dict | None, flag_values: dict) -> RunConfig:
    """Defaults, then file values, then explicit flags; each value validated."""
    table = options_for(command)
    values = {k: opt.default for k, opt in table.items()}
    for source in (file_values or {}, flag_values):
        for key, raw in source.items():
            if key == "command":
                if raw != command:
                    raise ConfigError(f"command: file is for {raw!r}, not {command!r}", key="command")
                continue
            if key not in table:
                raise ConfigError(f"{key}: unknown option for {command!r}", key=key)
            values[key] = None if raw is None else convert(table[key].kind, raw, key)
    for key, opt in table.items():
        v = values[key]
        if v is not None and opt.check is not None:
            problem = opt.check(v)
            if problem:
                raise ConfigError(f"{key}: {problem} (got {v!r})", key=key)
    return RunConfig(command, values)
