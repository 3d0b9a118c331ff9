"""Minimum smooth Wasserstein estimation over a compact parameter box."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import Bounds, minimize

from .errors import DimensionError, FitError, ParameterError, PreconditionError, SwdError
from .measures import (
    DiscreteMeasure,
    ModelFamily,
    ParametricModel,
    ThetaSpace,
    _check_sigma,
    as_family,
    draw_base,
    sample_model,
)
from .rng import RngStream, as_stream, parallel_map
from .smoothing import smoothed_draw
from .swd import SmoothedCdfGrid, SwdEstimate
from .transport import w1_equal_weight

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObjectiveConfig:
    """How SWD(P_n, Q_theta) is evaluated during a fit.

    ``method="auto"`` picks the exact 1-D distance for d = 1 and the
    plug-in estimate with frozen noise (common random numbers) otherwise.
    """

    method: str = "auto"
    quad_tol: float = 1e-8
    m: int = 1000
    solver: str = "exact"
    epsilon: float = 0.01

    def __post_init__(self):
        if self.method not in ("auto", "exact1d", "mc"):
            raise ParameterError(f"unknown objective method {self.method!r}")
        if self.solver not in ("exact", "sinkhorn"):
            raise ParameterError(f"unknown solver {self.solver!r}")
        if int(self.m) < 2:
            raise ParameterError("plug-in size m must be at least 2")


@dataclass(frozen=True)
class OptimizerConfig:
    """Nelder-Mead settings; ``xtol`` and ``step`` are fractions of the box width."""

    max_evals: int = 2000
    xtol: float = 1e-4
    restarts: int = 3
    step: float = 0.05
    start: Optional[tuple] = None
    record_trace: bool = False

    def __post_init__(self):
        if int(self.max_evals) < 1 or int(self.restarts) < 0:
            raise ParameterError("max_evals must be >= 1 and restarts >= 0")
        if not (0 < self.xtol < 1 and 0 < self.step < 1):
            raise ParameterError("xtol and step must lie in (0, 1)")


@dataclass
class MsweResult:
    theta_hat: np.ndarray
    objective: SwdEstimate
    evaluations: int
    converged: bool
    trace: Optional[list] = field(default=None, repr=False)


class Exact1dObjective:
    """theta -> exact 1-D SWD(data, Q_theta) on a grid fixed for the whole box."""

    def __init__(self, data: DiscreteMeasure, family: ModelFamily, space: ThetaSpace, sigma: float,
                 quad_tol: float = 1e-8):
        self.family = family
        corners = [family.model(c) for c in space.corners()]
        self.grid = SmoothedCdfGrid.covering([data, *corners], sigma, quad_tol)
        self.data_cdf = self.grid.cdf_matrix(data.points[:, 0]) @ data.weights

    def __call__(self, theta) -> float:
        model = self.family.model(theta)
        return float(self.grid.l1(self.data_cdf - self.grid.source_cdf(model)))

    def estimate(self, value: float) -> SwdEstimate:
        return SwdEstimate(value=value)


class CrnObjective:
    """theta -> plug-in SWD with every random draw frozen at construction.

    The data side is one smoothed sample of size m from P_n; the model side
    reuses the same base normals, mixture uniforms and smoothing noise at
    every theta, so the objective is a deterministic function of theta.
    """

    def __init__(self, data: DiscreteMeasure, family: ModelFamily, sigma: float, m: int, rng: RngStream,
                 solver: str = "exact", epsilon: float = 0.01):
        self.family = family
        self.m = int(m)
        self.solver = solver
        self.epsilon = epsilon
        self.target = smoothed_draw(data, sigma, self.m, rng.child("data"))
        self.z, self.u = draw_base(self.m, family.dim, rng.child("model"))
        self.noise = sigma * rng.child("noise").generator().standard_normal((self.m, family.dim))

    def __call__(self, theta) -> float:
        x = self.family.model(theta).transform(self.z, self.u) + self.noise
        return w1_equal_weight(x, self.target, self.solver, self.epsilon)

    def estimate(self, value: float) -> SwdEstimate:
        method = "mc_exact_ot" if self.solver == "exact" else "mc_sinkhorn"
        return SwdEstimate(value=value, std_error=0.0, method=method, m=self.m, replications=1)


def build_objective(data, family, space, sigma, config: ObjectiveConfig, rng: RngStream):
    method = config.method
    if method == "auto":
        method = "exact1d" if data.dim == 1 else "mc"
    if method == "exact1d":
        if data.dim != 1:
            raise DimensionError("exact objective needs d = 1")
        return Exact1dObjective(data, family, space, sigma, config.quad_tol)
    return CrnObjective(data, family, sigma, config.m, rng.child("crn"), config.solver, config.epsilon)


def _initial_simplex(center, step):
    d0 = center.shape[0]
    sim = np.repeat(center[None, :], d0 + 1, axis=0)
    for i in range(d0):
        sim[i + 1, i] += step if center[i] + step <= 1.0 else -step
    return sim


def _diameter(simplex):
    diffs = simplex[:, None, :] - simplex[None, :, :]
    return float(np.sqrt((diffs ** 2).sum(axis=-1)).max())


def fit_mswe(data: DiscreteMeasure, family, space: ThetaSpace, sigma: float,
             objective: ObjectiveConfig | None = None, optimizer: OptimizerConfig | None = None,
             rng: RngStream | int | None = None) -> MsweResult:
    """Minimize SWD(data, Q_theta) over ``space`` with projected Nelder-Mead.

    The search runs in unit-box coordinates.  Start 0 is the box centroid
    (or ``optimizer.start``); each restart begins at a uniform random point
    of the box.  The best vertex over all starts is returned, ties going to
    the first one found.
    """
    family = as_family(family)
    sigma = _check_sigma(sigma)
    objective = objective or ObjectiveConfig()
    optimizer = optimizer or OptimizerConfig()
    root = as_stream(rng)
    if data.dim != family.dim:
        raise DimensionError(f"data has d = {data.dim}, family has d = {family.dim}")
    if space.d0 != family.n_params:
        raise DimensionError(f"box has {space.d0} axes, family has {family.n_params} parameters")

    func = build_objective(data, family, space, sigma, objective, root)
    d0 = space.d0
    trace = [] if optimizer.record_trace else None
    state = {"evals": 0, "best_f": math.inf, "best_theta": None, "best_start": -1}

    def wrapped(u, start):
        theta = space.from_unit(np.clip(u, 0.0, 1.0))
        value = func(theta)
        if not math.isfinite(value):
            raise FitError(f"objective is not finite at theta={theta.tolist()}", theta=theta)
        state["evals"] += 1
        if trace is not None:
            trace.append((theta.copy(), value))
        if value < state["best_f"]:
            state.update(best_f=value, best_theta=theta.copy(), best_start=start)
        return value

    if optimizer.start is not None:
        first = np.clip(space.to_unit(np.asarray(optimizer.start, dtype=float)), 0.0, 1.0)
    else:
        first = np.full(d0, 0.5)
    starts = [first] + [
        root.child("restart", r).generator().random(d0) for r in range(1, optimizer.restarts + 1)
    ]
    xatol = optimizer.xtol / (2.0 * math.sqrt(d0))
    converged_by_start = []
    for s, x0 in enumerate(starts):
        res = minimize(
            wrapped,
            x0,
            args=(s,),
            method="Nelder-Mead",
            bounds=Bounds(np.zeros(d0), np.ones(d0)),
            options={
                "initial_simplex": _initial_simplex(x0, optimizer.step),
                "xatol": xatol,
                "fatol": np.inf,
                "maxfev": int(optimizer.max_evals),
                "adaptive": False,
            },
        )
        converged_by_start.append(
            _diameter(res.final_simplex[0]) < optimizer.xtol and res.nfev < optimizer.max_evals
        )

    theta_hat = space.clip(state["best_theta"])
    return MsweResult(
        theta_hat=theta_hat,
        objective=func.estimate(max(state["best_f"], 0.0)),
        evaluations=state["evals"],
        converged=bool(converged_by_start[state["best_start"]]),
        trace=trace,
    )


@dataclass(frozen=True)
class Replicate:
    trial: int
    theta_hat: Optional[np.ndarray]
    scaled_error: Optional[np.ndarray]
    objective: Optional[float] = None
    converged: bool = False
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def mswe_replicates(true_model: ParametricModel, family, space: ThetaSpace, sigma: float, n: int, trials: int,
                    objective: ObjectiveConfig | None = None, optimizer: OptimizerConfig | None = None,
                    rng: RngStream | int | None = None, threads: int = 1,
                    min_success: float = 0.9) -> list[Replicate]:
    """Independent fits on fresh size-n datasets drawn from ``true_model``.

    Trial t draws its data from ``rng.child("trial", t).child("data")``.
    Estimates are canonicalized (mixture components sorted by mean) before
    the scaled error sqrt(n) * (theta_hat - theta_star) is formed.  A failed
    fit is recorded on its row; fewer than ``min_success`` successes raise.
    """
    family = as_family(family)
    if int(trials) < 1:
        raise PreconditionError("trials must be at least 1")
    if int(n) < 1:
        raise PreconditionError("n must be at least 1")
    theta_star = family.canonical(family.theta_of(true_model))
    if not space.contains(theta_star, strict=True):
        raise PreconditionError(f"true parameter {theta_star.tolist()} is not interior to the box")
    root = as_stream(rng)
    root_n = math.sqrt(n)

    def one(t):
        stream = root.child("trial", t)
        try:
            data = sample_model(true_model, int(n), stream.child("data"))
            res = fit_mswe(data, family, space, sigma, objective, optimizer, stream.child("fit"))
        except SwdError as exc:
            log.warning("trial %d failed: %s", t, exc)
            return Replicate(t, None, None, error=str(exc))
        est = family.canonical(res.theta_hat)
        return Replicate(t, est, root_n * (est - theta_star), res.objective.value, res.converged)

    rows = parallel_map(one, range(int(trials)), threads)
    good = sum(r.ok for r in rows)
    if good < min_success * len(rows):
        raise FitError(f"only {good} of {len(rows)} fits succeeded")
    return rows
