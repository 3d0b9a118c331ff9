"""Desk-scale simulation studies: convergence rates, estimator scatters, KDEs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import gaussian_kde, ks_2samp, linregress

from .errors import CellError, ParameterError, PreconditionError, SwdError
from .measures import DiscreteMeasure, ParametricModel, ThetaSpace, _check_sigma, as_family, sample_model
from .mswe import ObjectiveConfig, OptimizerConfig, mswe_replicates
from .rng import RngStream, as_stream, parallel_map
from .swd import EstimatorConfig

# d >= 2 rate studies compare against a frozen sample this many times max(n)
REFERENCE_FACTOR = 16
KDE_POINTS = 256


@dataclass(frozen=True)
class RateFit:
    """Mean SWD(P_n, P) per n and the least-squares log-log line through it."""

    sigma: float
    ns: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    slope: float
    intercept: float
    slope_se: float
    max_residual: float

    def __post_init__(self):
        ns = np.asarray(self.ns)
        if ns.size < 2 or np.any(np.diff(ns) <= 0):
            raise ParameterError("ns must be strictly increasing with at least two points")
        if np.any(np.asarray(self.means) <= 0):
            raise ParameterError("mean SWD values must be positive for a log-log fit")

    @classmethod
    def from_means(cls, sigma, ns, means, stderrs) -> "RateFit":
        x, y = np.log(np.asarray(ns, dtype=float)), np.log(np.asarray(means, dtype=float))
        fit = linregress(x, y)
        resid = y - (fit.intercept + fit.slope * x)
        return cls(float(sigma), np.asarray(ns), np.asarray(means, dtype=float), np.asarray(stderrs, dtype=float),
                   float(fit.slope), float(fit.intercept), float(fit.stderr), float(np.max(np.abs(resid))))

    def to_dict(self):
        return {
            "sigma": self.sigma,
            "ns": [int(n) for n in self.ns],
            "means": self.means.tolist(),
            "stderrs": self.stderrs.tolist(),
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_se": self.slope_se,
            "max_residual": self.max_residual,
        }


@dataclass
class RateResult:
    fits: list
    # (sigma, n, trial, value) per estimate
    rows: list
    reference_size: int = 0

    def fit_for(self, sigma: float) -> RateFit:
        for f in self.fits:
            if f.sigma == float(sigma):
                return f
        raise KeyError(sigma)


def _check_grid(ns):
    ns = [int(n) for n in ns]
    if len(ns) < 2:
        raise PreconditionError("the n grid needs at least two sizes")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise PreconditionError("the n grid must be strictly increasing")
    if ns[0] < 1 or ns[-1] < 16 * ns[0]:
        raise PreconditionError("the n grid must span at least a factor of 16")
    return ns


def rate_experiment(P: ParametricModel, sigmas: Sequence[float], ns: Sequence[int], trials: int,
                    estimator: EstimatorConfig | None = None, rng: RngStream | int | None = None,
                    threads: int = 1) -> RateResult:
    """Mean SWD(P_n, P) over ``trials`` datasets for every (sigma, n).

    The dataset for (n, trial) comes from ``rng.child("data", n).child("trial", t)``
    and is reused for every sigma, so the sigma comparison is paired.  In
    d >= 2 the population is replaced by a frozen sample of size
    16 * max(n), reported as ``reference_size``.
    """
    ns = _check_grid(ns)
    sigmas = [_check_sigma(s) for s in sigmas]
    if not sigmas:
        raise PreconditionError("need at least one sigma")
    if int(trials) < 20:
        raise PreconditionError("need at least 20 trials per cell")
    trials = int(trials)
    estimator = estimator or EstimatorConfig()
    root = as_stream(rng)
    method = estimator.resolve(P.dim)
    target, ref_size = P, 0
    if method != "exact1d":
        ref_size = REFERENCE_FACTOR * ns[-1]
        target = sample_model(P, ref_size, root.child("reference"))

    cells = [(si, n, t) for si in range(len(sigmas)) for n in ns for t in range(trials)]

    def one(cell):
        si, n, t = cell
        sigma = sigmas[si]
        data = sample_model(P, n, root.child("data", n).child("trial", t))
        try:
            est = estimator.estimate(data, target, sigma, rng=root.child("mc", si).child("n", n).child("trial", t))
        except SwdError as exc:
            raise CellError(f"cell sigma={sigma}, n={n}, trial={t}: {exc}", cell=(sigma, n, t)) from exc
        return est.value

    values = parallel_map(one, cells, threads)
    rows = [(sigmas[si], n, t, v) for (si, n, t), v in zip(cells, values)]
    table = np.asarray(values).reshape(len(sigmas), len(ns), trials)
    fits = [
        RateFit.from_means(s, ns, table[i].mean(axis=1), table[i].std(axis=1, ddof=1) / math.sqrt(trials))
        for i, s in enumerate(sigmas)
    ]
    return RateResult(fits, rows, ref_size)


@dataclass
class ScatterSet:
    """Scaled estimation errors sqrt(n) * (theta_hat - theta_star) per cell.

    ``rows`` holds (sigma, n, trial, component, estimate, scaled_error).
    Trials whose fit failed contribute no rows and are counted in
    ``failures`` per (sigma, n).
    """

    rows: list
    trials: int
    failures: dict = field(default_factory=dict)

    def cloud(self, sigma: float, n: int, component: int) -> np.ndarray:
        return np.array([r[5] for r in self.rows if r[0] == sigma and r[1] == n and r[3] == component])

    def estimates(self, sigma: float, n: int, component: int) -> np.ndarray:
        return np.array([r[4] for r in self.rows if r[0] == sigma and r[1] == n and r[3] == component])

    def cell_counts(self) -> dict:
        counts: dict = {}
        for r in self.rows:
            if r[3] == 0:
                counts[(r[0], r[1])] = counts.get((r[0], r[1]), 0) + 1
        return counts


def limit_scatter(true_model: ParametricModel, family, space: ThetaSpace, sigmas: Sequence[float],
                  ns: Sequence[int], trials: int, objective: ObjectiveConfig | None = None,
                  optimizer: OptimizerConfig | None = None, rng: RngStream | int | None = None,
                  threads: int = 1) -> ScatterSet:
    """MSWE replicate clouds for every (sigma, n) cell.

    Cell (i, n) uses the sub-stream ``rng.child("sigma", i).child("n", n)``.
    """
    family = as_family(family)
    root = as_stream(rng)
    rows, failures = [], {}
    for i, sigma in enumerate(sigmas):
        sigma = _check_sigma(sigma)
        for n in ns:
            reps = mswe_replicates(true_model, family, space, sigma, int(n), int(trials), objective, optimizer,
                                   root.child("sigma", i).child("n", int(n)), threads)
            failures[(sigma, int(n))] = sum(not r.ok for r in reps)
            for r in reps:
                if not r.ok:
                    continue
                for c in range(family.n_params):
                    rows.append((sigma, int(n), r.trial, c, float(r.theta_hat[c]), float(r.scaled_error[c])))
    return ScatterSet(rows, int(trials), failures)


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov sup-distance."""
    return float(ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float)).statistic)


@dataclass(frozen=True)
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def mass(self) -> float:
        return float(np.trapezoid(self.density, self.grid))


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float).reshape(-1)
    return 1.06 * float(np.std(x, ddof=1)) * x.size ** (-0.2)


def kde(samples, bandwidth: float | None = None) -> KdeCurve:
    """Gaussian KDE on a 256-point grid spanning the samples plus 3 bandwidths."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size < 5:
        raise PreconditionError("KDE needs at least 5 samples")
    if not np.all(np.isfinite(x)):
        raise ParameterError("samples must be finite")
    sd = float(np.std(x, ddof=1))
    if sd == 0:
        raise ParameterError("samples have zero variance")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ParameterError("bandwidth must be positive")
    # gaussian_kde scales its factor by the sample standard deviation
    est = gaussian_kde(x, bw_method=h / sd)
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, KDE_POINTS)
    return KdeCurve(grid, est(grid), h)
