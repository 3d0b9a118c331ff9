"""Bootstrap limit laws, two-sample testing and concentration bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, ParameterError, PreconditionError
from .measures import DiscreteMeasure, ParametricModel, Source, _check_sigma, resample_bootstrap, sample_model
from .rng import RngStream, as_stream, parallel_map
from .swd import EstimatorConfig, SmoothedCdfGrid, integration_domain

_BATCH = 256


@dataclass(frozen=True)
class BootstrapResult:
    """Bootstrap draws of sqrt(n) * SWD(P_n^B, P_n)."""

    stats: np.ndarray
    B: int
    n: int
    sigma: float

    def __post_init__(self):
        stats = np.asarray(self.stats, dtype=float)
        if stats.shape != (self.B,):
            raise ParameterError("stats length must equal B")
        if np.any(stats < 0):
            raise ParameterError("bootstrap statistics must be nonnegative")

    def quantile(self, alpha: float) -> float:
        return bootstrap_quantile(self, alpha)


def bootstrap_quantile(result, alpha: float) -> float:
    """Smallest t with empirical P(stat <= t) >= 1 - alpha.

    This is the ceil((1 - alpha) * B)-th order statistic.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha!r}")
    stats = np.sort(np.asarray(result.stats if isinstance(result, BootstrapResult) else result, dtype=float))
    if stats.size == 0:
        raise PreconditionError("no bootstrap statistics")
    # the small offset keeps e.g. (1 - 0.1) * 100 from rounding up to 91
    k = max(1, math.ceil((1.0 - alpha) * stats.size - 1e-9))
    return float(stats[k - 1])


def _uniform_1d(mu: DiscreteMeasure, name: str):
    if not mu.is_uniform:
        raise PreconditionError(f"{name} must have equal weights")


def _batched_l1(grid: SmoothedCdfGrid, phi: np.ndarray, weight_rows: np.ndarray, offset=None) -> np.ndarray:
    """L1 norms of (phi @ w_b - offset) for every weight row, in fixed-size batches."""
    out = np.empty(weight_rows.shape[0])
    for s in range(0, weight_rows.shape[0], _BATCH):
        diff = weight_rows[s : s + _BATCH] @ phi.T
        if offset is not None:
            diff = diff - offset
        out[s : s + _BATCH] = grid.l1(diff)
    return out


def bootstrap_swd(data: DiscreteMeasure, sigma: float, B: int, estimator: EstimatorConfig | None = None,
                  rng: RngStream | int | None = None, threads: int = 1) -> BootstrapResult:
    """Empirical bootstrap of sqrt(n) * SWD(P_n^B, P_n).

    Replicate b resamples with ``rng.child("bootstrap", b)``.  In one
    dimension the exact distance is evaluated for all replicates at once
    on a shared quadrature grid.
    """
    sigma = _check_sigma(sigma)
    estimator = estimator or EstimatorConfig()
    if int(B) < 10:
        raise PreconditionError("need at least B = 10 bootstrap replicates")
    _uniform_1d(data, "bootstrap data")
    if data.n_distinct() < 2:
        raise PreconditionError("bootstrap needs at least two distinct points (data is a point mass)")
    B, n = int(B), data.n
    root = as_stream(rng)
    method = estimator.resolve(data.dim)

    if method == "exact1d":
        grid = SmoothedCdfGrid.covering([data], sigma, estimator.quad_tol)
        phi = grid.cdf_matrix(data.points[:, 0])
        weights = np.empty((B, n))
        for b in range(B):
            idx = root.child("bootstrap", b).generator().integers(0, n, size=n)
            weights[b] = np.bincount(idx, minlength=n) / n - 1.0 / n
        stats = math.sqrt(n) * _batched_l1(grid, phi, weights)
    else:
        def one(b):
            stream = root.child("bootstrap", b)
            resampled = resample_bootstrap(data, stream)
            est = estimator.estimate(resampled, data, sigma, rng=stream.child("mc"))
            return math.sqrt(n) * est.value

        stats = np.array(parallel_map(one, range(B), threads))
    return BootstrapResult(stats=stats, B=B, n=n, sigma=sigma)


# ---------------------------------------------------------------- two-sample


def two_sample_stat(X: DiscreteMeasure, Y: DiscreteMeasure, sigma: float,
                    estimator: EstimatorConfig | None = None, rng=None) -> float:
    """sqrt(n m / (n + m)) * SWD(P_n, Q_m)."""
    if X.dim != Y.dim:
        raise DimensionError(f"samples live in different dimensions ({X.dim} vs {Y.dim})")
    estimator = estimator or EstimatorConfig()
    pref = math.sqrt(X.n * Y.n / (X.n + Y.n))
    return pref * estimator.estimate(X, Y, sigma, rng=rng).value


@dataclass(frozen=True)
class TwoSampleResult:
    statistic: float
    q_hat: float
    reject: bool
    stats: np.ndarray

    def to_dict(self):
        return {"statistic": self.statistic, "q_hat": self.q_hat, "reject": self.reject, "B": int(self.stats.size)}


def two_sample_test(X: DiscreteMeasure, Y: DiscreteMeasure, sigma: float, B: int = 200, alpha: float = 0.05,
                    estimator: EstimatorConfig | None = None, rng: RngStream | int | None = None,
                    threads: int = 1) -> TwoSampleResult:
    """Smoothed two-sample test with pooled-bootstrap critical value.

    Both groups are resampled from the pooled sample; the null is rejected
    when the observed statistic exceeds the (1 - alpha) bootstrap quantile.
    """
    if X.dim != Y.dim:
        raise DimensionError(f"samples live in different dimensions ({X.dim} vs {Y.dim})")
    sigma = _check_sigma(sigma)
    if int(B) < 50:
        raise PreconditionError("need at least B = 50 bootstrap replicates")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    _uniform_1d(X, "X")
    _uniform_1d(Y, "Y")
    estimator = estimator or EstimatorConfig()
    root = as_stream(rng)
    B, n, m = int(B), X.n, Y.n
    N = n + m
    pooled = np.concatenate([X.points, Y.points])
    pref = math.sqrt(n * m / N)
    draws = []
    for b in range(B):
        gen = root.child("twosample", b).generator()
        draws.append((gen.integers(0, N, size=n), gen.integers(0, N, size=m)))

    if estimator.resolve(X.dim) == "exact1d":
        grid = SmoothedCdfGrid.covering([DiscreteMeasure(pooled)], sigma, estimator.quad_tol)
        phi = grid.cdf_matrix(pooled[:, 0])
        observed = np.concatenate([np.full(n, 1.0 / n), np.full(m, -1.0 / m)])
        weights = np.empty((B, N))
        for b, (ix, iy) in enumerate(draws):
            weights[b] = np.bincount(ix, minlength=N) / n - np.bincount(iy, minlength=N) / m
        statistic = pref * float(_batched_l1(grid, phi, observed[None, :])[0])
        stats = pref * _batched_l1(grid, phi, weights)
    else:
        statistic = two_sample_stat(X, Y, sigma, estimator, rng=root.child("observed"))

        def one(b):
            ix, iy = draws[b]
            return two_sample_stat(DiscreteMeasure(pooled[ix]), DiscreteMeasure(pooled[iy]), sigma,
                                   estimator, rng=root.child("twosample-mc", b))

        stats = np.array(parallel_map(one, range(B), threads))
    q_hat = bootstrap_quantile(stats, alpha)
    return TwoSampleResult(statistic, q_hat, bool(statistic > q_hat), stats)


# ---------------------------------------------------------------- concentration

KINDS = ("compact", "psi_alpha", "poly")


@dataclass(frozen=True)
class ConcentrationBound:
    """Inputs of the deviation bounds for SWD(P_n, P) around its mean.

    ``compact`` needs ``diam``.  ``psi_alpha`` needs ``alpha`` in (0, 1],
    ``psi_norm`` (a proxy for the psi_alpha norm of max_i |X_i|),
    ``second_moment`` (P|x|^2), ``sigma``, ``d``, ``eta`` and ``C``.
    ``poly`` needs ``q`` >= 1, ``max_moment`` (a proxy for
    E max_i |X_i|^q), ``second_moment``, ``sigma``, ``d``, ``eta`` and ``C``.
    The constant C is not known in closed form and must be supplied; the
    two heavier-tailed bounds hold only up to that constant.
    """

    kind: str
    diam: Optional[float] = None
    alpha: Optional[float] = None
    psi_norm: Optional[float] = None
    second_moment: Optional[float] = None
    q: Optional[float] = None
    max_moment: Optional[float] = None
    eta: Optional[float] = None
    C: Optional[float] = None
    sigma: Optional[float] = None
    d: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "compact":
            _require_positive(self, "diam")
            return
        for name in ("second_moment", "sigma", "eta"):
            _require_positive(self, name)
        if self.d < 1:
            raise ParameterError("d must be at least 1")
        if self.kind == "psi_alpha":
            _require_positive(self, "psi_norm")
            if self.alpha is None or not 0 < self.alpha <= 1:
                raise ParameterError("alpha must lie in (0, 1]")
        else:
            _require_positive(self, "max_moment")
            if self.q is None or not self.q >= 1:
                raise ParameterError("q must be at least 1")
        if self.C is not None and not self.C > 0:
            raise ParameterError("C must be positive")


def _require_positive(obj, name):
    value = getattr(obj, name)
    if value is None or not (value > 0 and math.isfinite(value)):
        raise ParameterError(f"{name} must be a positive number for kind {obj.kind!r}")


def _power(base: float, n: int) -> float:
    # left-to-right squaring: the last step for 2n squares the value for n,
    # so _power(b, 2n) == _power(b, n) ** 2 holds bit for bit
    result = 1.0
    for bit in bin(n)[2:]:
        result *= result
        if bit == "1":
            result *= base
    return result


def concentration_eval(bound: ConcentrationBound, n: int, t: float) -> float:
    """Upper bound on P(SWD(P_n, P) >= (1 + eta) E SWD + t), capped at 1.

    For ``compact`` the slack eta is zero and the bound is
    exp(-n t^2 / diam^2).
    """
    if int(n) < 1:
        raise ParameterError("n must be at least 1")
    if not t > 0:
        raise ParameterError("t must be positive")
    n = int(n)
    if bound.kind == "compact":
        return min(1.0, _power(math.exp(-(t * t) / (bound.diam ** 2)), n))
    if bound.C is None:
        raise ParameterError(f"kind {bound.kind!r} requires the constant C")
    C, s, d = bound.C, bound.sigma, bound.d
    gauss = math.exp(-n * t * t / (C * (bound.second_moment + s * s * d)))
    if bound.kind == "psi_alpha":
        tail = 3.0 * math.exp(-((n * t / (C * (bound.psi_norm + s * math.sqrt(d)))) ** bound.alpha))
    else:
        q = bound.q
        tail = C * (bound.max_moment + s ** q * d ** (q / 2)) / (n ** q * t ** q)
    return min(1.0, gauss + tail)


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion: (center, half_width)."""
    if trials < 1:
        raise ParameterError("trials must be positive")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return center, half


@dataclass(frozen=True)
class ConcentrationResult:
    t: np.ndarray
    frequency: np.ndarray
    half_width: np.ndarray
    mean: float
    values: np.ndarray


def concentration_empirical(P: Source, sigma: float, n: int, trials: int, t_grid: Sequence[float],
                            rng: RngStream | int | None = None, estimator: EstimatorConfig | None = None,
                            z: float = 1.96, threads: int = 1) -> ConcentrationResult:
    """Monte-Carlo frequencies of SWD(P_n, P) >= mean + t with Wilson half-widths.

    The mean is the average over the same trials.
    """
    sigma = _check_sigma(sigma)
    if int(trials) < 100:
        raise PreconditionError("need at least 100 trials")
    if not isinstance(P, ParametricModel):
        raise PreconditionError("P must be a sampleable model")
    estimator = estimator or EstimatorConfig()
    root = as_stream(rng)
    trials, n = int(trials), int(n)
    samples = [sample_model(P, n, root.child("trial", k)) for k in range(trials)]

    if estimator.resolve(P.dim) == "exact1d":
        lo, hi = integration_domain([P], sigma)
        pts = np.concatenate([s.points[:, 0] for s in samples])
        lo = min(lo, float(pts.min()) - 7 * sigma)
        hi = max(hi, float(pts.max()) + 7 * sigma)
        grid = SmoothedCdfGrid(lo, hi, sigma, estimator.quad_tol)
        target = grid.source_cdf(P)
        values = np.empty(trials)
        for k, s in enumerate(samples):
            values[k] = grid.l1(grid.cdf_matrix(s.points[:, 0]) @ s.weights - target)
    else:
        def one(k):
            return estimator.estimate(samples[k], P, sigma, rng=root.child("mc", k)).value

        values = np.array(parallel_map(one, range(trials), threads))

    mean = float(values.mean())
    ts = np.asarray(t_grid, dtype=float)
    freq = np.empty(ts.shape)
    half = np.empty(ts.shape)
    for i, t in enumerate(ts):
        hits = int(np.count_nonzero(values >= mean + t))
        freq[i] = hits / trials
        half[i] = wilson_interval(hits, trials, z)[1]
    return ConcentrationResult(ts, freq, half, mean, values)
