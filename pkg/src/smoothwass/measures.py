"""Measures on R^d: weighted point clouds and sampleable parametric families.

Every parametric model draws samples as a deterministic transform of a
block of base randomness (standard normals plus one uniform per row).
That is what lets the estimators freeze the base draws once and revisit
the same noise pattern at different parameter values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DimensionError, ParameterError, PreconditionError
from .rng import RngStream

# |z| beyond which Phi(-z) < 1e-10
TAIL_Z = float(-ndtri(1e-10))
_CHUNK = 1 << 21
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def norm_cdf(x):
    """Standard normal CDF (Cephes ``ndtr``, erfc-based in the tails)."""
    return ndtr(x)


def _check_sigma(sigma) -> float:
    sigma = float(sigma)
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise ParameterError(f"sigma must be a positive finite number, got {sigma!r}")
    return sigma


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _interval_prob(lo, hi, loc, scale):
    """P(lo <= loc + scale*Z < hi), accurate in both tails."""
    a = (np.asarray(lo, dtype=float) - loc) / scale
    b = (np.asarray(hi, dtype=float) - loc) / scale
    upper = a > 0
    return np.where(upper, ndtr(-a) - ndtr(-b), ndtr(b) - ndtr(a))


# ---------------------------------------------------------------- discrete


class DiscreteMeasure:
    """Weighted point cloud in R^d.

    Parameters
    ----------
    points : array-like, shape (n, d) or (n,)
        Support points; a 1-D array is read as n points in R^1.
    weights : array-like, shape (n,), optional
        Nonnegative masses summing to one. Uniform when omitted.
    """

    __slots__ = ("_points", "_weights", "_uniform")

    def __init__(self, points, weights=None):
        x = np.array(points, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ParameterError("points must be a non-empty (n, d) array")
        if not np.all(np.isfinite(x)):
            raise ParameterError("points must be finite")
        n = x.shape[0]
        if weights is None:
            w = np.full(n, 1.0 / n)
            uniform = True
        else:
            w = np.array(weights, dtype=float).reshape(-1)
            if w.shape[0] != n:
                raise ParameterError(f"expected {n} weights, got {w.shape[0]}")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise ParameterError("weights must be finite and nonnegative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ParameterError(f"weights sum to {w.sum()!r}, not 1")
            uniform = bool(np.all(np.abs(w - 1.0 / n) <= 1e-12))
        self._points = _readonly(x)
        self._weights = _readonly(w)
        self._uniform = uniform

    @classmethod
    def point_mass(cls, x) -> "DiscreteMeasure":
        return cls(np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1))

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def n(self) -> int:
        return self._points.shape[0]

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    @property
    def is_uniform(self) -> bool:
        return self._uniform

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"DiscreteMeasure(n={self.n}, d={self.dim}, uniform={self._uniform})"

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return np.array_equal(self._points, other._points) and np.array_equal(
            self._weights, other._weights
        )

    __hash__ = None

    def shift(self, a) -> "DiscreteMeasure":
        return DiscreteMeasure(self._points + np.asarray(a, dtype=float), self._weights)

    def n_distinct(self) -> int:
        return np.unique(self._points, axis=0).shape[0]

    def smoothed_cdf(self, sigma, x):
        """CDF of this measure convolved with N(0, sigma^2) (d = 1 only)."""
        if self.dim != 1:
            raise DimensionError(f"smoothed CDF needs d = 1, measure has d = {self.dim}")
        sigma = _check_sigma(sigma)
        xs = np.asarray(x, dtype=float)
        flat = xs.reshape(-1)
        pts = self._points[:, 0]
        out = np.empty(flat.shape[0])
        step = max(1, _CHUNK // pts.shape[0])
        for s in range(0, flat.shape[0], step):
            block = (flat[s : s + step, None] - pts[None, :]) / sigma
            out[s : s + step] = ndtr(block) @ self._weights
        out = np.clip(out, 0.0, 1.0)
        return out.reshape(xs.shape) if xs.ndim else float(out[0])

    def support_interval(self, sigma, tail=1e-10):
        sigma = _check_sigma(sigma)
        z = float(-ndtri(tail))
        pts = self._points[:, 0]
        return float(pts.min() - z * sigma), float(pts.max() + z * sigma)


# ---------------------------------------------------------------- models


class ParametricModel:
    """Common interface of the sampleable model families.

    Subclasses store validated parameters and implement ``flatten``,
    ``with_theta``, ``transform`` and the 1-D smoothed CDF.
    """

    dim: int

    def flatten(self) -> np.ndarray:
        raise NotImplementedError

    def with_theta(self, theta) -> "ParametricModel":
        raise NotImplementedError

    @property
    def n_params(self) -> int:
        return self.flatten().shape[0]

    def param_groups(self) -> dict[str, list[int]]:
        raise NotImplementedError

    def transform(self, z: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Map base draws ``z`` ~ N(0, I_d) of shape (n, d) and ``u`` ~ U(0, 1)
        of shape (n,) to n model samples."""
        raise NotImplementedError

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        z, u = draw_base(n, self.dim, rng)
        return self.transform(z, u)

    def smoothed_cdf(self, sigma, x):
        raise NotImplementedError

    def support_interval(self, sigma, tail=1e-10):
        raise NotImplementedError

    def interval_probs(self, edges):
        """Per-axis interval masses for the lattice cells given by ``edges``.

        Returns ``(weights, probs)`` with probs of shape
        (components, d, len(edges) - 1); the cell mass of a product cell is
        ``sum_c weights[c] * prod_i probs[c, i, k_i]``.
        """
        raise NotImplementedError

    def _need_1d(self):
        if self.dim != 1:
            raise DimensionError(f"smoothed CDF needs d = 1, model has d = {self.dim}")

    def __eq__(self, other):
        return type(self) is type(other) and np.array_equal(self.flatten(), other.flatten())

    __hash__ = None


def draw_base(n: int, d: int, rng: RngStream):
    """Base randomness shared by all model families."""
    gen = rng.generator()
    z = gen.standard_normal((n, d))
    u = gen.random(n)
    return z, u


def _vector(x, name) -> np.ndarray:
    v = np.atleast_1d(np.array(x, dtype=float))
    if v.ndim != 1 or v.shape[0] < 1 or not np.all(np.isfinite(v)):
        raise ParameterError(f"{name} must be a finite, non-empty vector")
    return _readonly(v)


def _positive(x, name) -> float:
    x = float(x)
    if not (x > 0 and math.isfinite(x)):
        raise ParameterError(f"{name} must be positive, got {x!r}")
    return x


class Gaussian(ParametricModel):
    """Isotropic Gaussian N(mean, scale^2 I_d)."""

    def __init__(self, mean, scale):
        self.mean = _vector(mean, "mean")
        self.scale = _positive(scale, "scale")
        self.dim = self.mean.shape[0]

    def __repr__(self):
        return f"Gaussian(mean={self.mean.tolist()}, scale={self.scale})"

    def flatten(self):
        return np.concatenate([self.mean, [self.scale]])

    def with_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim + 1,):
            raise ParameterError(f"Gaussian in d={self.dim} takes {self.dim + 1} parameters")
        return Gaussian(theta[:-1], theta[-1])

    def param_groups(self):
        return {"mean": list(range(self.dim)), "scale": [self.dim]}

    def transform(self, z, u):
        return self.mean + self.scale * z

    def smoothed_cdf(self, sigma, x):
        self._need_1d()
        sigma = _check_sigma(sigma)
        return ndtr((np.asarray(x, dtype=float) - self.mean[0]) / math.hypot(self.scale, sigma))

    def support_interval(self, sigma, tail=1e-10):
        self._need_1d()
        half = float(-ndtri(tail)) * math.hypot(self.scale, _check_sigma(sigma))
        return float(self.mean[0] - half), float(self.mean[0] + half)

    def interval_probs(self, edges):
        edges = np.asarray(edges, dtype=float)
        p = np.stack([_interval_prob(edges[:-1], edges[1:], m, self.scale) for m in self.mean])
        return np.ones(1), p[None]


class DiagGaussian(ParametricModel):
    """Gaussian with diagonal covariance diag(scales^2)."""

    def __init__(self, mean, scales):
        self.mean = _vector(mean, "mean")
        self.scales = _vector(scales, "scales")
        if self.scales.shape != self.mean.shape:
            raise ParameterError("mean and scales must have the same length")
        if np.any(self.scales <= 0):
            raise ParameterError("scales must be positive")
        self.dim = self.mean.shape[0]

    def __repr__(self):
        return f"DiagGaussian(mean={self.mean.tolist()}, scales={self.scales.tolist()})"

    def flatten(self):
        return np.concatenate([self.mean, self.scales])

    def with_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (2 * self.dim,):
            raise ParameterError(f"DiagGaussian in d={self.dim} takes {2 * self.dim} parameters")
        return DiagGaussian(theta[: self.dim], theta[self.dim :])

    def param_groups(self):
        d = self.dim
        return {"mean": list(range(d)), "scales": list(range(d, 2 * d))}

    def transform(self, z, u):
        return self.mean + self.scales * z

    def smoothed_cdf(self, sigma, x):
        self._need_1d()
        sigma = _check_sigma(sigma)
        s = math.hypot(self.scales[0], sigma)
        return ndtr((np.asarray(x, dtype=float) - self.mean[0]) / s)

    def support_interval(self, sigma, tail=1e-10):
        self._need_1d()
        half = float(-ndtri(tail)) * math.hypot(self.scales[0], _check_sigma(sigma))
        return float(self.mean[0] - half), float(self.mean[0] + half)

    def interval_probs(self, edges):
        edges = np.asarray(edges, dtype=float)
        p = np.stack(
            [_interval_prob(edges[:-1], edges[1:], m, s) for m, s in zip(self.mean, self.scales)]
        )
        return np.ones(1), p[None]


@dataclass(frozen=True)
class _Component:
    weight: float
    mean: np.ndarray
    scale: float


class GaussianMixture(ParametricModel):
    """Finite mixture of isotropic Gaussians.

    Parameters
    ----------
    components : sequence of (weight, mean, scale)
        ``mean`` may be a scalar for d = 1.
    """

    def __init__(self, components):
        comps = []
        for item in components:
            try:
                w, m, s = item
            except (TypeError, ValueError):
                raise ParameterError("mixture components are (weight, mean, scale) triples")
            w = float(w)
            if not (w >= 0 and math.isfinite(w)):
                raise ParameterError("mixture weights must be nonnegative")
            comps.append(_Component(w, _vector(m, "mean"), _positive(s, "scale")))
        if not comps:
            raise ParameterError("mixture needs at least one component")
        dims = {c.mean.shape[0] for c in comps}
        if len(dims) != 1:
            raise ParameterError("mixture components must share a dimension")
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"mixture weights sum to {total!r}, not 1")
        self.components = tuple(comps)
        self.dim = dims.pop()
        self._weights = np.array([c.weight for c in comps])
        self._cum = np.cumsum(self._weights)

    def __repr__(self):
        parts = ", ".join(f"({c.weight}, {c.mean.tolist()}, {c.scale})" for c in self.components)
        return f"GaussianMixture([{parts}])"

    @property
    def weights(self):
        return self._weights.copy()

    def flatten(self):
        return np.concatenate([np.concatenate([[c.weight], c.mean, [c.scale]]) for c in self.components])

    def with_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        k, d = len(self.components), self.dim
        if theta.shape != (k * (d + 2),):
            raise ParameterError(f"mixture takes {k * (d + 2)} parameters")
        blocks = theta.reshape(k, d + 2)
        return GaussianMixture([(b[0], b[1:-1], b[-1]) for b in blocks])

    def param_groups(self):
        k, d = len(self.components), self.dim
        stride = d + 2
        return {
            "weights": [i * stride for i in range(k)],
            "means": [i * stride + 1 + j for i in range(k) for j in range(d)],
            "scales": [i * stride + d + 1 for i in range(k)],
        }

    def sorted_by_mean(self) -> "GaussianMixture":
        order = sorted(range(len(self.components)), key=lambda i: tuple(self.components[i].mean))
        return GaussianMixture(
            [(self.components[i].weight, self.components[i].mean, self.components[i].scale) for i in order]
        )

    def transform(self, z, u):
        # the last cumulative weight may round below 1
        label = np.minimum(np.searchsorted(self._cum, u, side="right"), len(self.components) - 1)
        means = np.stack([c.mean for c in self.components])
        scales = np.array([c.scale for c in self.components])
        return means[label] + scales[label, None] * z

    def smoothed_cdf(self, sigma, x):
        self._need_1d()
        sigma = _check_sigma(sigma)
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for c in self.components:
            out = out + c.weight * ndtr((x - c.mean[0]) / math.hypot(c.scale, sigma))
        return np.clip(out, 0.0, 1.0)

    def support_interval(self, sigma, tail=1e-10):
        self._need_1d()
        z = float(-ndtri(tail))
        sigma = _check_sigma(sigma)
        lo = min(c.mean[0] - z * math.hypot(c.scale, sigma) for c in self.components)
        hi = max(c.mean[0] + z * math.hypot(c.scale, sigma) for c in self.components)
        return float(lo), float(hi)

    def interval_probs(self, edges):
        edges = np.asarray(edges, dtype=float)
        p = np.stack(
            [
                np.stack([_interval_prob(edges[:-1], edges[1:], m, c.scale) for m in c.mean])
                for c in self.components
            ]
        )
        return self._weights.copy(), p


class Uniform(ParametricModel):
    """Uniform distribution on the box [low, high]."""

    def __init__(self, low, high):
        self.low = _vector(low, "low")
        self.high = _vector(high, "high")
        if self.low.shape != self.high.shape:
            raise ParameterError("low and high must have the same length")
        if np.any(self.high <= self.low):
            raise ParameterError("uniform box needs low < high on every axis")
        self.dim = self.low.shape[0]

    def __repr__(self):
        return f"Uniform(low={self.low.tolist()}, high={self.high.tolist()})"

    def flatten(self):
        return np.concatenate([self.low, self.high])

    def with_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (2 * self.dim,):
            raise ParameterError(f"Uniform in d={self.dim} takes {2 * self.dim} parameters")
        return Uniform(theta[: self.dim], theta[self.dim :])

    def param_groups(self):
        d = self.dim
        return {"low": list(range(d)), "high": list(range(d, 2 * d))}

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.high - self.low))

    def transform(self, z, u):
        return self.low + (self.high - self.low) * ndtr(z)

    def smoothed_cdf(self, sigma, x):
        self._need_1d()
        sigma = _check_sigma(sigma)
        a, b = self.low[0], self.high[0]
        x = np.asarray(x, dtype=float)

        def antideriv(t):
            return t * ndtr(t) + _INV_SQRT_2PI * np.exp(-0.5 * t * t)

        out = sigma / (b - a) * (antideriv((x - a) / sigma) - antideriv((x - b) / sigma))
        return np.clip(out, 0.0, 1.0)

    def support_interval(self, sigma, tail=1e-10):
        self._need_1d()
        z = float(-ndtri(tail)) * _check_sigma(sigma)
        return float(self.low[0] - z), float(self.high[0] + z)

    def interval_probs(self, edges):
        edges = np.asarray(edges, dtype=float)
        lo, hi = edges[:-1], edges[1:]
        rows = []
        for a, b in zip(self.low, self.high):
            overlap = np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
            rows.append(overlap / (b - a))
        return np.ones(1), np.stack(rows)[None]


Source = Union[DiscreteMeasure, ParametricModel]


# ---------------------------------------------------------------- parameter space


@dataclass(frozen=True)
class ThetaSpace:
    """Compact parameter box [lower, upper]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.array(self.lower, dtype=float))
        hi = np.atleast_1d(np.array(self.upper, dtype=float))
        if lo.ndim != 1 or lo.shape != hi.shape or lo.shape[0] < 1:
            raise ParameterError("lower and upper must be vectors of equal, nonzero length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ParameterError("box bounds must be finite")
        if np.any(hi <= lo):
            raise PreconditionError("parameter box is degenerate: need lower < upper on every axis")
        object.__setattr__(self, "lower", _readonly(lo))
        object.__setattr__(self, "upper", _readonly(hi))

    @property
    def d0(self) -> int:
        return self.lower.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def centroid(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, theta, strict=False) -> bool:
        theta = np.asarray(theta, dtype=float)
        if strict:
            return bool(np.all(theta > self.lower) and np.all(theta < self.upper))
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def clip(self, theta) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def to_unit(self, theta) -> np.ndarray:
        return (np.asarray(theta, dtype=float) - self.lower) / self.width

    def from_unit(self, u) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * self.width

    def corners(self, limit=1024):
        """Box vertices (at most ``limit``; larger boxes return their diagonals)."""
        d0 = self.d0
        if 2**d0 > limit:
            return np.stack([self.lower, self.upper])
        bits = (np.arange(2**d0)[:, None] >> np.arange(d0)[None, :]) & 1
        return np.where(bits == 1, self.upper, self.lower)


@dataclass(frozen=True)
class ModelFamily:
    """A parametric family obtained by freeing some entries of a template's theta.

    Parameters
    ----------
    template : ParametricModel
        Supplies the fixed entries and the family structure.
    free : sequence of int, optional
        Indices into ``template.flatten()`` that vary; all when omitted.
    """

    template: ParametricModel
    free: tuple[int, ...] = field(default=())

    def __post_init__(self):
        n_full = self.template.n_params
        free = tuple(range(n_full)) if not self.free else tuple(int(i) for i in self.free)
        if len(set(free)) != len(free) or any(i < 0 or i >= n_full for i in free):
            raise ParameterError(f"free indices must be distinct and in [0, {n_full})")
        if isinstance(self.template, GaussianMixture):
            if set(free) & set(self.template.param_groups()["weights"]):
                raise ParameterError("mixture weights cannot be free parameters")
        object.__setattr__(self, "free", free)

    @classmethod
    def from_names(cls, template: ParametricModel, names: Sequence[str | int]) -> "ModelFamily":
        groups = template.param_groups()
        idx: list[int] = []
        for name in names:
            if isinstance(name, (int, np.integer)) or str(name).isdigit():
                idx.append(int(name))
            elif name in groups:
                idx.extend(groups[name])
            else:
                raise ParameterError(f"unknown parameter group {name!r}; known: {sorted(groups)}")
        return cls(template, tuple(idx))

    @property
    def dim(self) -> int:
        return self.template.dim

    @property
    def n_params(self) -> int:
        return len(self.free)

    def model(self, theta) -> ParametricModel:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.shape[0] != self.n_params:
            raise DimensionError(f"family has {self.n_params} free parameters, got {theta.shape[0]}")
        full = self.template.flatten().copy()
        full[list(self.free)] = theta
        return self.template.with_theta(full)

    def theta_of(self, model: ParametricModel) -> np.ndarray:
        return model.flatten()[list(self.free)]

    def canonical(self, theta) -> np.ndarray:
        """Relabel mixture components by ascending mean; identity otherwise."""
        model = self.model(theta)
        if isinstance(model, GaussianMixture):
            model = model.sorted_by_mean()
        return self.theta_of(model)


def as_family(family) -> ModelFamily:
    if isinstance(family, ModelFamily):
        return family
    if isinstance(family, ParametricModel):
        return ModelFamily(family)
    raise TypeError(f"expected ModelFamily or ParametricModel, got {type(family).__name__}")


# ---------------------------------------------------------------- operations


def sample_model(model: ParametricModel, n: int, rng: RngStream) -> DiscreteMeasure:
    """Draw ``n`` i.i.d. points from ``model`` as an equal-weight measure."""
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        raise ParameterError(f"sample size must be a positive integer, got {n!r}")
    return DiscreteMeasure(model.sample(int(n), rng))


def resample_bootstrap(mu: DiscreteMeasure, rng: RngStream) -> DiscreteMeasure:
    """Draw n points with replacement from an equal-weight measure."""
    if not mu.is_uniform:
        raise PreconditionError("bootstrap resampling needs equal weights 1/n")
    idx = rng.generator().integers(0, mu.n, size=mu.n)
    return DiscreteMeasure(mu.points[idx])


def smoothed_cdf_1d(source: Source, sigma, x):
    """CDF of ``source`` convolved with N(0, sigma^2) at ``x``."""
    if source.dim != 1:
        raise DimensionError(f"smoothed CDF needs d = 1, source has d = {source.dim}")
    _check_sigma(sigma)
    return source.smoothed_cdf(sigma, x)
