"""Gaussian smoothing of measures (by sampling) and of 1-D test functions."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import DimensionError, ParameterError, QuadratureError
from .measures import DiscreteMeasure, ParametricModel, Source, draw_base
from .rng import RngStream

# quadrature window half-width, in units of sigma
WINDOW = 10.0
FD_STEP = 0.01


@dataclass(frozen=True)
class SmoothingConfig:
    sigma: float
    dim: int = 1

    def __post_init__(self):
        sigma = float(self.sigma)
        if not (sigma > 0 and math.isfinite(sigma)):
            raise ParameterError(f"sigma must be positive, got {self.sigma!r}")
        if int(self.dim) < 1:
            raise ParameterError("dim must be at least 1")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "dim", int(self.dim))


def smooth_sample(mu: DiscreteMeasure, cfg: SmoothingConfig, rng: RngStream,
                  size: int | None = None) -> DiscreteMeasure:
    """Sample from ``mu * N(0, sigma^2 I)``: resample points by weight, add noise.

    Parameters
    ----------
    size : int, optional
        Output size; defaults to ``mu.n``.
    """
    if mu.dim != cfg.dim:
        raise DimensionError(f"measure has d = {mu.dim}, smoothing config has d = {cfg.dim}")
    size = mu.n if size is None else int(size)
    if size < 1:
        raise ParameterError("output size must be positive")
    gen = rng.generator()
    idx = gen.choice(mu.n, size=size, p=mu.weights)
    noise = gen.standard_normal((size, mu.dim))
    return DiscreteMeasure(mu.points[idx] + cfg.sigma * noise)


def smoothed_draw(source: Source, sigma: float, m: int, rng: RngStream) -> np.ndarray:
    """``m`` points from ``source * N_sigma`` for either kind of source."""
    if isinstance(source, DiscreteMeasure):
        return smooth_sample(source, SmoothingConfig(sigma, source.dim), rng, size=m).points
    if isinstance(source, ParametricModel):
        z, u = draw_base(m, source.dim, rng.child("model"))
        noise = rng.child("noise").generator().standard_normal((m, source.dim))
        return source.transform(z, u) + sigma * noise
    raise TypeError(f"cannot sample from {type(source).__name__}")


def _gauss_density(r, sigma):
    return math.exp(-0.5 * (r / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def convolve_lipschitz_1d(f: Callable[[float], float], sigma: float, x: float, tol: float = 1e-9,
                          breakpoints: Sequence[float] | None = None) -> float:
    """(f * phi_sigma)(x) by adaptive quadrature over [x - 10 sigma, x + 10 sigma].

    ``breakpoints`` are optional kink locations of ``f`` handed to the
    integrator.  Raises QuadratureError when the error estimate exceeds
    ``tol``.
    """
    sigma = float(sigma)
    if not sigma > 0:
        raise ParameterError("sigma must be positive")
    if not tol > 0:
        raise ParameterError("tol must be positive")
    lo, hi = x - WINDOW * sigma, x + WINDOW * sigma
    pts = sorted({float(p) for p in (breakpoints or ()) if lo < p < hi} | {float(x)})

    def integrand(y):
        return f(y) * _gauss_density(x - y, sigma)

    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, err = quad(integrand, lo, hi, epsabs=tol, epsrel=0.0, limit=500, points=pts)
        except IntegrationWarning as exc:
            raise QuadratureError(f"quadrature did not converge at x={x}: {exc}") from None
    if err > tol:
        raise QuadratureError(f"quadrature error {err:.3g} above tol {tol:.3g}", achieved_error=err)
    return value


def derivative_bound(sigma: float, order: int) -> float:
    """Uniform bound sigma^(1-k) * sqrt((k-1)!) on k-th derivatives of f * phi_sigma."""
    if order < 1:
        raise ParameterError("derivative order must be >= 1")
    return sigma ** (1 - order) * math.sqrt(math.factorial(order - 1))


def check_derivative_bounds(f: Callable[[float], float], sigma: float, order: int, grid,
                            tol: float = 1e-9, breakpoints: Sequence[float] | None = None) -> float:
    """Largest |k-th derivative| of f * phi_sigma over ``grid`` (k in {1, 2}).

    Central differences with step sigma/100 of ``convolve_lipschitz_1d``.
    """
    if order not in (1, 2):
        raise ParameterError("only first and second derivatives are checked")
    h = FD_STEP * sigma

    def conv(x):
        return convolve_lipschitz_1d(f, sigma, x, tol=tol, breakpoints=breakpoints)

    worst = 0.0
    for x in np.asarray(grid, dtype=float).reshape(-1):
        plus, minus = conv(x + h), conv(x - h)
        if order == 1:
            est = (plus - minus) / (2 * h)
        else:
            est = (plus - 2 * conv(x) + minus) / (h * h)
        worst = max(worst, abs(est))
    return worst
