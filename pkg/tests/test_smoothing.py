import math

import numpy as np
import pytest

from smoothwass.errors import DimensionError, ParameterError, QuadratureError
from smoothwass.measures import DiscreteMeasure
from smoothwass.rng import RngStream
from smoothwass.smoothing import (
    SmoothingConfig,
    check_derivative_bounds,
    convolve_lipschitz_1d,
    derivative_bound,
    smooth_sample,
)


class TestConfig:
    @pytest.mark.parametrize("sigma", [0.0, -1.0, math.inf, math.nan])
    def test_sigma_positive(self, sigma):
        with pytest.raises(ParameterError):
            SmoothingConfig(sigma)

    def test_dim(self):
        with pytest.raises(ParameterError):
            SmoothingConfig(1.0, 0)


class TestSmoothSample:
    def test_vanishing_noise(self):
        mu = DiscreteMeasure(np.arange(10.0).reshape(5, 2))
        out = smooth_sample(mu, SmoothingConfig(1e-8, 2), RngStream(1))
        nearest = np.min(np.abs(out.points[:, None, :] - mu.points[None, :, :]).max(axis=2), axis=1)
        assert nearest.max() < 1e-6

    def test_point_mass_covariance(self):
        mu = DiscreteMeasure.point_mass([0.0, 0.0])
        out = smooth_sample(mu, SmoothingConfig(1.0, 2), RngStream(2), size=100_000)
        assert np.abs(np.cov(out.points.T) - np.eye(2)).max() < 0.05

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            smooth_sample(DiscreteMeasure(np.zeros((3, 2))), SmoothingConfig(1.0, 3), RngStream(0))

    def test_order_independent(self):
        mu = DiscreteMeasure(np.arange(6.0))
        cfg = SmoothingConfig(0.5)
        root = RngStream(3)
        forward = [smooth_sample(mu, cfg, root.child("trial", t)).points for t in range(5)]
        backward = [smooth_sample(mu, cfg, root.child("trial", t)).points for t in reversed(range(5))]
        for a, b in zip(forward, reversed(backward)):
            assert np.array_equal(a, b)

    def test_weighted_resampling(self):
        mu = DiscreteMeasure([[0.0], [100.0]], [0.9, 0.1])
        out = smooth_sample(mu, SmoothingConfig(1.0), RngStream(4), size=20_000)
        assert abs(np.mean(out.points[:, 0] > 50) - 0.1) < 0.01


class TestConvolve:
    def test_linear_fixed(self):
        for sigma in (0.1, 1.0, 3.0):
            assert convolve_lipschitz_1d(lambda y: y, sigma, 2.0) == pytest.approx(2.0, abs=1e-9)

    def test_abs_values(self, oracles):
        assert convolve_lipschitz_1d(abs, 1.0, 0.0, breakpoints=[0.0]) == pytest.approx(
            oracles["abs_conv_x0_sigma1"], abs=1e-9)
        assert convolve_lipschitz_1d(abs, 0.5, 1.5, breakpoints=[0.0]) == pytest.approx(
            oracles["abs_conv_x1p5_sigma0p5"], abs=1e-9)
        assert convolve_lipschitz_1d(abs, 1.0, 10.0) == pytest.approx(10.0, abs=1e-6)

    def test_tol_validated(self):
        with pytest.raises(ParameterError):
            convolve_lipschitz_1d(abs, 1.0, 0.0, tol=0.0)

    def test_failure_reported(self):
        # infinitely many oscillations near 0 exhaust the subdivision limit
        def wild(y):
            return math.sqrt(abs(y)) * math.sin(1 / max(abs(y), 1e-300))

        with pytest.raises(QuadratureError):
            convolve_lipschitz_1d(wild, 1.0, 0.0, tol=1e-14)


class TestDerivativeBounds:
    def test_bound_formula(self):
        assert derivative_bound(0.5, 1) == 1.0
        assert derivative_bound(0.5, 2) == 2.0
        assert derivative_bound(0.5, 3) == pytest.approx(4 * math.sqrt(2))

    def test_abs_first_derivative(self):
        grid = np.linspace(-3, 3, 13)
        assert check_derivative_bounds(abs, 1.0, 1, grid, breakpoints=[0.0]) <= 1 + 1e-3

    def test_abs_second_derivative(self):
        grid = np.linspace(-2, 2, 9)
        worst = check_derivative_bounds(abs, 0.5, 2, grid, breakpoints=[0.0])
        assert worst <= 2 + 0.02
        # the peak of 2 phi_sigma(0) is attained at x = 0
        assert worst == pytest.approx(2 / (0.5 * math.sqrt(2 * math.pi)), rel=1e-3)

    def test_linear_second_derivative(self):
        assert check_derivative_bounds(lambda y: y, 0.7, 2, np.linspace(-1, 1, 5)) <= 1e-6

    def test_order_checked(self):
        with pytest.raises(ParameterError):
            check_derivative_bounds(abs, 1.0, 3, [0.0])

    def test_envelope(self):
        for sigma in (0.25, 1.0):
            for x in np.linspace(-10, 10, 21):
                value = convolve_lipschitz_1d(lambda y: abs(y - 1) - 1, sigma, x, breakpoints=[1.0])
                assert abs(value) <= abs(x) + sigma + 1e-9
