import math

import numpy as np
import pytest

from smoothwass.errors import DimensionError, ParameterError, PreconditionError
from smoothwass.measures import DiagGaussian, DiscreteMeasure, Gaussian, GaussianMixture, Uniform, sample_model
from smoothwass.rng import RngStream
from smoothwass.swd import (
    EstimatorConfig,
    SmoothedCdfGrid,
    SwdEstimate,
    _shell_sum,
    donsker_bound,
    swd,
    swd_1d_exact,
    swd_mc,
)
from smoothwass.transport import solve_w1_exact

STANDARD = Gaussian([0.0], 1.0)


class TestEstimate:
    def test_exact_has_no_error(self):
        with pytest.raises(ParameterError):
            SwdEstimate(1.0, std_error=0.1, method="exact1d")
        with pytest.raises(ParameterError):
            SwdEstimate(1.0, method="exact1d", m=10)

    def test_nonnegative(self):
        with pytest.raises(ParameterError):
            SwdEstimate(-0.1, method="mc_exact_ot", m=10)

    def test_unknown_method(self):
        with pytest.raises(ParameterError):
            SwdEstimate(0.1, method="neural")


class TestExact1d:
    def test_identity(self):
        assert swd_1d_exact(STANDARD, STANDARD, 1.0).value <= 1e-8

    def test_translation(self):
        assert swd_1d_exact(STANDARD, Gaussian([1.0], 1.0), 1.0).value == pytest.approx(1.0, abs=1e-6)

    def test_point_mass_vs_gaussian(self, oracles):
        value = swd_1d_exact(DiscreteMeasure.point_mass([0.0]), STANDARD, 1.0).value
        assert value == pytest.approx(oracles["w1_delta0_vs_gaussian"], abs=1e-8)

    def test_dimension(self):
        with pytest.raises(DimensionError):
            swd_1d_exact(Gaussian([0.0, 0.0], 1.0), Gaussian([0.0, 0.0], 1.0), 1.0)

    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
    def test_translation_equivariance_discrete(self, a):
        gen = RngStream(1).generator()
        mu = DiscreteMeasure(gen.normal(size=(40, 1)))
        assert swd_1d_exact(mu, mu.shift(a), 0.7).value == pytest.approx(a, abs=1e-6)

    def test_gap_with_unsmoothed_w1(self):
        root = RngStream(2)
        for k in range(50):
            gen = root.child("pair", k).generator()
            mu = DiscreteMeasure(gen.normal(size=(int(gen.integers(1, 30)), 1)), None)
            nu = DiscreteMeasure(gen.normal(1.0, 2.0, size=(int(gen.integers(1, 30)), 1)))
            sigma = float(gen.uniform(0.1, 2.0))
            w1 = solve_w1_exact(mu, nu).cost
            s = swd_1d_exact(mu, nu, sigma).value
            assert s <= w1 + 1e-6
            assert abs(w1 - s) <= 2 * sigma + 1e-6

    def test_metric(self):
        root = RngStream(3)
        for k in range(50):
            gen = root.child("triple", k).generator()
            a, b, c = (DiscreteMeasure(gen.normal(gen.normal(), 1.0, size=(15, 1))) for _ in range(3))
            ab, ba = swd_1d_exact(a, b, 0.5).value, swd_1d_exact(b, a, 0.5).value
            assert ab == pytest.approx(ba, abs=1e-9)
            assert swd_1d_exact(a, c, 0.5).value <= ab + swd_1d_exact(b, c, 0.5).value + 1e-8

    def test_weighted_against_grid(self):
        gen = RngStream(4).generator()
        mu = DiscreteMeasure(gen.normal(size=(30, 1)), gen.dirichlet(np.ones(30)))
        model = GaussianMixture([(0.3, [-1.0], 0.5), (0.7, [1.0], 1.5)])
        grid = SmoothedCdfGrid.covering([mu, model], 0.8)
        direct = grid.l1(grid.cdf_matrix(mu.points[:, 0]) @ mu.weights - grid.source_cdf(model))
        assert float(direct) == pytest.approx(swd_1d_exact(mu, model, 0.8).value, abs=1e-9)

    def test_uniform_source(self):
        # smoothing preserves translation: U[0,1] vs U[2,3] is 2 apart
        assert swd_1d_exact(Uniform([0.0], [1.0]), Uniform([2.0], [3.0]), 0.4).value == pytest.approx(2.0, abs=1e-7)

    def test_small_sigma_approaches_w1(self):
        mu, nu = DiscreteMeasure([[0.0], [2.0]]), DiscreteMeasure([[1.0], [3.0]])
        assert swd_1d_exact(mu, nu, 1e-3).value == pytest.approx(1.0, abs=1e-6)


class TestMonteCarlo:
    @pytest.mark.xfail(strict=True, reason="the 0.25 band sits below the plug-in self-distance mean "
                       "of about 0.28 measured by an independent assignment-solver pilot")
    def test_self_distance_band(self):
        model = Gaussian([0.0, 0.0], 1.0)
        assert swd_mc(model, model, 1.0, m=500, rng=5).value < 0.25

    def test_self_distance_matches_pilot(self, oracles):
        pilot = oracles["plugin_self_distance_d2_m500"]
        model = Gaussian([0.0, 0.0], 1.0)
        values = [swd_mc(model, model, 1.0, m=500, rng=RngStream(11).child("run", k)).value for k in range(20)]
        spread = 4 * pilot["sd"] * math.sqrt(1 / 20 + 1 / 40)
        assert abs(np.mean(values) - pilot["mean"]) < spread

    def test_agrees_with_exact(self):
        other = Gaussian([1.0], 1.0)
        est = swd_mc(STANDARD, other, 1.0, m=2000, reps=20, rng=6, threads=4)
        exact = swd_1d_exact(STANDARD, other, 1.0).value
        assert abs(est.value - exact) <= 3 * est.std_error + 0.05
        assert est.method == "mc_exact_ot" and est.m == 2000 and est.replications == 20

    def test_m_too_small(self):
        with pytest.raises(PreconditionError):
            swd_mc(STANDARD, STANDARD, 1.0, m=1)

    def test_deterministic_across_threads(self):
        P, Q = DiagGaussian([0.0, 0.0], [1.0, 2.0]), Gaussian([1.0, 0.0], 1.0)
        a = swd_mc(P, Q, 0.5, m=100, reps=6, rng=7, threads=1)
        b = swd_mc(P, Q, 0.5, m=100, reps=6, rng=7, threads=3)
        assert a == b

    def test_sinkhorn_solver(self):
        est = swd_mc(STANDARD, Gaussian([1.0], 1.0), 1.0, m=200, solver="sinkhorn", rng=8, epsilon=0.05)
        assert est.method == "mc_sinkhorn" and 0.5 < est.value < 1.6

    def test_discrete_vs_model(self):
        data = sample_model(Gaussian([0.0, 0.0], 1.0), 300, RngStream(9))
        assert swd_mc(data, Gaussian([0.0, 0.0], 1.0), 1.0, m=300, rng=10).value < 0.4

    def test_dispatch(self):
        assert swd(STANDARD, STANDARD, 1.0).method == "exact1d"
        assert swd(STANDARD, STANDARD, 1.0, method="mc", m=50, rng=1).method == "mc_exact_ot"
        with pytest.raises(DimensionError):
            swd(STANDARD, Gaussian([0.0, 0.0], 1.0), 1.0)

    def test_estimator_config(self):
        cfg = EstimatorConfig()
        assert cfg.resolve(1) == "exact1d" and cfg.resolve(3) == "mc"
        with pytest.raises(DimensionError):
            EstimatorConfig(method="exact1d").resolve(2)
        with pytest.raises(ParameterError):
            EstimatorConfig(method="neural")


class TestDonsker:
    def test_gaussian_1d(self, oracles):
        res = donsker_bound(STANDARD, 1.0)
        assert res.converged and not res.divergent
        assert res.value == pytest.approx(oracles["donsker_gaussian_d1"], abs=1e-5)

    def test_gaussian_2d(self, oracles):
        model = Gaussian([0.0, 0.0], 1.0)
        full = donsker_bound(model, 1.0)
        assert full.value == pytest.approx(oracles["donsker_gaussian_d2_sigma1"], abs=1e-4)
        half = donsker_bound(model, 0.5)
        assert half.value == 2 * full.value

    def test_prefactor_power(self):
        model = DiagGaussian([0.0, 0.0, 0.0], [1.0, 0.5, 2.0])
        assert donsker_bound(model, 0.25).value == pytest.approx(4 * donsker_bound(model, 1.0).value, rel=1e-15)

    def test_point_mass(self):
        assert donsker_bound(DiscreteMeasure.point_mass([0.0]), 1.0).value == 1.0
        # a point at 2.5 sits in [2, 3), farthest vertex 3
        assert donsker_bound(DiscreteMeasure.point_mass([2.5]), 1.0).value == 3.0

    def test_divergence_flag(self):
        # Cauchy-like shells: r * sqrt(mass) with mass ~ r^-2 never decays
        total, shells, converged, divergent = _shell_sum(lambda r: (1.0, 1.0 / (r * (r + 1))), 1e-6, 10_000)
        assert divergent and not converged and shells == 100

    def test_cube_side(self):
        with pytest.raises(ParameterError):
            donsker_bound(STANDARD, 1.0, cube_side=0.0)
