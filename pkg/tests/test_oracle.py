import numpy as np
import pytest
from scipy import stats

from madscore.models import DiracMixture, GaussianMixture
from madscore.oracle import (
    QuadratureGrid,
    StatReference,
    central_diff,
    ks_critical_value,
    ks_statistic,
    quadrature_score,
    stat_tests,
    voronoi_brute,
)
from madscore.synthdata import line_mixture_model


class TestQuadratureScore:
    def test_single_gaussian_matches_closed_form(self):
        gm = GaussianMixture([1.0], [[0.3]], [[[0.8]]])
        grid = QuadratureGrid(bounds=((-12.0, 12.0),), nodes=(512,))
        value, err = quadrature_score(
            lambda pts: gm.smoothed_logpdf(0.0, pts), 0.6, np.array([1.1]), grid
        )
        np.testing.assert_allclose(value, gm.smoothed_score(0.6, [1.1]), atol=1e-8)
        assert err < 1e-6

    def test_symmetric_point_gives_zero(self):
        gm = GaussianMixture([0.5, 0.5], [[-1.0], [1.0]], [[[0.4]], [[0.4]]])
        grid = QuadratureGrid(bounds=((-10.0, 10.0),), nodes=(1025,))
        value, _ = quadrature_score(
            lambda pts: gm.smoothed_logpdf(0.0, pts), 0.5, np.array([0.0]), grid
        )
        np.testing.assert_allclose(value, 0.0, atol=1e-10)

    def test_line_mixture_cross_validation(self, rng):
        mixture = line_mixture_model().factors[0]
        grid = QuadratureGrid(bounds=((-45.0, 45.0),), nodes=(6001,))
        for _ in range(20):
            sigma = float(rng.uniform(0.3, 3.0))
            x = np.array([float(rng.uniform(-25, 25))])
            value, _ = quadrature_score(
                lambda pts: mixture.smoothed_logpdf(0.0, pts), sigma, x, grid
            )
            np.testing.assert_allclose(
                value, mixture.smoothed_score(sigma, x), atol=1e-6
            )

    def test_two_dimensional_grid(self):
        gm = GaussianMixture([1.0], [[0.0, 0.0]], [np.diag([0.5, 1.5])])
        grid = QuadratureGrid(bounds=((-8.0, 8.0), (-10.0, 10.0)), nodes=(256, 256))
        x = np.array([0.7, -0.9])
        value, _ = quadrature_score(
            lambda pts: gm.smoothed_logpdf(0.0, pts), 0.5, x, grid
        )
        np.testing.assert_allclose(value, gm.smoothed_score(0.5, x), atol=1e-7)

    def test_grid_guards(self):
        with pytest.raises(ValueError, match="64 nodes"):
            QuadratureGrid(bounds=((-1.0, 1.0),), nodes=(32,))
        with pytest.raises(ValueError, match="one or two"):
            QuadratureGrid(bounds=((-1, 1),) * 3, nodes=(64,) * 3)
        with pytest.raises(ValueError, match="cap"):
            QuadratureGrid(bounds=((-1, 1), (-1, 1)), nodes=(4096, 4096))


class TestCentralDiff:
    def test_quadratic_is_exact(self):
        value = central_diff(lambda s: s**2, 3.0, 1e-3)
        np.testing.assert_allclose(value, 6.0, atol=1e-9)

    def test_constant_gives_zero(self):
        assert central_diff(lambda s: np.array([2.0, -1.0]), 1.0, 1e-3).max() == 0.0

    def test_dirac_variance_derivative_matches_closed_form(self):
        # d/dgamma of the smoothed score, recovered from the extended score
        atoms = DiracMixture([0.4, 0.6], [[-1.0], [1.0]])
        gamma, x = 0.07, np.array([0.4])
        fd = central_diff(lambda g: atoms.smoothed_score_gamma(g, x), gamma, 1e-6,
                          richardson=True)
        closed = (atoms.h_gamma(gamma, x) - (1 + gamma) * atoms.smoothed_score_gamma(gamma, x)) / gamma
        np.testing.assert_allclose(closed, fd, rtol=1e-6)

    def test_non_finite_evaluation_raises(self):
        with pytest.raises(ValueError, match="non-finite"):
            central_diff(lambda s: np.array([np.inf]), 1.0, 0.1)


class TestVoronoiBrute:
    def test_interior_point(self):
        sel, z = voronoi_brute([[-1.0], [1.0]], [0.5, 0.5], [0.5])
        assert list(sel) == [1]
        np.testing.assert_array_equal(z, [1.0])

    def test_boundary_point(self):
        sel, z = voronoi_brute([[-1.0], [1.0]], [0.3, 0.7], [0.0])
        assert list(sel) == [0, 1]
        np.testing.assert_allclose(z, [0.3, 0.7])

    def test_agrees_with_model_field(self, rng):
        locations = rng.uniform(-3, 3, size=(50, 3))
        weights = rng.dirichlet(np.full(50, 1.5))
        atoms = DiracMixture(weights, locations)
        for _ in range(1000):
            x = rng.uniform(-3.5, 3.5, size=3)
            sel, z = voronoi_brute(locations, weights, x)
            np.testing.assert_array_equal(atoms.h0(x), -(z @ (x - locations[sel])))


class TestStatTests:
    def test_self_consistency_of_ks(self):
        rng = np.random.default_rng(123)
        passes = 0
        runs = 200
        for _ in range(runs):
            samples = rng.standard_normal(500)
            stat = ks_statistic(samples, stats.norm.cdf)
            passes += stat < ks_critical_value(500, alpha=0.01)
        assert passes / runs >= 0.95

    def test_constant_samples_fail_loudly(self):
        stat = ks_statistic(np.zeros(1000), stats.norm.cdf)
        assert stat > 0.49  # essentially the full mass of the step

    def test_basin_assignment_on_line_mixture_means(self, rng):
        centers = np.array([[-20.0, 0.0], [-10.0, 0.0], [0.0, 0.0], [10.0, 0.0], [20.0, 0.0]])
        samples = centers[rng.integers(0, 5, size=400)] + 0.5 * rng.standard_normal((400, 2))
        report = stat_tests(samples, StatReference(basin_centers=centers))
        assert report["max_assignment_distance"] < 5.0
        assert sum(b["count"] for b in report["basins"]) == 400

    def test_moments_and_marginals(self, rng):
        samples = rng.standard_normal((2000, 2))
        ref = StatReference(
            mean=np.zeros(2),
            cov=np.eye(2),
            marginal_cdfs=((0, stats.norm.cdf), (1, stats.norm.cdf)),
        )
        report = stat_tests(samples, ref)
        assert report["moments"]["mean_abs_error"] < 0.1
        assert all(row["pass"] for row in report["ks"])

    def test_requires_minimum_samples(self):
        with pytest.raises(ValueError, match="100"):
            stat_tests(np.zeros((50, 1)), StatReference(mean=np.zeros(1)))
