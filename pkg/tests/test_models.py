import numpy as np
import pytest

from madscore.models import (
    DegenerateGaussian,
    DiracMixture,
    GaussianMixture,
    ProductModel,
    RadialGaussianMixture,
    model_from_dict,
    model_to_dict,
)
from madscore.oracle import QuadratureGrid, quadrature_score
from madscore.synthdata import LINE_MIXTURE_MEANS, LINE_MIXTURE_VARIANCES, line_mixture_model

from conftest import random_pd_mixture


def fig_style_1d_mixture():
    k = len(LINE_MIXTURE_MEANS)
    return GaussianMixture(
        np.full(k, 1.0 / k),
        np.asarray(LINE_MIXTURE_MEANS)[:, None],
        np.asarray(LINE_MIXTURE_VARIANCES)[:, None, None],
    )


class TestGaussianMixtureScore:
    def test_single_isotropic_component(self):
        gm = GaussianMixture([1.0], [[0.0, 0.0]], [np.eye(2)])
        np.testing.assert_allclose(
            gm.smoothed_score(1.0, [2.0, 0.0]), [-1.0, 0.0], atol=1e-14
        )

    def test_symmetric_mixture_center(self):
        cov = np.array([[0.5, 0.1], [0.1, 0.8]])
        gm = GaussianMixture([0.5, 0.5], [[-1.0, 2.0], [3.0, -2.0]], [cov, cov])
        center = np.array([1.0, 0.0])
        np.testing.assert_allclose(gm.smoothed_score(0.7, center), 0.0, atol=1e-12)

    def test_line_mixture_against_quadrature(self):
        mixture = fig_style_1d_mixture()
        grid = QuadratureGrid(bounds=((-45.0, 45.0),), nodes=(6001,))
        x = np.array([-20.0])
        reference, _ = quadrature_score(
            lambda pts: mixture.smoothed_logpdf(0.0, pts), 0.5, x, grid
        )
        np.testing.assert_allclose(mixture.smoothed_score(0.5, x), reference, atol=1e-6)

    def test_batch_matches_single(self, rng):
        gm = random_pd_mixture(rng, 2, 3)
        pts = rng.uniform(-2, 2, size=(5, 2))
        batch = gm.smoothed_score(0.4, pts)
        for i, p in enumerate(pts):
            np.testing.assert_array_equal(batch[i], gm.smoothed_score(0.4, p))

    def test_sigma_zero_is_plain_score(self):
        gm = GaussianMixture([1.0], [[1.0]], [[[4.0]]])
        np.testing.assert_allclose(gm.smoothed_score(0.0, [3.0]), [-0.5])

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError, match="sum to 1"):
            GaussianMixture([0.5, 0.4], [[0.0], [1.0]], [[[1.0]], [[1.0]]])
        with pytest.raises(ValueError, match="positive definite"):
            GaussianMixture([1.0], [[0.0, 0.0]], [np.diag([1.0, 0.0])])
        with pytest.raises(ValueError, match="symmetric"):
            GaussianMixture([1.0], [[0.0, 0.0]], [np.array([[1.0, 0.5], [0.1, 1.0]])])
        gm = GaussianMixture([1.0], [[0.0]], [[[1.0]]])
        with pytest.raises(ValueError, match="non-finite"):
            gm.smoothed_score(0.5, [np.nan])


class TestDiracMixtureScore:
    def test_single_atom_smoothed(self, rng):
        mu = np.array([1.5, -2.0])
        atoms = DiracMixture([1.0], [mu])
        for gamma in (1e-4, 0.1, 3.0):
            x = rng.uniform(-3, 3, size=2)
            np.testing.assert_allclose(
                atoms.smoothed_score_gamma(gamma, x), -(x - mu) / gamma, rtol=1e-12
            )

    def test_symmetric_atoms_center(self):
        atoms = DiracMixture([0.5, 0.5], [[-1.0], [1.0]])
        for gamma in (1e-3, 0.5, 2.0):
            np.testing.assert_allclose(atoms.smoothed_score_gamma(gamma, [0.0]), 0.0, atol=1e-15)

    def test_matches_isotropic_gaussian_mixture(self):
        atoms = DiracMixture([0.3, 0.7], [[-1.0], [1.0]])
        gamma = 0.1
        equivalent = atoms.convolved(np.sqrt(gamma))
        x = np.array([0.5])
        np.testing.assert_allclose(
            atoms.smoothed_score_gamma(gamma, x),
            equivalent.smoothed_score(0.0, x),
            atol=1e-8,
        )
        # the small-variance limit concentrates on the pull to the nearest atom
        tiny = atoms.smoothed_score_gamma(1e-6, x)
        np.testing.assert_allclose(tiny * 1e-6, -(x - 1.0), atol=1e-8)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError, match="gamma"):
            DiracMixture([1.0], [[0.0]]).smoothed_score_gamma(0.0, [1.0])
        with pytest.raises(ValueError, match="distinct"):
            DiracMixture([0.5, 0.5], [[1.0], [1.0]])


class TestDiracExtendedScore:
    def test_single_atom_pulls_exactly(self, rng):
        # one point mass: the extended score is -(x - mu) at every gamma
        for dim in (1, 2, 8):
            mu = rng.uniform(-5, 5, size=dim)
            atoms = DiracMixture([1.0], [mu])
            for gamma in (1e-3, 0.1, 1.0, 10.0):
                x = rng.uniform(-5, 5, size=dim)
                np.testing.assert_array_equal(atoms.h_gamma(gamma, x), -(x - mu))

    def test_symmetric_center_is_zero(self):
        atoms = DiracMixture([0.5, 0.5], [[-1.0], [1.0]])
        np.testing.assert_allclose(atoms.h_gamma(0.05, [0.0]), 0.0, atol=1e-15)

    def test_matches_finite_difference_in_gamma(self):
        from madscore.oracle import central_diff

        atoms = DiracMixture([0.3, 0.7], [[-1.0], [1.0]])
        gamma = 0.05
        x = np.array([0.5])
        ds = central_diff(lambda g: atoms.smoothed_score_gamma(g, x), gamma, 1e-6,
                          richardson=True)
        expected = (1.0 + gamma) * atoms.smoothed_score_gamma(gamma, x) + gamma * ds
        value = atoms.h_gamma(gamma, x)
        np.testing.assert_allclose(value, expected, rtol=1e-6)

    def test_limit_reaches_voronoi_field(self, rng):
        # interior points: h_gamma approaches the nearest-atom pull monotonically
        for _ in range(20):
            dim = int(rng.integers(1, 4))
            k = int(rng.integers(2, 11))
            atoms = DiracMixture(rng.dirichlet(np.full(k, 1.5)), rng.uniform(-2, 2, (k, dim)))
            found = 0
            while found < 5:
                x = rng.uniform(-2.5, 2.5, size=dim)
                dists = np.sort(np.linalg.norm(atoms.locations - x, axis=1))
                if dists[1] - dists[0] <= 0.5:
                    continue
                found += 1
                h0 = atoms.h0(x)
                errs = [np.linalg.norm(atoms.h_gamma(g, x) - h0) for g in (1e-1, 1e-2, 1e-3)]
                assert errs[0] >= errs[1] >= errs[2]
                assert errs[2] < 1e-4


class TestDiracVoronoiField:
    def test_interior_pull(self):
        atoms = DiracMixture([0.5, 0.5], [[-1.0], [1.0]])
        np.testing.assert_allclose(atoms.h0([0.5]), [0.5])

    def test_boundary_blends_by_weight(self):
        atoms = DiracMixture([0.3, 0.7], [[-1.0], [1.0]])
        # -(0.3 * (0 + 1) + 0.7 * (0 - 1)) = 0.4
        np.testing.assert_allclose(atoms.h0([0.0]), [0.4], atol=1e-15)

    def test_matches_brute_force_on_random_atoms(self, rng):
        from madscore.oracle import voronoi_brute

        locations = rng.uniform(-3, 3, size=(10, 3))
        weights = rng.dirichlet(np.full(10, 1.5))
        atoms = DiracMixture(weights, locations)
        for _ in range(100):
            x = rng.uniform(-3.5, 3.5, size=3)
            sel, z = voronoi_brute(locations, weights, x)
            expected = -(z @ (x - locations[sel]))
            np.testing.assert_array_equal(atoms.h0(x), expected)


class TestDegenerateGaussian:
    def test_identity_covariance(self):
        model = DegenerateGaussian([0.0], [[1.0]], degenerate_dim=1)
        np.testing.assert_allclose(model.h0([3.0, 2.0]), [-3.0, -2.0])

    def test_substitution(self):
        model = DegenerateGaussian([5.0], [[4.0]], degenerate_dim=1)
        np.testing.assert_allclose(model.h0([7.0, -1.0]), [-0.5, 1.0])

    def test_rotation_equivariance(self):
        base = DegenerateGaussian([5.0], [[4.0]], degenerate_dim=1)
        rot = np.array([[0.0, -1.0], [1.0, 0.0]])
        rotated = DegenerateGaussian([5.0], [[4.0]], degenerate_dim=1, rotation=rot)
        x = np.array([7.0, -1.0])
        np.testing.assert_allclose(rotated.h0(rot @ x), rot @ base.h0(x), atol=1e-12)

    def test_translation_via_offset(self):
        base = DegenerateGaussian([0.5], [[2.0]], degenerate_dim=1)
        shift = np.array([1.0, -2.0])
        moved = base.translated(shift)
        x = np.array([0.3, 0.4])
        np.testing.assert_allclose(moved.h0(x + shift), base.h0(x), atol=1e-12)

    def test_smoothed_requires_noise(self):
        model = DegenerateGaussian([0.0], [[1.0]], degenerate_dim=1)
        with pytest.raises(ValueError, match="degenerate at sigma zero"):
            model.smoothed_score(0.0, [1.0, 1.0])

    def test_rejects_non_orthogonal_rotation(self):
        with pytest.raises(ValueError, match="orthogonal"):
            DegenerateGaussian([0.0], [[1.0]], 1, rotation=[[1.0, 0.1], [0.0, 1.0]])


class TestProductModel:
    def test_h0_concatenates_blocks(self):
        mixture = fig_style_1d_mixture()
        product = ProductModel([mixture, DiracMixture([1.0], [[0.0]])])
        x = np.array([-19.0, 0.7])
        value = product.h0(x)
        np.testing.assert_allclose(value[:1], mixture.smoothed_score(0.0, x[:1]))
        np.testing.assert_allclose(value[1], -0.7)

    def test_symmetric_point_is_zero(self):
        sym = GaussianMixture([0.5, 0.5], [[-1.0], [1.0]], [[[0.5]], [[0.5]]])
        product = ProductModel([sym, DiracMixture([1.0], [[0.0]])])
        np.testing.assert_allclose(product.smoothed_score(0.8, [0.0, 0.0]), 0.0, atol=1e-13)

    def test_smoothed_matches_equivalent_2d_mixture(self, rng):
        product = line_mixture_model()
        k = len(LINE_MIXTURE_MEANS)
        means = np.column_stack([LINE_MIXTURE_MEANS, np.zeros(k)])
        covs = np.array([np.diag([v + 1.0, 1.0]) for v in LINE_MIXTURE_VARIANCES])
        equivalent = GaussianMixture(np.full(k, 1.0 / k), means, covs)
        for _ in range(20):
            x = rng.uniform(-25, 25, size=2)
            np.testing.assert_allclose(
                product.smoothed_score(1.0, x),
                equivalent.smoothed_score(0.0, x),
                atol=1e-10,
            )

    def test_unsupported_kind_raises(self):
        gm = GaussianMixture([1.0], [[0.0]], [[[1.0]]])
        product = ProductModel([gm, DiracMixture([1.0], [[0.0]])])
        with pytest.raises(ValueError, match="degenerate at sigma zero|gamma"):
            product.smoothed_score(0.0, [0.0, 0.0])


class TestRadialGaussianMixture:
    def test_discretisation_layout(self):
        radial = RadialGaussianMixture([[0.0, 0.0]], radius=1.0, variance=0.5, n_angles=16)
        mixture = radial.as_gaussian_mixture()
        assert mixture.weights.shape == (16,)
        np.testing.assert_allclose(mixture.weights, 1.0 / 16)
        np.testing.assert_allclose(np.linalg.norm(mixture.means, axis=1), 1.0)
        np.testing.assert_allclose(mixture.means[0], [1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(mixture.means[4], [0.0, 1.0], atol=1e-15)

    def test_center_score_vanishes(self):
        radial = RadialGaussianMixture([[2.0, -1.0]], radius=3.0, variance=1.0, n_angles=64)
        for sigma in (0.3, 1.0):
            np.testing.assert_allclose(
                radial.smoothed_score(sigma, [2.0, -1.0]), 0.0, atol=1e-12
            )

    def test_angular_resolution_converged(self, rng):
        coarse = RadialGaussianMixture([[0.0, 0.0], [8.0, 3.0]], 10.0, 2.5, n_angles=256)
        fine = RadialGaussianMixture([[0.0, 0.0], [8.0, 3.0]], 10.0, 2.5, n_angles=512)
        worst = 0.0
        for _ in range(100):
            x = rng.uniform(-15, 20, size=2)
            a = coarse.smoothed_score(0.5, x)
            b = fine.smoothed_score(0.5, x)
            worst = max(worst, np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))
        assert worst < 1e-4


class TestSharedInvariants:
    def models(self, rng):
        return [
            random_pd_mixture(rng, 2, 3),
            DiracMixture([0.3, 0.7], [[-1.0, 0.5], [1.0, -0.5]]),
            DegenerateGaussian([0.5], [[2.0]], degenerate_dim=1),
            line_mixture_model(),
            RadialGaussianMixture([[0.0, 0.0]], 3.0, 0.5, n_angles=32),
        ]

    def test_smoothing_semigroup(self, rng):
        for model in self.models(rng):
            for s1, s2 in [(0.5, 0.5), (0.2, 1.1), (1.0, 0.01)]:
                x = rng.uniform(-3, 3, size=model.dim)
                twice = model.convolved(s1).smoothed_score(s2, x)
                once = model.smoothed_score(np.sqrt(s1**2 + s2**2), x)
                np.testing.assert_allclose(twice, once, atol=1e-10)

    def test_translation_equivariance(self, rng):
        for model in self.models(rng):
            shift = rng.uniform(-4, 4, size=model.dim)
            moved = model.translated(shift)
            x = rng.uniform(-3, 3, size=model.dim)
            np.testing.assert_allclose(
                moved.smoothed_score(0.7, x + shift),
                model.smoothed_score(0.7, x),
                atol=1e-12,
            )

    def test_sampling_is_seed_deterministic(self, rng):
        for model in self.models(rng):
            a = model.sample(16, np.random.Generator(np.random.Philox(key=9)))
            b = model.sample(16, np.random.Generator(np.random.Philox(key=9)))
            np.testing.assert_array_equal(a, b)


class TestModelJson:
    def test_round_trip_every_kind(self, rng):
        models = [
            random_pd_mixture(rng, 2, 3),
            DiracMixture([0.3, 0.7], [[-1.0], [1.0]]),
            DegenerateGaussian(
                [5.0], [[4.0]], 1,
                rotation=[[0.0, -1.0], [1.0, 0.0]], offset=[1.0, 2.0],
            ),
            line_mixture_model(),
            RadialGaussianMixture([[0.0, 0.0]], 10.0, 2.5, n_angles=32),
        ]
        for model in models:
            clone = model_from_dict(model_to_dict(model))
            x = rng.uniform(-2, 2, size=model.dim)
            np.testing.assert_array_equal(
                clone.smoothed_score(0.5, x), model.smoothed_score(0.5, x)
            )

    def test_rejects_unknown_version_and_kind(self):
        gm = GaussianMixture([1.0], [[0.0]], [[[1.0]]])
        payload = model_to_dict(gm)
        payload["schema_version"] = 99
        with pytest.raises(ValueError, match="schema version"):
            model_from_dict(payload)
        with pytest.raises(ValueError, match="unknown model kind"):
            model_from_dict({"schema_version": 1, "kind": "mystery"})
