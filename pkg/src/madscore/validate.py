"""Oracle cross-check suite behind the ``validate`` CLI command.

Every closed-form operation is compared against an independent brute-force
route: quadrature convolution for smoothed scores, central differences for
the smoothing-variance and noise-level derivatives, a direct distance scan
for the nearest-atom field, root substitution for the schedule solve, and
algebraic equivalences for products and semigroup smoothing.  Each check
reports its tolerance and measured error; any failure fails the suite.

``inject_error`` perturbs one comparison on purpose (a negative control so
the suite itself can be tested for the ability to fail loudly).
"""

from __future__ import annotations

import numpy as np

from . import oracle as oracle_mod
from .models import DiracMixture, GaussianMixture, ProductModel
from .synthdata import line_mixture_model
from .xscore import AnalyticScoreOracle, MadParams, h_gamma, solve_gamma

VALIDATION_SCHEMA_VERSION = 1


def _rng(seed):
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _check(name, tolerance, error, details=None):
    return {
        "name": name,
        "tolerance": float(tolerance),
        "error": float(error),
        "pass": bool(error <= tolerance),
        **({"details": details} if details else {}),
    }


def _random_gaussian_mixture(rng, dim, n_components):
    weights = rng.dirichlet(np.full(n_components, 2.0))
    means = rng.uniform(-2.0, 2.0, size=(n_components, dim))
    covs = np.empty((n_components, dim, dim))
    for i in range(n_components):
        a = 0.4 * rng.standard_normal((dim, dim))
        covs[i] = a @ a.T + 0.5 * np.eye(dim)
    return GaussianMixture(weights, means, covs)


def _quadrature_checks(seed, inject_error):
    model = line_mixture_model().factors[0]  # the 1-d five-component mixture
    rng = _rng(seed)
    grid = oracle_mod.QuadratureGrid(bounds=((-45.0, 45.0),), nodes=(6001,))
    worst = 0.0
    for _ in range(20):
        sigma = float(rng.uniform(0.3, 3.0))
        x = np.array([float(rng.uniform(-25.0, 25.0))])
        reference, _ = oracle_mod.quadrature_score(
            lambda pts: model.smoothed_logpdf(0.0, pts), sigma, x, grid
        )
        closed = model.smoothed_score(sigma, x)
        worst = max(worst, float(np.abs(closed - reference).max()))
    if inject_error:
        worst += 1.0
    return _check("smoothed_score_vs_quadrature", 1e-6, worst)


def _variance_derivative_check(seed):
    atoms = DiracMixture([0.3, 0.7], [[-1.0], [1.0]])
    rng = _rng(seed + 1)
    worst = 0.0
    for _ in range(10):
        gamma = float(rng.uniform(0.05, 0.5))
        x = np.array([float(rng.uniform(-1.5, 1.5))])
        # H_gamma = gamma * S(p * g_gamma) + d/dgamma (gamma * S(p * g_gamma))
        fd = oracle_mod.central_diff(
            lambda g: g * atoms.smoothed_score_gamma(g, x), gamma, 1e-5, richardson=True
        )
        closed = atoms.h_gamma(gamma, x)
        direct = gamma * atoms.smoothed_score_gamma(gamma, x) + fd
        rel = np.abs(closed - direct).max() / max(np.abs(closed).max(), 1e-12)
        worst = max(worst, float(rel))
    return _check("dirac_h_gamma_vs_central_difference", 1e-6, worst)


def _sigma_derivative_check(seed):
    rng = _rng(seed + 2)
    model = _random_gaussian_mixture(rng, 2, 3)
    worst = 0.0
    for _ in range(10):
        sigma = float(rng.uniform(0.3, 1.5))
        x = rng.uniform(-2.0, 2.0, size=2)
        analytic = model.score_sigma_derivative(sigma, x)
        fd = oracle_mod.central_diff(
            lambda s: model.smoothed_score(s, x), sigma, 1e-4, richardson=True
        )
        rel = np.abs(analytic - fd).max() / max(np.abs(analytic).max(), 1e-12)
        worst = max(worst, float(rel))
    return _check("score_sigma_derivative_vs_central_difference", 1e-7, worst)


def _voronoi_check(seed):
    rng = _rng(seed + 3)
    atoms = rng.uniform(-3.0, 3.0, size=(50, 3))
    weights = rng.dirichlet(np.full(50, 1.5))
    model = DiracMixture(weights, atoms)
    mismatches = 0
    for _ in range(1000):
        x = rng.uniform(-3.5, 3.5, size=3)
        sel, z = oracle_mod.voronoi_brute(atoms, weights, x)
        expected = -(z @ (x - atoms[sel]))
        if np.abs(model.h0(x) - expected).max() > 0.0:
            mismatches += 1
    return _check("dirac_h0_vs_voronoi_brute_force", 0, mismatches)


def _gamma_root_check(seed):
    rng = _rng(seed + 4)
    worst = 0.0
    for _ in range(50):
        params = MadParams(
            a=float(rng.uniform(0.1, 5.0)),
            b=float(rng.uniform(0.0, 50.0)),
            p=float(rng.uniform(0.5, 12.0)),
        )
        t = float(np.exp(rng.uniform(np.log(0.002), np.log(80.0))))
        gamma = solve_gamma(params, t)
        back = np.sqrt(params.a * gamma ** (2.0 / params.p) + params.b * gamma)
        worst = max(worst, abs(back - t) / t)
    return _check("gamma_root_substitution", 1e-10, worst)


def _semigroup_check(seed):
    rng = _rng(seed + 5)
    model = _random_gaussian_mixture(rng, 2, 4)
    worst = 0.0
    for _ in range(10):
        s1 = float(rng.uniform(0.1, 1.0))
        s2 = float(rng.uniform(0.1, 1.0))
        x = rng.uniform(-2.0, 2.0, size=2)
        twice = model.convolved(s1).smoothed_score(s2, x)
        once = model.smoothed_score(np.sqrt(s1**2 + s2**2), x)
        worst = max(worst, float(np.abs(twice - once).max()))
    return _check("smoothing_semigroup", 1e-10, worst)


def _product_check(seed):
    rng = _rng(seed + 6)
    block1 = _random_gaussian_mixture(rng, 1, 3)
    block2 = _random_gaussian_mixture(rng, 2, 2)
    product = ProductModel([block1, block2])
    # the same distribution as one block-diagonal mixture over all pairs
    weights, means, covs = [], [], []
    for w1, m1, c1 in zip(block1.weights, block1.means, block1.covariances):
        for w2, m2, c2 in zip(block2.weights, block2.means, block2.covariances):
            weights.append(w1 * w2)
            means.append(np.concatenate([m1, m2]))
            cov = np.zeros((3, 3))
            cov[:1, :1] = c1
            cov[1:, 1:] = c2
            covs.append(cov)
    monolithic = GaussianMixture(weights, means, covs)
    worst = 0.0
    for _ in range(10):
        sigma = float(rng.uniform(0.0, 1.5))
        x = rng.uniform(-2.0, 2.0, size=3)
        worst = max(
            worst,
            float(np.abs(product.smoothed_score(sigma, x) - monolithic.smoothed_score(sigma, x)).max()),
        )
    return _check("product_vs_monolithic_mixture", 1e-10, worst)


def _extended_score_equivalence_check(seed):
    rng = _rng(seed + 7)
    atoms = DiracMixture([0.25, 0.35, 0.4], [[-1.0, 0.0], [1.0, 0.5], [0.2, -1.2]])
    adapter = AnalyticScoreOracle(atoms)
    worst = 0.0
    for _ in range(10):
        gamma = float(rng.uniform(0.05, 0.8))
        x = rng.uniform(-1.5, 1.5, size=2)
        via_operator = h_gamma(adapter, 0.0, gamma, x, derivative="analytic")
        closed = atoms.h_gamma(gamma, x)
        rel = np.abs(via_operator - closed).max() / max(np.abs(closed).max(), 1e-12)
        worst = max(worst, float(rel))
    return _check("operator_h_gamma_vs_closed_form", 1e-8, worst)


def run_validation_suite(seed=0, inject_error=False):
    """Run every cross-check; returns (report, all_passed)."""
    checks = [
        _quadrature_checks(seed, inject_error),
        _variance_derivative_check(seed),
        _sigma_derivative_check(seed),
        _voronoi_check(seed),
        _gamma_root_check(seed),
        _semigroup_check(seed),
        _product_check(seed),
        _extended_score_equivalence_check(seed),
    ]
    passed = all(c["pass"] for c in checks)
    report = {
        "schema_version": VALIDATION_SCHEMA_VERSION,
        "seed": int(seed),
        "injected_error": bool(inject_error),
        "checks": checks,
        "pass": passed,
    }
    return report, passed
