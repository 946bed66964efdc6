import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_pd_mixture(rng, dim, n_components, lam_floor=0.5):
    """Random positive-definite Gaussian mixture for cross-checks."""
    from madscore.models import GaussianMixture

    weights = rng.dirichlet(np.full(n_components, 2.0))
    means = rng.uniform(-2.0, 2.0, size=(n_components, dim))
    covs = np.empty((n_components, dim, dim))
    for i in range(n_components):
        a = 0.4 * rng.standard_normal((dim, dim))
        covs[i] = a @ a.T + lam_floor * np.eye(dim)
    return GaussianMixture(weights, means, covs)
