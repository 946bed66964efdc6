"""Analytic probability models with closed-form smoothed and extended scores.

Every model is immutable after construction and exposes a common surface:

- ``dim``: ambient dimension
- ``smoothed_score(sigma, x)``: gradient of ``log(p * N(0, sigma^2 I))`` at x
- ``score_sigma_derivative(sigma, x)``: exact derivative of the smoothed
  score with respect to the noise level (used by analytic score oracles)
- ``h0(x)``: the small-smoothing limit of the extended score, where defined
- ``convolved(sigma)``: the same distribution with ``N(0, sigma^2 I)`` noise
  folded in, returned as a new model
- ``sample(n, rng)``: exact draws
- ``smoothed_logpdf(sigma, x)``: log density of the smoothed distribution

Points may be a single vector of shape ``(d,)`` or a batch of shape
``(n, d)``; outputs match the input shape.  All linear algebra is dense and
per-component (dimensions stay small here), with log-sum-exp stabilised
responsibilities so that smoothing variances down to ~1e-6 do not underflow.
"""

from __future__ import annotations

import json

import numpy as np
from scipy.special import logsumexp, ndtr

MODEL_SCHEMA_VERSION = 1

_WEIGHT_SUM_TOL = 1e-12
_SYMMETRY_TOL = 1e-12
_ORTHOGONALITY_TOL = 1e-10

_LOG_2PI = float(np.log(2.0 * np.pi))


def tie_tolerance(x):
    """Absolute tolerance under which atom distances count as tied.

    Exact ties never occur in floats, so co-nearest atoms are detected with
    a tolerance that scales with the magnitude of the query point.
    """
    return 1e-9 * (1.0 + float(np.linalg.norm(x)))


def _as_batch(x, dim):
    """Validate a point or batch of points and return ``(array(n, d), single)``."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
        single = True
    elif pts.ndim == 2:
        single = False
    else:
        raise ValueError(f"points must have shape (d,) or (n, d), got {pts.shape}")
    if pts.shape[1] != dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, model has {dim}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite input point")
    return pts, single


def _unbatch(values, single):
    return values[0] if single else values


def _check_weights(weights):
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-d sequence")
    if np.any(w <= 0.0):
        raise ValueError("weights must be strictly positive")
    if abs(w.sum() - 1.0) > _WEIGHT_SUM_TOL:
        raise ValueError(f"weights must sum to 1 within {_WEIGHT_SUM_TOL}, got {w.sum()!r}")
    return w


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


class GaussianMixture:
    """Finite mixture of non-degenerate Gaussians.

    Covariances must be strictly positive definite; distributions supported
    on lower-dimensional subspaces belong in :class:`DegenerateGaussian`.
    """

    kind = "gaussian_mixture"

    def __init__(self, weights, means, covariances):
        self.weights = _check_weights(weights)
        self.means = np.asarray(means, dtype=float)
        self.covariances = np.asarray(covariances, dtype=float)
        if self.means.ndim != 2:
            raise ValueError("means must have shape (k, d)")
        k, d = self.means.shape
        if self.weights.shape != (k,):
            raise ValueError("weights and means disagree on component count")
        if self.covariances.shape != (k, d, d):
            raise ValueError("covariances must have shape (k, d, d)")
        asym = np.abs(self.covariances - np.swapaxes(self.covariances, 1, 2)).max()
        if asym > _SYMMETRY_TOL:
            raise ValueError(f"covariances must be symmetric within {_SYMMETRY_TOL}")
        self.dim = d
        # Eigendecompositions make (Sigma + v I)^{-1} cheap for every v >= 0.
        self._eigvals, self._eigvecs = np.linalg.eigh(self.covariances)
        if np.any(self._eigvals <= 0.0):
            raise ValueError("covariances must be positive definite")
        self._log_weights = np.log(self.weights)
        _freeze(self.weights, self.means, self.covariances, self._eigvals, self._eigvecs)

    def _eval(self, variance, pts, with_derivative=False):
        """Responsibilities-weighted score of the mixture smoothed by an
        isotropic variance, optionally with its derivative in that variance."""
        if variance < 0.0:
            raise ValueError("smoothing variance must be >= 0")
        lam = self._eigvals + variance  # (k, d)
        if np.any(lam <= 0.0):
            raise ValueError("degenerate at sigma zero")
        diff = pts[:, None, :] - self.means[None, :, :]  # (n, k, d)
        y = np.einsum("kij,nki->nkj", self._eigvecs, diff)  # eigenbasis coords
        z = y / lam
        maha = np.einsum("nkj,nkj->nk", y, z)
        log_comp = self._log_weights - 0.5 * (
            self.dim * _LOG_2PI + np.log(lam).sum(axis=1) + maha
        )
        log_norm = logsumexp(log_comp, axis=1, keepdims=True)
        resp = np.exp(log_comp - log_norm)  # (n, k)
        comp_score = -np.einsum("kij,nkj->nki", self._eigvecs, z)
        score = np.einsum("nk,nkd->nd", resp, comp_score)
        if not with_derivative:
            return score, log_norm[:, 0], None
        # d/dv of each component log-density and score
        dlogq = 0.5 * (np.einsum("nkj,nkj->nk", z, z) - (1.0 / lam).sum(axis=1))
        dresp = resp * (dlogq - np.einsum("nk,nk->n", resp, dlogq)[:, None])
        dcomp_score = np.einsum("kij,nkj->nki", self._eigvecs, z / lam)
        dscore = np.einsum("nk,nkd->nd", dresp, comp_score) + np.einsum(
            "nk,nkd->nd", resp, dcomp_score
        )
        return score, log_norm[:, 0], dscore

    def smoothed_score(self, sigma, x):
        """Score of the mixture convolved with ``N(0, sigma^2 I)``."""
        pts, single = _as_batch(x, self.dim)
        score, _, _ = self._eval(float(sigma) ** 2, pts)
        return _unbatch(score, single)

    def score_sigma_derivative(self, sigma, x):
        """Exact derivative of ``smoothed_score`` with respect to sigma."""
        sigma = float(sigma)
        pts, single = _as_batch(x, self.dim)
        _, _, dscore_dv = self._eval(sigma**2, pts, with_derivative=True)
        return _unbatch(2.0 * sigma * dscore_dv, single)

    def h_gamma(self, gamma, x):
        """Extended score at smoothing variance gamma, in closed form."""
        gamma = float(gamma)
        if gamma <= 0.0:
            raise ValueError("gamma must be positive")
        pts, single = _as_batch(x, self.dim)
        score, _, dscore_dv = self._eval(gamma, pts, with_derivative=True)
        return _unbatch((1.0 + gamma) * score + gamma * dscore_dv, single)

    def h0(self, x):
        """Small-smoothing limit of the extended score (the plain score)."""
        return self.smoothed_score(0.0, x)

    def smoothed_logpdf(self, sigma, x):
        pts, single = _as_batch(x, self.dim)
        _, logpdf, _ = self._eval(float(sigma) ** 2, pts)
        return _unbatch(logpdf, single)

    def marginal_cdf(self, axis, values, sigma=0.0):
        """CDF of one coordinate of the smoothed mixture."""
        values = np.asarray(values, dtype=float)
        var = self.covariances[:, axis, axis] + float(sigma) ** 2
        std = np.sqrt(var)
        args = (values[..., None] - self.means[:, axis]) / std
        return ndtr(args) @ self.weights

    def convolved(self, sigma):
        if sigma == 0.0:
            return self
        covs = self.covariances + float(sigma) ** 2 * np.eye(self.dim)
        return GaussianMixture(self.weights, self.means, covs)

    def sample(self, n, rng):
        idx = rng.choice(self.weights.size, size=n, p=self.weights)
        eps = rng.standard_normal((n, self.dim))
        scale = np.sqrt(self._eigvals[idx]) * eps
        return self.means[idx] + np.einsum("nij,nj->ni", self._eigvecs[idx], scale)

    def translated(self, shift):
        return GaussianMixture(self.weights, self.means + np.asarray(shift, dtype=float), self.covariances)


class DiracMixture:
    """Finite mixture of point masses."""

    kind = "dirac_mixture"

    def __init__(self, weights, locations):
        self.weights = _check_weights(weights)
        self.locations = np.asarray(locations, dtype=float)
        if self.locations.ndim != 2:
            raise ValueError("locations must have shape (k, d)")
        if self.weights.shape[0] != self.locations.shape[0]:
            raise ValueError("weights and locations disagree on atom count")
        k = self.locations.shape[0]
        if k > 1:
            gaps = self.locations[:, None, :] - self.locations[None, :, :]
            dists = np.linalg.norm(gaps, axis=-1)
            if dists[~np.eye(k, dtype=bool)].min() <= 0.0:
                raise ValueError("atom locations must be pairwise distinct")
        self.dim = self.locations.shape[1]
        self._log_weights = np.log(self.weights)
        _freeze(self.weights, self.locations)

    def _responsibilities(self, gamma, pts):
        diff = pts[:, None, :] - self.locations[None, :, :]  # (n, k, d)
        sq = np.einsum("nkd,nkd->nk", diff, diff)
        log_h = self._log_weights - sq / (2.0 * gamma)
        log_norm = logsumexp(log_h, axis=1, keepdims=True)
        return np.exp(log_h - log_norm), diff, sq, log_norm[:, 0]

    def smoothed_score_gamma(self, gamma, x):
        """Score of the mixture convolved with a Gaussian of variance gamma."""
        gamma = float(gamma)
        if gamma <= 0.0:
            raise ValueError("gamma must be positive")
        pts, single = _as_batch(x, self.dim)
        resp, diff, _, _ = self._responsibilities(gamma, pts)
        score = -np.einsum("nk,nkd->nd", resp, diff) / gamma
        return _unbatch(score, single)

    def smoothed_score(self, sigma, x):
        return self.smoothed_score_gamma(float(sigma) ** 2, x)

    def score_sigma_derivative(self, sigma, x):
        sigma = float(sigma)
        v = sigma**2
        if v <= 0.0:
            raise ValueError("sigma must be positive")
        pts, single = _as_batch(x, self.dim)
        resp, diff, sq, _ = self._responsibilities(v, pts)
        centered = sq - np.einsum("nk,nk->n", resp, sq)[:, None]
        bracket = 1.0 - centered / (2.0 * v)
        dscore_dv = np.einsum("nk,nkd->nd", resp * bracket, diff) / v**2
        return _unbatch(2.0 * sigma * dscore_dv, single)

    def h_gamma(self, gamma, x):
        """Extended score at smoothing variance gamma.

        Closed form: -sum_i w_i (x - mu_i) (1 + (|x-mu_i|^2 - m2) / (2 gamma^2))
        with m2 the responsibility-weighted mean of squared distances.
        """
        gamma = float(gamma)
        if gamma <= 0.0:
            raise ValueError("gamma must be positive")
        pts, single = _as_batch(x, self.dim)
        resp, diff, sq, _ = self._responsibilities(gamma, pts)
        centered = sq - np.einsum("nk,nk->n", resp, sq)[:, None]
        bracket = 1.0 + centered / (2.0 * gamma**2)
        value = -np.einsum("nk,nkd->nd", resp * bracket, diff)
        return _unbatch(value, single)

    def h0(self, x):
        """Nearest-atom pull field; co-nearest atoms share weight c_i / sum c_j."""
        pts, single = _as_batch(x, self.dim)
        out = np.empty_like(pts)
        for row, p in enumerate(pts):
            dists = np.linalg.norm(p - self.locations, axis=1)
            sel = dists <= dists.min() + tie_tolerance(p)
            if sel.sum() == 1:
                out[row] = -(p - self.locations[sel][0])
            else:
                z = self.weights[sel] / self.weights[sel].sum()
                out[row] = -z @ (p - self.locations[sel])
        return _unbatch(out, single)

    def smoothed_logpdf(self, sigma, x):
        v = float(sigma) ** 2
        if v <= 0.0:
            raise ValueError("sigma must be positive")
        pts, single = _as_batch(x, self.dim)
        _, _, _, log_norm = self._responsibilities(v, pts)
        logpdf = log_norm - 0.5 * self.dim * (_LOG_2PI + np.log(v))
        return _unbatch(logpdf, single)

    def convolved(self, sigma):
        sigma = float(sigma)
        if sigma <= 0.0:
            raise ValueError("convolved requires sigma > 0 for point masses")
        covs = np.broadcast_to(
            sigma**2 * np.eye(self.dim), (self.weights.size, self.dim, self.dim)
        ).copy()
        return GaussianMixture(self.weights, self.locations, covs)

    def sample(self, n, rng):
        idx = rng.choice(self.weights.size, size=n, p=self.weights)
        return self.locations[idx].copy()

    def translated(self, shift):
        return DiracMixture(self.weights, self.locations + np.asarray(shift, dtype=float))


class DegenerateGaussian:
    """Gaussian supported on a lower-dimensional affine subspace.

    The canonical frame has a positive-definite Gaussian on the first
    ``d1`` coordinates and a point mass at zero on the remaining ``d2``.
    An optional rigid transform (orthogonal rotation plus offset) places
    the canonical frame in ambient space; storing the transform avoids any
    pseudo-inverse convention for the singular covariance.
    """

    kind = "degenerate_gaussian"

    def __init__(self, active_mean, active_cov, degenerate_dim, rotation=None, offset=None):
        self.active_mean = np.asarray(active_mean, dtype=float)
        self.active_cov = np.asarray(active_cov, dtype=float)
        if self.active_mean.ndim != 1 or self.active_mean.size < 1:
            raise ValueError("active_mean must be a vector with d1 >= 1")
        d1 = self.active_mean.size
        if self.active_cov.shape != (d1, d1):
            raise ValueError("active_cov must have shape (d1, d1)")
        if np.abs(self.active_cov - self.active_cov.T).max() > _SYMMETRY_TOL:
            raise ValueError(f"active_cov must be symmetric within {_SYMMETRY_TOL}")
        if int(degenerate_dim) < 0:
            raise ValueError("degenerate_dim must be >= 0")
        self.degenerate_dim = int(degenerate_dim)
        self.active_dim = d1
        self.dim = d1 + self.degenerate_dim
        self._eigvals, self._eigvecs = np.linalg.eigh(self.active_cov)
        if np.any(self._eigvals <= 0.0):
            raise ValueError("active_cov must be positive definite")
        if rotation is None:
            self.rotation = None
        else:
            self.rotation = np.asarray(rotation, dtype=float)
            if self.rotation.shape != (self.dim, self.dim):
                raise ValueError("rotation must have shape (d, d)")
            err = np.abs(self.rotation.T @ self.rotation - np.eye(self.dim)).max()
            if err > _ORTHOGONALITY_TOL:
                raise ValueError(f"rotation must be orthogonal within {_ORTHOGONALITY_TOL}")
            _freeze(self.rotation)
        if offset is None:
            self.offset = None
        else:
            self.offset = np.asarray(offset, dtype=float)
            if self.offset.shape != (self.dim,):
                raise ValueError("offset must have shape (d,)")
            _freeze(self.offset)
        _freeze(self.active_mean, self.active_cov, self._eigvals, self._eigvecs)

    def _to_canonical(self, pts):
        if self.offset is not None:
            pts = pts - self.offset
        if self.rotation is not None:
            pts = pts @ self.rotation  # rows times R equals R^T applied to columns
        return pts

    def _field_to_ambient(self, field):
        if self.rotation is not None:
            field = field @ self.rotation.T
        return field

    def _active_solve(self, diff, variance, power=1):
        lam = (self._eigvals + variance) ** power
        y = diff @ self._eigvecs
        return (y / lam) @ self._eigvecs.T

    def _split(self, pts):
        return pts[:, : self.active_dim], pts[:, self.active_dim :]

    def smoothed_score(self, sigma, x):
        sigma = float(sigma)
        pts, single = _as_batch(x, self.dim)
        y = self._to_canonical(pts)
        y1, y2 = self._split(y)
        if sigma == 0.0:
            if self.degenerate_dim > 0:
                raise ValueError("degenerate at sigma zero")
            field = -self._active_solve(y1 - self.active_mean, 0.0)
        else:
            v = sigma**2
            s1 = -self._active_solve(y1 - self.active_mean, v)
            s2 = -y2 / v
            field = np.concatenate([s1, s2], axis=1)
        return _unbatch(self._field_to_ambient(field), single)

    def score_sigma_derivative(self, sigma, x):
        sigma = float(sigma)
        v = sigma**2
        if v <= 0.0:
            raise ValueError("sigma must be positive")
        pts, single = _as_batch(x, self.dim)
        y = self._to_canonical(pts)
        y1, y2 = self._split(y)
        d1 = self._active_solve(y1 - self.active_mean, v, power=2)
        d2 = y2 / v**2
        field = 2.0 * sigma * np.concatenate([d1, d2], axis=1)
        return _unbatch(self._field_to_ambient(field), single)

    def h_gamma(self, gamma, x):
        gamma = float(gamma)
        if gamma <= 0.0:
            raise ValueError("gamma must be positive")
        pts, single = _as_batch(x, self.dim)
        y = self._to_canonical(pts)
        y1, y2 = self._split(y)
        diff = y1 - self.active_mean
        s1 = -(1.0 + gamma) * self._active_solve(diff, gamma) + gamma * self._active_solve(
            diff, gamma, power=2
        )
        field = np.concatenate([s1, -y2], axis=1)
        return _unbatch(self._field_to_ambient(field), single)

    def h0(self, x):
        """Canonical-frame field (-Sigma1^{-1}(x1 - mu1), -x2), conjugated
        by the stored rigid transform when present."""
        pts, single = _as_batch(x, self.dim)
        y = self._to_canonical(pts)
        y1, y2 = self._split(y)
        field = np.concatenate([-self._active_solve(y1 - self.active_mean, 0.0), -y2], axis=1)
        return _unbatch(self._field_to_ambient(field), single)

    def smoothed_logpdf(self, sigma, x):
        v = float(sigma) ** 2
        if v <= 0.0 and self.degenerate_dim > 0:
            raise ValueError("degenerate at sigma zero")
        pts, single = _as_batch(x, self.dim)
        y = self._to_canonical(pts)
        y1, y2 = self._split(y)
        diff = y1 - self.active_mean
        lam = self._eigvals + v
        proj = diff @ self._eigvecs
        logpdf = -0.5 * (
            self.active_dim * _LOG_2PI
            + np.log(lam).sum()
            + np.einsum("nj,nj->n", proj / lam, proj)
        )
        if self.degenerate_dim > 0:
            logpdf = logpdf - 0.5 * (
                self.degenerate_dim * (_LOG_2PI + np.log(v))
                + np.einsum("nj,nj->n", y2, y2) / v
            )
        return _unbatch(logpdf, single)

    def _ambient_mean_cov(self, variance):
        mean = np.concatenate([self.active_mean, np.zeros(self.degenerate_dim)])
        cov = np.zeros((self.dim, self.dim))
        cov[: self.active_dim, : self.active_dim] = self.active_cov
        cov[np.arange(self.dim), np.arange(self.dim)] += variance
        if self.rotation is not None:
            mean = self.rotation @ mean
            cov = self.rotation @ cov @ self.rotation.T
        if self.offset is not None:
            mean = mean + self.offset
        return mean, cov

    def convolved(self, sigma):
        sigma = float(sigma)
        if sigma <= 0.0:
            raise ValueError("convolved requires sigma > 0 for degenerate models")
        mean, cov = self._ambient_mean_cov(sigma**2)
        return GaussianMixture([1.0], mean[None, :], cov[None, :, :])

    def sample(self, n, rng):
        eps = rng.standard_normal((n, self.active_dim))
        y1 = self.active_mean + (np.sqrt(self._eigvals) * eps) @ self._eigvecs.T
        y = np.concatenate([y1, np.zeros((n, self.degenerate_dim))], axis=1)
        if self.rotation is not None:
            y = y @ self.rotation.T
        if self.offset is not None:
            y = y + self.offset
        return y

    def translated(self, shift):
        shift = np.asarray(shift, dtype=float)
        offset = shift if self.offset is None else self.offset + shift
        return DegenerateGaussian(
            self.active_mean, self.active_cov, self.degenerate_dim, self.rotation, offset
        )


class ProductModel:
    """Product measure over contiguous disjoint coordinate blocks.

    Scores and extended scores of a product are the concatenation of the
    per-factor values, so every operation dispatches blockwise.
    """

    kind = "product"

    def __init__(self, factors):
        if not factors:
            raise ValueError("product needs at least one factor")
        self.factors = tuple(factors)
        dims = [f.dim for f in self.factors]
        edges = np.concatenate([[0], np.cumsum(dims)])
        self._slices = [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]
        self.dim = int(edges[-1])

    def _concat(self, op_name, pts, *args):
        parts = []
        for factor, sl in zip(self.factors, self._slices):
            op = getattr(factor, op_name, None)
            if op is None:
                raise ValueError(f"factor {factor.kind} does not support {op_name}")
            parts.append(op(*args, pts[:, sl]))
        return np.concatenate(parts, axis=1)

    def smoothed_score(self, sigma, x):
        pts, single = _as_batch(x, self.dim)
        return _unbatch(self._concat("smoothed_score", pts, sigma), single)

    def score_sigma_derivative(self, sigma, x):
        pts, single = _as_batch(x, self.dim)
        return _unbatch(self._concat("score_sigma_derivative", pts, sigma), single)

    def h_gamma(self, gamma, x):
        pts, single = _as_batch(x, self.dim)
        return _unbatch(self._concat("h_gamma", pts, gamma), single)

    def h0(self, x):
        pts, single = _as_batch(x, self.dim)
        parts = [f.h0(pts[:, sl]) for f, sl in zip(self.factors, self._slices)]
        return _unbatch(np.concatenate(parts, axis=1), single)

    def smoothed_logpdf(self, sigma, x):
        pts, single = _as_batch(x, self.dim)
        total = sum(
            f.smoothed_logpdf(sigma, pts[:, sl]) for f, sl in zip(self.factors, self._slices)
        )
        return _unbatch(total, single)

    def convolved(self, sigma):
        return ProductModel([f.convolved(sigma) for f in self.factors])

    def sample(self, n, rng):
        return np.concatenate([f.sample(n, rng) for f in self.factors], axis=1)

    def translated(self, shift):
        shift = np.asarray(shift, dtype=float)
        return ProductModel(
            [f.translated(shift[sl]) for f, sl in zip(self.factors, self._slices)]
        )


class RadialGaussianMixture:
    """Mixture of ring-shaped densities in the plane.

    Each ring is realised as ``n_angles`` isotropic Gaussians of the given
    variance placed uniformly on the circle of the given radius; the
    discretisation converges quickly and keeps every score in closed form.
    """

    kind = "radial"

    def __init__(self, centers, radius, variance, n_angles=256):
        self.centers = np.asarray(centers, dtype=float)
        if self.centers.ndim != 2 or self.centers.shape[1] != 2:
            raise ValueError("centers must have shape (m, 2)")
        if radius <= 0.0 or variance <= 0.0:
            raise ValueError("radius and variance must be positive")
        if int(n_angles) < 16:
            raise ValueError("n_angles must be at least 16")
        self.radius = float(radius)
        self.variance = float(variance)
        self.n_angles = int(n_angles)
        self.dim = 2
        self._mixture = self.as_gaussian_mixture()
        _freeze(self.centers)

    def as_gaussian_mixture(self):
        """Discretise every ring into equally weighted isotropic components."""
        angles = 2.0 * np.pi * np.arange(self.n_angles) / self.n_angles
        ring = self.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        means = (self.centers[:, None, :] + ring[None, :, :]).reshape(-1, 2)
        k = means.shape[0]
        weights = np.full(k, 1.0 / k)
        covs = np.broadcast_to(self.variance * np.eye(2), (k, 2, 2)).copy()
        return GaussianMixture(weights, means, covs)

    def smoothed_score(self, sigma, x):
        return self._mixture.smoothed_score(sigma, x)

    def score_sigma_derivative(self, sigma, x):
        return self._mixture.score_sigma_derivative(sigma, x)

    def h_gamma(self, gamma, x):
        return self._mixture.h_gamma(gamma, x)

    def h0(self, x):
        return self._mixture.h0(x)

    def smoothed_logpdf(self, sigma, x):
        return self._mixture.smoothed_logpdf(sigma, x)

    def convolved(self, sigma):
        return self._mixture.convolved(sigma)

    def sample(self, n, rng):
        return self._mixture.sample(n, rng)

    def translated(self, shift):
        return RadialGaussianMixture(
            self.centers + np.asarray(shift, dtype=float),
            self.radius,
            self.variance,
            self.n_angles,
        )


def model_to_dict(model):
    """Serialise a model to a JSON-compatible dictionary."""
    if isinstance(model, GaussianMixture):
        body = {
            "weights": model.weights.tolist(),
            "means": model.means.tolist(),
            "covariances": model.covariances.tolist(),
        }
    elif isinstance(model, DiracMixture):
        body = {"weights": model.weights.tolist(), "locations": model.locations.tolist()}
    elif isinstance(model, DegenerateGaussian):
        body = {
            "active_mean": model.active_mean.tolist(),
            "active_cov": model.active_cov.tolist(),
            "degenerate_dim": model.degenerate_dim,
        }
        if model.rotation is not None:
            body["rotation"] = model.rotation.tolist()
        if model.offset is not None:
            body["offset"] = model.offset.tolist()
    elif isinstance(model, ProductModel):
        body = {"factors": [model_to_dict(f) for f in model.factors]}
    elif isinstance(model, RadialGaussianMixture):
        body = {
            "centers": model.centers.tolist(),
            "radius": model.radius,
            "variance": model.variance,
            "n_angles": model.n_angles,
        }
    else:
        raise TypeError(f"cannot serialise {type(model).__name__}")
    return {"schema_version": MODEL_SCHEMA_VERSION, "kind": model.kind, **body}


def model_from_dict(data):
    version = data.get("schema_version", MODEL_SCHEMA_VERSION)
    if version != MODEL_SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema version {version!r}")
    kind = data.get("kind")
    if kind == "gaussian_mixture":
        return GaussianMixture(data["weights"], data["means"], data["covariances"])
    if kind == "dirac_mixture":
        return DiracMixture(data["weights"], data["locations"])
    if kind == "degenerate_gaussian":
        return DegenerateGaussian(
            data["active_mean"],
            data["active_cov"],
            data["degenerate_dim"],
            data.get("rotation"),
            data.get("offset"),
        )
    if kind == "product":
        return ProductModel([model_from_dict(f) for f in data["factors"]])
    if kind == "radial":
        return RadialGaussianMixture(
            data["centers"], data["radius"], data["variance"], data.get("n_angles", 256)
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
