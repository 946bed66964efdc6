"""Independent brute-force validators for the closed-form operations.

Nothing in here shares code paths with the analytic models: smoothed scores
are recomputed by trapezoidal convolution, derivatives by central
differences, nearest-atom selection by a direct distance scan, and sampler
output by classical statistics.  Disagreement beyond stated tolerances is a
test failure, so these routines favour transparency over speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .models import tie_tolerance


@dataclass(frozen=True)
class QuadratureGrid:
    """Rectangular trapezoid grid for low-dimensional convolutions."""

    bounds: tuple  # ((lo, hi), ...) per axis
    nodes: tuple  # node count per axis
    max_total_nodes: int = 1 << 22

    def __post_init__(self):
        if len(self.bounds) != len(self.nodes):
            raise ValueError("bounds and nodes must have matching length")
        if len(self.bounds) > 2:
            raise ValueError("quadrature is restricted to one or two axes")
        for (lo, hi), n in zip(self.bounds, self.nodes):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError("bounds must be finite and increasing")
            if n < 64:
                raise ValueError("need at least 64 nodes per axis")
        total = int(np.prod(self.nodes))
        if total > self.max_total_nodes:
            raise ValueError(f"grid of {total} nodes exceeds cap {self.max_total_nodes}")

    def points_and_weights(self, stride=1):
        axes = []
        steps = []
        for (lo, hi), n in zip(self.bounds, self.nodes):
            axis = np.linspace(lo, hi, n)[::stride]
            axes.append(axis)
            steps.append(axis[1] - axis[0])
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        w = np.ones(pts.shape[0])
        # trapezoid endpoint halving per axis
        for k, axis in enumerate(axes):
            edge = np.ones(axis.size)
            edge[0] = edge[-1] = 0.5
            shape = [1] * len(axes)
            shape[k] = axis.size
            w = w * np.broadcast_to(edge.reshape(shape), [a.size for a in axes]).ravel()
        return pts, w * np.prod(steps)


def quadrature_score(logpdf, sigma, x, grid):
    """Smoothed score by direct numerical convolution.

    ``logpdf`` evaluates the unsmoothed log-density on a batch of points.
    Returns ``(score, error_estimate)`` where the estimate is the change
    under halving the node count.
    """
    sigma = float(sigma)
    if sigma <= 0.0:
        raise ValueError("quadrature smoothing requires sigma > 0")
    x = np.asarray(x, dtype=float)

    def evaluate(stride):
        pts, w = grid.points_and_weights(stride)
        diff = pts - x
        log_kernel = -np.einsum("nd,nd->n", diff, diff) / (2.0 * sigma**2)
        integrand = w * np.exp(logpdf(pts) + log_kernel)
        density = integrand.sum()
        if not density > 0.0:
            raise ValueError("quadrature density underflowed; widen the grid")
        gradient = (integrand[:, None] * diff / sigma**2).sum(axis=0)
        return gradient / density

    fine = evaluate(1)
    coarse = evaluate(2)
    return fine, float(np.linalg.norm(fine - coarse))


def central_diff(fn, at, h, richardson=False):
    """Central difference of a scalar- or vector-valued function of a scalar."""
    at = float(at)
    h = float(h)

    def diff(step):
        hi = np.asarray(fn(at + step), dtype=float)
        lo = np.asarray(fn(at - step), dtype=float)
        if not (np.all(np.isfinite(hi)) and np.all(np.isfinite(lo))):
            raise ValueError("non-finite evaluation in central difference")
        return (hi - lo) / (2.0 * step)

    estimate = diff(h)
    if richardson:
        estimate = (4.0 * diff(h / 2.0) - estimate) / 3.0
    return estimate


def voronoi_brute(locations, weights, x, tie_tol=None):
    """Direct distance scan for the nearest-atom set and its limit weights.

    Returns ``(indices, z)`` where indices lists atoms within the tie
    tolerance of the minimum distance and z carries their normalised
    weights (a single interior atom gets z = 1).
    """
    locations = np.asarray(locations, dtype=float)
    weights = np.asarray(weights, dtype=float)
    x = np.asarray(x, dtype=float)
    if locations.ndim != 2 or locations.shape[0] == 0:
        raise ValueError("need at least one atom")
    if tie_tol is None:
        tie_tol = tie_tolerance(x)
    dists = np.linalg.norm(locations - x, axis=1)
    sel = np.flatnonzero(dists <= dists.min() + tie_tol)
    if sel.size == 1:
        return sel, np.array([1.0])
    z = weights[sel] / weights[sel].sum()
    return sel, z


def ks_statistic(samples, cdf):
    """One-sample Kolmogorov-Smirnov statistic against an analytic CDF."""
    samples = np.sort(np.asarray(samples, dtype=float))
    n = samples.size
    values = np.asarray(cdf(samples), dtype=float)
    upper = np.arange(1, n + 1) / n - values
    lower = values - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def ks_critical_value(n, alpha=0.01):
    """Asymptotic critical value of the one-sample KS statistic."""
    return float(stats.kstwobign.isf(alpha) / np.sqrt(n))


@dataclass(frozen=True)
class StatReference:
    """Analytic expectations a sample batch is compared against."""

    mean: np.ndarray | None = None
    cov: np.ndarray | None = None
    marginal_cdfs: tuple = ()  # (axis, callable) pairs
    basin_centers: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def stat_tests(samples, reference, alpha=0.01):
    """Moment, KS, and basin-assignment comparisons for a sample batch."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n = samples.shape[0]
    if n < 100:
        raise ValueError("need at least 100 samples for the statistical report")
    report = {"n_samples": int(n), "dim": int(samples.shape[1])}

    if reference.mean is not None:
        mean = samples.mean(axis=0)
        ref_mean = np.asarray(reference.mean, dtype=float)
        report["moments"] = {
            "sample_mean": mean.tolist(),
            "reference_mean": ref_mean.tolist(),
            "mean_abs_error": float(np.abs(mean - ref_mean).max()),
        }
        if reference.cov is not None:
            cov = np.cov(samples.T).reshape(samples.shape[1], samples.shape[1])
            ref_cov = np.asarray(reference.cov, dtype=float)
            report["moments"]["sample_cov"] = cov.tolist()
            report["moments"]["reference_cov"] = ref_cov.tolist()
            report["moments"]["cov_rel_error"] = float(
                np.abs(cov - ref_cov).max() / max(np.abs(ref_cov).max(), 1e-300)
            )

    if reference.marginal_cdfs:
        ks_rows = []
        for axis, cdf in reference.marginal_cdfs:
            stat = ks_statistic(samples[:, axis], cdf)
            crit = ks_critical_value(n, alpha)
            ks_rows.append(
                {
                    "axis": int(axis),
                    "statistic": stat,
                    "critical_value": crit,
                    "alpha": alpha,
                    "pass": bool(stat < crit),
                }
            )
        report["ks"] = ks_rows

    if reference.basin_centers is not None:
        centers = np.asarray(reference.basin_centers, dtype=float)
        if centers.ndim == 1:
            centers = centers[:, None]
        dists = np.linalg.norm(samples[:, None, :] - centers[None, :, :], axis=2)
        assignment = dists.argmin(axis=1)
        basins = []
        for i, center in enumerate(centers):
            members = samples[assignment == i]
            row = {"center": center.tolist(), "count": int(members.shape[0])}
            if members.shape[0] > 1:
                row["mean"] = members.mean(axis=0).tolist()
                row["std"] = members.std(axis=0, ddof=0).tolist()
                row["spread"] = float(
                    np.sqrt(np.mean(np.sum((members - center) ** 2, axis=1)))
                )
            basins.append(row)
        report["basins"] = basins
        report["max_assignment_distance"] = float(dists.min(axis=1).max())

    return report
