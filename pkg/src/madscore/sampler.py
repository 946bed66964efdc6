"""Time schedules and the two deterministic inference loops.

Both loops integrate the probability-flow dynamics with the noise level
used directly as the time variable, so one Euler step from t_i to t_{i+1}
multiplies the score by (t_{i+1} - t_i) * t_i.  The standard loop uses the
plain score; the manifold-attracted loop evaluates the extended-score
combination with a per-step smoothing variance gamma(t_i) and correction
factor m(t_i), which reproduces the standard loop exactly on point-mass
targets and bit-for-bit when b = 0.

Initial points are drawn from N(0, t_0^2 I) with a counter-based Philox
generator so that seeds are portable across platforms.  Every trajectory is
a pure function of (oracle, schedule, params, seed).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .xscore import (
    CorrectionSingularError,
    MadParams,
    correction_factor,
    fd_sigma_derivative,
    solve_gamma,
)

TRAJECTORY_SCHEMA_VERSION = 1
DIVERGENCE_FACTOR = 1e6

DEFAULT_STEPS = 40
DEFAULT_SIGMA_MIN = 0.002
DEFAULT_SIGMA_MAX = 80.0
DEFAULT_RHO = 7.0


class DivergenceError(ArithmeticError):
    """Raised when an iterate leaves the finite trust region."""

    def __init__(self, step, norm):
        self.step = step
        self.norm = norm
        super().__init__(f"diverged at step {step}: iterate norm {norm:.3e}")


@dataclass(frozen=True)
class TimeSchedule:
    """Strictly decreasing times t_0 > ... > t_N with t_N = 0.

    Times double as noise levels.  The relative step (t_i - t_{i+1}) / t_i
    must stay inside (0, 1) before the final step so that point-mass
    targets contract geometrically.
    """

    times: np.ndarray
    sigma_min: float
    sigma_max: float
    rho: float | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or times.size < 3:
            raise ValueError("schedule needs at least times (t_0, t_1, 0)")
        if np.any(np.diff(times) >= 0.0):
            raise ValueError("times must be strictly decreasing")
        if times[-1] != 0.0:
            raise ValueError("final time must be exactly 0")
        if abs(times[0] - self.sigma_max) > 1e-12 * self.sigma_max:
            raise ValueError("t_0 must equal sigma_max")
        if abs(times[-2] - self.sigma_min) > 1e-12 * max(self.sigma_min, 1.0):
            raise ValueError("t_{N-1} must equal sigma_min")
        ratios = (times[:-2] - times[1:-1]) / times[:-2]
        if np.any(ratios <= 0.0) or np.any(ratios >= 1.0):
            raise ValueError("relative steps must lie in (0, 1) before the final step")
        times.setflags(write=False)

    @property
    def n_steps(self):
        return self.times.size - 1

    def to_dict(self):
        return {
            "n_steps": self.n_steps,
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "rho": self.rho,
        }


def edm_schedule(
    n_steps=DEFAULT_STEPS,
    sigma_min=DEFAULT_SIGMA_MIN,
    sigma_max=DEFAULT_SIGMA_MAX,
    rho=DEFAULT_RHO,
):
    """Power-warped interpolation between sigma_max and sigma_min plus a
    final step to zero: t_i = (s_max^(1/rho) + i/(N-1) (s_min^(1/rho) -
    s_max^(1/rho)))^rho for i < N, t_N = 0."""
    n_steps = int(n_steps)
    if n_steps < 2:
        raise ValueError("need at least 2 steps")
    if not 0.0 < sigma_min < sigma_max:
        raise ValueError("need 0 < sigma_min < sigma_max")
    if rho < 1.0:
        raise ValueError("rho must be >= 1")
    hi = sigma_max ** (1.0 / rho)
    lo = sigma_min ** (1.0 / rho)
    ramp = np.arange(n_steps) / (n_steps - 1)
    times = np.concatenate([(hi + ramp * (lo - hi)) ** rho, [0.0]])
    # pin the endpoints exactly; the power round trip can be off by an ulp
    times[0] = sigma_max
    times[n_steps - 1] = sigma_min
    return TimeSchedule(times=times, sigma_min=sigma_min, sigma_max=sigma_max, rho=rho)


def arctan_schedule(n_steps, sigma_min=DEFAULT_SIGMA_MIN, sigma_max=DEFAULT_SIGMA_MAX):
    """Schedule with times uniform in 2 * arctan(t).

    For a unit-variance Gaussian target this spacing minimises the Euler
    amplitude bias over all N-step schedules, so it is the right choice
    when checking sampler fidelity against exact Gaussian statistics.
    """
    n_steps = int(n_steps)
    if n_steps < 2:
        raise ValueError("need at least 2 steps")
    if not 0.0 < sigma_min < sigma_max:
        raise ValueError("need 0 < sigma_min < sigma_max")
    v = np.linspace(2.0 * np.arctan(sigma_max), 2.0 * np.arctan(sigma_min), n_steps)
    times = np.concatenate([np.tan(v / 2.0), [0.0]])
    times[0] = sigma_max
    times[n_steps - 1] = sigma_min
    return TimeSchedule(times=times, sigma_min=sigma_min, sigma_max=sigma_max)


@dataclass
class Trajectory:
    """Iterates of one inference run with per-step diagnostics."""

    points: np.ndarray  # (N+1, d)
    times: np.ndarray  # (N+1,)
    scores: np.ndarray  # (N, d)
    gammas: np.ndarray | None  # (N,) for the attracted mode
    corrections: np.ndarray | None  # (N,)
    score_derivatives: np.ndarray | None  # (N, d)
    seed: int
    mode: str
    params: dict

    @property
    def endpoint(self):
        return self.points[-1]

    @property
    def n_steps(self):
        return self.points.shape[0] - 1


def initial_point(schedule, dim, seed):
    """Latent draw x_0 ~ N(0, t_0^2 I) from a counter-based generator."""
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    return schedule.times[0] * rng.standard_normal(dim)


def _check_iterate(x, step, sigma_max):
    norm = float(np.linalg.norm(x))
    if not np.isfinite(norm) or norm > DIVERGENCE_FACTOR * sigma_max:
        raise DivergenceError(step, norm)


def sample_standard(oracle, schedule, seed):
    """Plain Euler probability-flow inference."""
    dim = oracle.dim
    times = schedule.times
    n = schedule.n_steps
    x = initial_point(schedule, dim, seed)
    points = np.empty((n + 1, dim))
    scores = np.empty((n, dim))
    points[0] = x
    for i in range(n):
        t, t_next = times[i], times[i + 1]
        s = np.asarray(oracle.evaluate(t, x), dtype=float)
        scores[i] = s
        x = x - (t_next - t) * t * s
        _check_iterate(x, i, schedule.sigma_max)
        points[i + 1] = x
    return Trajectory(
        points=points,
        times=times.copy(),
        scores=scores,
        gammas=None,
        corrections=None,
        score_derivatives=None,
        seed=int(seed),
        mode="standard",
        params={},
    )


def _mad_step_plan(params, schedule):
    """Per-step (gamma, m, score coefficient, derivative coefficient).

    The coefficients divide by the correction denominator directly so that
    b = 0 collapses to the standard update bit-for-bit.
    """
    times = schedule.times
    plan = []
    for i in range(schedule.n_steps):
        t = times[i]
        gamma = solve_gamma(params, t)
        try:
            m = correction_factor(gamma, params.b, t, params.m_guard)
        except CorrectionSingularError as err:
            err.step = i
            raise
        denominator = 1.0 + gamma - params.b * gamma / (t * t)
        score_coeff = (1.0 + gamma) / denominator
        deriv_coeff = params.b * gamma / (2.0 * t * denominator)
        plan.append((gamma, m, score_coeff, deriv_coeff))
    return plan


def sample_mad(oracle, schedule, params, seed, derivative="fd"):
    """Manifold-attracted inference.

    Per step: gamma_i solves the schedule equation at t_i, the oracle gives
    the score s_i and its noise-level derivative s'_i (forward difference
    by default, the oracle's analytic derivative with derivative="analytic"),
    and the update is

        x_{i+1} = x_i - m_i (t_{i+1} - t_i) t_i ((1 + gamma_i) s_i
                  + b gamma_i / (2 t_i) s'_i).
    """
    if not isinstance(params, MadParams):
        raise TypeError("params must be MadParams")
    dim = oracle.dim
    times = schedule.times
    n = schedule.n_steps
    plan = _mad_step_plan(params, schedule)
    x = initial_point(schedule, dim, seed)
    points = np.empty((n + 1, dim))
    scores = np.empty((n, dim))
    derivs = np.zeros((n, dim))
    gammas = np.empty(n)
    corrections = np.empty(n)
    points[0] = x
    for i in range(n):
        t, t_next = times[i], times[i + 1]
        gamma, m, score_coeff, deriv_coeff = plan[i]
        gammas[i] = gamma
        corrections[i] = m
        s = np.asarray(oracle.evaluate(t, x), dtype=float)
        scores[i] = s
        combined = score_coeff * s
        if deriv_coeff != 0.0:
            if derivative == "analytic":
                s_prime = oracle.sigma_derivative(t, x)
                if s_prime is None:
                    s_prime = fd_sigma_derivative(oracle, t, x, params.delta)
                s_prime = np.asarray(s_prime, dtype=float)
            elif derivative == "fd":
                s_prime = fd_sigma_derivative(oracle, t, x, params.delta)
            else:
                raise ValueError(f"unknown derivative mode {derivative!r}")
            derivs[i] = s_prime
            combined = combined + deriv_coeff * s_prime
        x = x - (t_next - t) * t * combined
        _check_iterate(x, i, schedule.sigma_max)
        points[i + 1] = x
    return Trajectory(
        points=points,
        times=times.copy(),
        scores=scores,
        gammas=gammas,
        corrections=corrections,
        score_derivatives=derivs,
        seed=int(seed),
        mode="mad",
        params=params.to_dict() | {"derivative": derivative},
    )


def run_batch(
    oracle,
    schedule,
    seeds,
    mode="standard",
    params=None,
    derivative="fd",
    max_workers=None,
):
    """Run one trajectory per seed; results are ordered by seed index
    regardless of completion order."""
    if mode == "standard":
        def one(seed):
            return sample_standard(oracle, schedule, seed)
    elif mode == "mad":
        if params is None:
            raise ValueError("mad mode requires params")
        def one(seed):
            return sample_mad(oracle, schedule, params, seed, derivative=derivative)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    seeds = list(seeds)
    if max_workers is not None and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(one, seeds))
    return [one(seed) for seed in seeds]


class MeansReference:
    """Distances to a finite set of reference points."""

    def __init__(self, centers):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))

    def assign(self, x):
        return int(np.argmin(np.linalg.norm(self.centers - x, axis=1)))

    def distance(self, x):
        return float(np.linalg.norm(self.centers - x, axis=1).min())


class AffineReference:
    """Distance to an affine subspace spanned by orthonormal basis rows."""

    def __init__(self, point, basis):
        self.point = np.asarray(point, dtype=float)
        basis = np.atleast_2d(np.asarray(basis, dtype=float))
        norms = np.linalg.norm(basis, axis=1)
        self.basis = basis / norms[:, None]

    def tangential_offset(self, x):
        return (np.asarray(x, dtype=float) - self.point) @ self.basis.T

    def distance(self, x):
        diff = np.asarray(x, dtype=float) - self.point
        residual = diff - (diff @ self.basis.T) @ self.basis
        return float(np.linalg.norm(residual))


class CircleReference:
    """Distance to a circle (sphere in the plane spanned by all coordinates)."""

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def distance(self, x):
        return float(abs(np.linalg.norm(np.asarray(x, dtype=float) - self.center) - self.radius))


class RingsReference:
    """Distance to the nearest of several circles sharing one radius."""

    def __init__(self, centers, radius):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.radius = float(radius)

    def distance(self, x):
        radii = np.linalg.norm(self.centers - np.asarray(x, dtype=float), axis=1)
        return float(np.abs(radii - self.radius).min())


def trajectory_metrics(trajectory, reference=None):
    """Endpoint and step-size diagnostics, plus reference distances."""
    steps = np.diff(trajectory.points, axis=0)
    step_norms = np.linalg.norm(steps, axis=1)
    metrics = {
        "endpoint": trajectory.endpoint.tolist(),
        "endpoint_norm": float(np.linalg.norm(trajectory.endpoint)),
        "max_step_norm": float(step_norms.max()),
        "mean_step_norm": float(step_norms.mean()),
        "n_steps": trajectory.n_steps,
        "mode": trajectory.mode,
        "seed": trajectory.seed,
    }
    if trajectory.corrections is not None:
        metrics["max_correction"] = float(trajectory.corrections.max())
        metrics["min_correction"] = float(trajectory.corrections.min())
    if reference is not None:
        metrics["reference_distance"] = reference.distance(trajectory.endpoint)
        if isinstance(reference, MeansReference):
            metrics["basin"] = reference.assign(trajectory.endpoint)
    return metrics


def batch_summary(trajectories, reference=None):
    """Aggregate endpoint statistics of a batch, cross-checkable per row."""
    endpoints = np.stack([t.endpoint for t in trajectories])
    rows = [trajectory_metrics(t, reference) for t in trajectories]
    summary = {
        "schema_version": TRAJECTORY_SCHEMA_VERSION,
        "n_trajectories": len(trajectories),
        "endpoint_mean": endpoints.mean(axis=0).tolist(),
        "endpoint_std": endpoints.std(axis=0, ddof=0).tolist(),
    }
    if reference is not None:
        dists = np.array([r["reference_distance"] for r in rows])
        summary["reference_rms_distance"] = float(np.sqrt(np.mean(dists**2)))
    if isinstance(reference, MeansReference):
        basins = {}
        assignment = np.array([r["basin"] for r in rows])
        for idx in range(reference.centers.shape[0]):
            members = endpoints[assignment == idx]
            entry = {"count": int(members.shape[0])}
            if members.shape[0] > 1:
                entry["mean"] = members.mean(axis=0).tolist()
                entry["std"] = members.std(axis=0, ddof=0).tolist()
            basins[str(idx)] = entry
        summary["basins"] = basins
    if trajectories and trajectories[0].corrections is not None:
        summary["max_correction"] = float(max(t.corrections.max() for t in trajectories))
        summary["min_correction"] = float(min(t.corrections.min() for t in trajectories))
    return summary


def _format_float(value):
    return repr(float(value))


def _header_lines(config):
    lines = [f"# schema_version: {TRAJECTORY_SCHEMA_VERSION}"]
    if config:
        lines.append("# config: " + json.dumps(config, sort_keys=True))
    return lines


def write_trajectory_csv(trajectory, path, config=None):
    """One row per step: step, t, gamma, m, then the iterate components.

    The coefficients on a row belong to the step leaving that row's state;
    standard-mode rows and the final row leave them empty.
    """
    dim = trajectory.points.shape[1]
    columns = ["step", "t", "gamma", "m"] + [f"x{j}" for j in range(dim)]
    lines = _header_lines(config)
    lines.append(",".join(columns))
    n = trajectory.n_steps
    for i in range(n + 1):
        if trajectory.gammas is not None and i < n:
            gamma = _format_float(trajectory.gammas[i])
            m = _format_float(trajectory.corrections[i])
        else:
            gamma = m = ""
        cells = [str(i), _format_float(trajectory.times[i]), gamma, m]
        cells += [_format_float(v) for v in trajectory.points[i]]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_endpoints_csv(trajectories, path, config=None):
    """One row per trajectory: seed then endpoint components."""
    if not trajectories:
        raise ValueError("no trajectories to write")
    dim = trajectories[0].points.shape[1]
    columns = ["seed"] + [f"x{j}" for j in range(dim)]
    lines = _header_lines(config)
    lines.append(",".join(columns))
    for t in trajectories:
        cells = [str(t.seed)] + [_format_float(v) for v in t.endpoint]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_batch_summary(summary, path, config=None):
    payload = dict(summary)
    if config is not None:
        payload["config"] = config
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
