"""Extended-score operator layer.

The extended score of a distribution p at smoothing variance gamma is

    (1 + gamma) * S(p * g_gamma) + gamma * d/dgamma S(p * g_gamma),

where S is the score operator and g_gamma an isotropic Gaussian of variance
gamma.  Because smoothing composes, S(p_sigma * g_gamma) equals the plain
smoothed score at effective noise level sqrt(sigma^2 + gamma), so the whole
operator is computable from any score oracle plus a derivative of the
oracle in its noise-level argument (analytic when the oracle has one,
forward finite difference otherwise).

This module also provides the inference-schedule ingredients: the root
solve for gamma(t) from sqrt(a * gamma^(2/p) + b * gamma) = t and the
per-step correction factor that makes the modified update reproduce the
standard update exactly on point-mass targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GAMMA_RESIDUAL_TOL = 1e-12
DEFAULT_M_GUARD = 1e-6
DEFAULT_FD_DELTA = 1e-4


class CorrectionSingularError(ArithmeticError):
    """Raised when the correction-factor denominator falls below the guard."""

    def __init__(self, gamma, b, t, denominator):
        self.gamma = gamma
        self.b = b
        self.t = t
        self.denominator = denominator
        super().__init__(
            f"correction singular: denominator {denominator:.3e} at "
            f"(gamma={gamma!r}, b={b!r}, t={t!r})"
        )


class OracleRangeError(ValueError):
    """Raised when an oracle is evaluated outside its validity range."""


@dataclass(frozen=True)
class MadParams:
    """Hyperparameters of manifold-attracted inference.

    ``a`` and ``b`` set how strongly the effective smoothing leans on the
    extended-score variance, ``p`` regulates how fast gamma(t) vanishes
    relative to the noise level, ``delta`` is the relative step of the
    forward-difference derivative, and ``m_guard`` bounds the correction
    denominator away from zero.  ``b = 0`` is accepted as the degeneration
    to plain score inference.
    """

    a: float = 1.0
    b: float = 1.0
    p: float = 1.0
    delta: float = DEFAULT_FD_DELTA
    m_guard: float = DEFAULT_M_GUARD

    def __post_init__(self):
        if not self.a > 0.0:
            raise ValueError("a must be positive")
        if self.b < 0.0:
            raise ValueError("b must be nonnegative")
        if not self.p > 0.0:
            raise ValueError("p must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not self.m_guard > 0.0:
            raise ValueError("m_guard must be positive")

    def to_dict(self):
        return {
            "a": self.a,
            "b": self.b,
            "p": self.p,
            "delta": self.delta,
            "m_guard": self.m_guard,
        }


@dataclass(frozen=True)
class StepCoefficients:
    """Per-step smoothing variance and correction factor."""

    t: float
    t_next: float
    gamma: float
    m: float

    def __post_init__(self):
        if not self.t > self.t_next >= 0.0:
            raise ValueError("times must satisfy t > t_next >= 0")
        if self.gamma < 0.0 or not np.isfinite(self.m) or self.m <= 0.0:
            raise ValueError("invalid step coefficients")


class ScoreOracle:
    """Behavioural contract: ``evaluate(sigma, x)`` approximates the score
    of the data distribution smoothed to noise level sigma.

    ``sigma_derivative`` returns the analytic derivative in sigma when the
    oracle has one and None otherwise; callers fall back to a forward
    difference.  Oracles are immutable and safe for concurrent evaluation.
    """

    dim = None
    sigma_min = 0.0
    sigma_max = np.inf

    def evaluate(self, sigma, x):
        raise NotImplementedError

    def sigma_derivative(self, sigma, x):
        return None

    def check_range(self, sigma):
        if not self.sigma_min <= sigma <= self.sigma_max:
            raise OracleRangeError(
                f"sigma {sigma!r} outside oracle validity range "
                f"[{self.sigma_min!r}, {self.sigma_max!r}]"
            )


class AnalyticScoreOracle(ScoreOracle):
    """Wrap an analytic model as a score oracle with exact derivatives."""

    def __init__(self, model, sigma_min=0.0, sigma_max=np.inf):
        self.model = model
        self.dim = model.dim
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)

    def evaluate(self, sigma, x):
        self.check_range(sigma)
        return self.model.smoothed_score(sigma, x)

    def sigma_derivative(self, sigma, x):
        self.check_range(sigma)
        return self.model.score_sigma_derivative(sigma, x)


class DiracScoreOracle(ScoreOracle):
    """Exact oracle of a single point mass: S(sigma, x) = -(x - mu) / sigma^2."""

    def __init__(self, location):
        self.location = np.asarray(location, dtype=float)
        self.dim = self.location.size

    def evaluate(self, sigma, x):
        if sigma <= 0.0:
            raise OracleRangeError("point-mass oracle requires sigma > 0")
        return -(np.asarray(x, dtype=float) - self.location) / float(sigma) ** 2

    def sigma_derivative(self, sigma, x):
        if sigma <= 0.0:
            raise OracleRangeError("point-mass oracle requires sigma > 0")
        return 2.0 * (np.asarray(x, dtype=float) - self.location) / float(sigma) ** 3


def solve_gamma(params, t):
    """Unique positive root of a * gamma^(2/p) + b * gamma = t^2.

    The left side is strictly increasing in gamma, so the root is unique;
    it is found by Newton steps safeguarded by a maintained bracket
    (the derivative is singular at gamma = 0 when p > 2, so pure Newton
    from the origin is not safe).
    """
    t = float(t)
    if not t > 0.0:
        raise ValueError("t must be positive")
    a, b, p = params.a, params.b, params.p
    target = t * t
    if b == 0.0:
        return (target / a) ** (p / 2.0)

    exponent = 2.0 / p

    def f(g):
        return a * g**exponent + b * g - target

    lo = 0.0
    hi = (target / a) ** (p / 2.0)
    # a * hi^(2/p) equals t^2 up to rounding; expand if rounding left f(hi) < 0
    for _ in range(64):
        if f(hi) >= 0.0:
            break
        hi *= 2.0
    else:
        raise AssertionError("failed to bracket gamma root")

    gamma = min(hi, target / b) if b > 0.0 else hi
    tol = GAMMA_RESIDUAL_TOL * target
    for _ in range(200):
        value = f(gamma)
        if abs(value) < tol:
            return gamma
        if value > 0.0:
            hi = gamma
        else:
            lo = gamma
        slope = a * exponent * gamma ** (exponent - 1.0) + b
        step = gamma - value / slope if slope > 0.0 and np.isfinite(slope) else None
        if step is None or not lo < step < hi:
            step = 0.5 * (lo + hi)
        gamma = step
    if abs(f(gamma)) < tol:
        return gamma
    raise AssertionError("gamma root solve did not converge")


def correction_factor(gamma, b, t, m_guard=DEFAULT_M_GUARD):
    """Per-step scaling (1 + gamma - b * gamma / t^2)^(-1).

    The denominator can approach zero or go negative when gamma(t) decays
    no faster than t^2, so it is guarded rather than silently inverted.
    """
    t = float(t)
    if not t > 0.0:
        raise ValueError("t must be positive")
    denominator = 1.0 + gamma - b * gamma / (t * t)
    if denominator < m_guard:
        raise CorrectionSingularError(gamma, b, t, denominator)
    return 1.0 / denominator


def step_coefficients(params, t, t_next):
    """Smoothing variance and correction factor for one inference step."""
    gamma = solve_gamma(params, t)
    m = correction_factor(gamma, params.b, t, params.m_guard)
    return StepCoefficients(t=float(t), t_next=float(t_next), gamma=gamma, m=m)


def fd_sigma_derivative(oracle, t, x, delta=DEFAULT_FD_DELTA):
    """Forward-difference derivative of the oracle in its noise level:
    (S((1 + delta) t, x) - S(t, x)) / (delta t)."""
    t = float(t)
    if not t > 0.0:
        raise ValueError("t must be positive")
    oracle.check_range(t)
    oracle.check_range((1.0 + delta) * t)
    base = np.asarray(oracle.evaluate(t, x), dtype=float)
    shifted = np.asarray(oracle.evaluate((1.0 + delta) * t, x), dtype=float)
    out = (shifted - base) / (delta * t)
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite oracle output in finite difference")
    return out


def _dsigma(oracle, sigma, x, derivative, delta):
    if derivative == "analytic":
        exact = oracle.sigma_derivative(sigma, x)
        if exact is not None:
            return np.asarray(exact, dtype=float)
        return fd_sigma_derivative(oracle, sigma, x, delta)
    if derivative == "fd":
        return fd_sigma_derivative(oracle, sigma, x, delta)
    raise ValueError(f"unknown derivative mode {derivative!r}")


def h_gamma(oracle, sigma, gamma, x, derivative="fd", delta=DEFAULT_FD_DELTA):
    """Extended score of the sigma-smoothed distribution at variance gamma.

    Uses the identity S(p_sigma * g_gamma) = S(p at sqrt(sigma^2 + gamma)),
    with d/dgamma = d/dsigma / (2 sqrt(sigma^2 + gamma)) by the chain rule.
    ``derivative`` selects the analytic oracle derivative when available
    ("analytic") or the forward difference of the inference algorithm ("fd").
    """
    gamma = float(gamma)
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    effective = float(np.sqrt(float(sigma) ** 2 + gamma))
    oracle.check_range(effective)
    score = np.asarray(oracle.evaluate(effective, x), dtype=float)
    if not np.all(np.isfinite(score)):
        raise ValueError("non-finite oracle output")
    dscore = _dsigma(oracle, effective, x, derivative, delta)
    return (1.0 + gamma) * score + gamma * dscore / (2.0 * effective)
