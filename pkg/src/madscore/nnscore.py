"""A small MLP denoiser trained by denoising score matching.

The network predicts a unit-scale noise direction f from the scaled input
(x / sqrt(sigma^2 + sigma_data^2), log(sigma) / 4) and the denoiser output
is D(x, sigma) = x + sigma * f(x, sigma).  With the per-noise-level weight
1 / sigma^2, the training loss

    E_y E_eta |D(y + eta, sigma) - y|^2 / sigma^2 = E |f + eta / sigma|^2

has unit-scale targets at every noise level, which keeps a plain tanh MLP
trainable across the whole schedule.  The score follows from the denoiser
as S(sigma, x) = (D(x, sigma) - x) / sigma^2.

Gradients are hand-derived backpropagation (checked against central
differences in the test suite) and the optimiser is Adam with an optional
cosine decay.  Training is single-threaded and fully determined by the
seed; a trained network is immutable by convention and safe to evaluate
concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .xscore import OracleRangeError, ScoreOracle

CHECKPOINT_SCHEMA_VERSION = 1

# learned oracles tolerate slight extrapolation so the forward difference
# can probe (1 + delta) * sigma_max
ORACLE_SIGMA_HEADROOM = 1.1
DEFAULT_LEARNED_FD_DELTA = 1e-3


class TrainingDivergedError(ArithmeticError):
    def __init__(self, iteration, loss):
        self.iteration = iteration
        self.loss = loss
        super().__init__(f"training diverged at iteration {iteration}: loss {loss!r}")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 20000
    batch_size: int = 128
    learning_rate: float = 1e-3
    lr_schedule: str = "cosine"  # or "constant"
    sigma_min: float = 0.002
    sigma_max: float = 80.0
    sigma_data: float | None = None  # default: RMS coordinate scale of the data
    hidden: tuple = (128, 128, 128)
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 0 or self.batch_size <= 0:
            raise ValueError("iterations must be >= 0 and batch_size positive")
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be positive")
        if self.lr_schedule not in ("cosine", "constant"):
            raise ValueError("lr_schedule must be 'cosine' or 'constant'")
        if not 0.0 < self.sigma_min < self.sigma_max:
            raise ValueError("need 0 < sigma_min < sigma_max")
        if not self.hidden:
            raise ValueError("need at least one hidden layer")

    def to_dict(self):
        return {
            "iterations": self.iterations,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "lr_schedule": self.lr_schedule,
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "sigma_data": self.sigma_data,
            "hidden": list(self.hidden),
            "seed": self.seed,
        }


class MlpDenoiser:
    """Tanh MLP with a skip connection: D(x, sigma) = x + sigma * f(x, sigma).

    The raw head f takes d + 1 inputs (the scaled point and a log-noise
    feature) and returns d outputs.  The output layer is zero-initialised,
    so a fresh network is the identity denoiser.
    """

    def __init__(self, dim, hidden, weights, biases, sigma_min, sigma_max, sigma_data):
        self.dim = int(dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        self.sigma_data = float(sigma_data)
        sizes = (self.dim + 1, *self.hidden, self.dim)
        expected = list(zip(sizes[1:], sizes[:-1]))
        got = [w.shape for w in self.weights]
        if got != expected or [b.shape for b in self.biases] != [(s,) for s, _ in expected]:
            raise ValueError(f"parameter shapes {got} do not match layout {expected}")
        if not all(np.all(np.isfinite(w)) for w in self.weights + self.biases):
            raise ValueError("non-finite network parameters")

    @classmethod
    def initialize(cls, dim, hidden=(128, 128, 128), sigma_min=0.002, sigma_max=80.0,
                   sigma_data=1.0, seed=0):
        rng = np.random.Generator(np.random.Philox(key=int(seed)))
        sizes = (dim + 1, *hidden, dim)
        weights, biases = [], []
        for fan_out, fan_in in zip(sizes[1:], sizes[:-1]):
            weights.append(rng.standard_normal((fan_out, fan_in)) / np.sqrt(fan_in))
            biases.append(np.zeros(fan_out))
        weights[-1][:] = 0.0  # identity denoiser at initialisation
        return cls(dim, hidden, weights, biases, sigma_min, sigma_max, sigma_data)

    def _features(self, x, sigma):
        scale = 1.0 / np.sqrt(sigma**2 + self.sigma_data**2)
        return np.concatenate([x * scale[:, None], (np.log(sigma) / 4.0)[:, None]], axis=1)

    def _head(self, features, keep_cache=False):
        h = features
        cache = []
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = h @ w.T + b
            a = np.tanh(z)
            if keep_cache:
                cache.append((h, a))
            h = a
        out = h @ self.weights[-1].T + self.biases[-1]
        if keep_cache:
            cache.append((h, None))
        return out, cache

    def _coerce(self, x, sigma):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x[None, :] if single else x
        sig = np.broadcast_to(np.asarray(sigma, dtype=float), (pts.shape[0],)).astype(float)
        if np.any(sig <= 0.0):
            raise ValueError("sigma must be positive")
        return pts, sig, single

    def forward(self, x, sigma):
        """Denoiser output D(x, sigma), batched over rows when x is 2-d."""
        pts, sig, single = self._coerce(x, sigma)
        f, _ = self._head(self._features(pts, sig))
        out = pts + sig[:, None] * f
        return out[0] if single else out

    __call__ = forward

    def score(self, sigma, x):
        """(D(x, sigma) - x) / sigma^2, the denoiser's implied score."""
        pts, sig, single = self._coerce(x, sigma)
        out = (self.forward(pts, sig) - pts) / (sig**2)[:, None]
        return out[0] if single else out


def score_from_denoiser(denoiser, sigma, x):
    """Implied score of any denoiser callable ``denoiser(x, sigma) -> D``."""
    x = np.asarray(x, dtype=float)
    return (np.asarray(denoiser(x, sigma), dtype=float) - x) / float(sigma) ** 2


def denoiser_from_score(score_fn):
    """Wrap a score function ``score_fn(sigma, x)`` as a denoiser callable."""

    def denoiser(x, sigma):
        x = np.asarray(x, dtype=float)
        return x + float(sigma) ** 2 * np.asarray(score_fn(sigma, x), dtype=float)

    return denoiser


def denoising_loss(net, clean, sigma, noise):
    """Weighted denoising loss of one batch: mean of |f + eta / sigma|^2."""
    noisy = clean + noise
    pts, sig, _ = net._coerce(noisy, sigma)
    f, _ = net._head(net._features(pts, sig))
    residual = f + noise / sig[:, None]
    return float(np.mean(np.sum(residual**2, axis=1)))


def loss_and_grads(net, clean, sigma, noise):
    """Loss of one batch and hand-derived gradients for every parameter."""
    noisy = clean + noise
    pts, sig, _ = net._coerce(noisy, sigma)
    features = net._features(pts, sig)
    f, cache = net._head(features, keep_cache=True)
    residual = f + noise / sig[:, None]
    loss = float(np.mean(np.sum(residual**2, axis=1)))
    batch = pts.shape[0]

    grad_w = [np.zeros_like(w) for w in net.weights]
    grad_b = [np.zeros_like(b) for b in net.biases]
    delta = 2.0 * residual / batch  # dL/df
    h_last, _ = cache[-1]
    grad_w[-1] = delta.T @ h_last
    grad_b[-1] = delta.sum(axis=0)
    upstream = delta @ net.weights[-1]
    for layer in range(len(net.weights) - 2, -1, -1):
        h_prev, activation = cache[layer]
        dz = upstream * (1.0 - activation**2)  # tanh'
        grad_w[layer] = dz.T @ h_prev
        grad_b[layer] = dz.sum(axis=0)
        if layer > 0:
            upstream = dz @ net.weights[layer]
    return loss, grad_w, grad_b


def _learning_rate(config, iteration):
    if config.lr_schedule == "constant":
        return config.learning_rate
    phase = np.pi * iteration / max(config.iterations, 1)
    return config.learning_rate * 0.5 * (1.0 + np.cos(phase))


def train_denoiser(config, data):
    """Minibatch Adam on the denoising loss; deterministic given the seed.

    Returns ``(net, history)`` where history rows are
    (iteration, loss, learning rate).
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("data must be a non-empty (n, d) array")
    dim = data.shape[1]
    sigma_data = config.sigma_data
    if sigma_data is None:
        sigma_data = max(float(np.sqrt(np.mean(data**2))), 1e-3)
    net = MlpDenoiser.initialize(
        dim,
        hidden=config.hidden,
        sigma_min=config.sigma_min,
        sigma_max=config.sigma_max,
        sigma_data=sigma_data,
        seed=config.seed,
    )
    rng = np.random.Generator(np.random.Philox(key=int(config.seed) + 1))
    params = net.weights + net.biases
    first_moment = [np.zeros_like(p) for p in params]
    second_moment = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    log_sigma_range = (np.log(config.sigma_min), np.log(config.sigma_max))
    history = np.empty((config.iterations, 3))

    for it in range(config.iterations):
        idx = rng.integers(0, data.shape[0], size=config.batch_size)
        clean = data[idx]
        sigma = np.exp(rng.uniform(*log_sigma_range, size=config.batch_size))
        noise = sigma[:, None] * rng.standard_normal((config.batch_size, dim))
        loss, grad_w, grad_b = loss_and_grads(net, clean, sigma, noise)
        if not np.isfinite(loss):
            raise TrainingDivergedError(it, loss)
        lr = _learning_rate(config, it)
        step = it + 1
        for p, g, m, v in zip(params, grad_w + grad_b, first_moment, second_moment):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g**2
            m_hat = m / (1.0 - beta1**step)
            v_hat = v / (1.0 - beta2**step)
            p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        history[it] = (it, loss, lr)
    return net, history


def validation_loss(net, data, seed=0, batch_size=512):
    """Deterministic held-out denoising loss for regression checks."""
    data = np.asarray(data, dtype=float)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    idx = rng.integers(0, data.shape[0], size=min(batch_size, 4 * data.shape[0]))
    clean = data[idx]
    sigma = np.exp(rng.uniform(np.log(net.sigma_min), np.log(net.sigma_max), size=idx.size))
    noise = sigma[:, None] * rng.standard_normal(clean.shape)
    return denoising_loss(net, clean, sigma, noise)


def save_checkpoint(net, path, meta=None):
    payload = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "kind": "mlp_denoiser",
        "dim": net.dim,
        "hidden": list(net.hidden),
        "sigma_min": net.sigma_min,
        "sigma_max": net.sigma_max,
        "sigma_data": net.sigma_data,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    if meta:
        payload["meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise ValueError(f"unsupported checkpoint schema version {version!r}")
    if payload.get("kind") != "mlp_denoiser":
        raise ValueError(f"unexpected checkpoint kind {payload.get('kind')!r}")
    return MlpDenoiser(
        payload["dim"],
        payload["hidden"],
        payload["weights"],
        payload["biases"],
        payload["sigma_min"],
        payload["sigma_max"],
        payload["sigma_data"],
    )


def write_training_log(history, path, config=None):
    lines = [f"# schema_version: {CHECKPOINT_SCHEMA_VERSION}"]
    if config is not None:
        lines.append("# config: " + json.dumps(config.to_dict(), sort_keys=True))
    lines.append("iteration,loss,learning_rate")
    for it, loss, lr in history:
        lines.append(f"{int(it)},{loss!r},{lr!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


class LearnedScoreOracle(ScoreOracle):
    """Expose a trained denoiser through the score-oracle contract."""

    def __init__(self, net, fd_delta=DEFAULT_LEARNED_FD_DELTA):
        self.net = net
        self.dim = net.dim
        self.sigma_min = net.sigma_min
        self.sigma_max = net.sigma_max * ORACLE_SIGMA_HEADROOM
        self.fd_delta = fd_delta

    def evaluate(self, sigma, x):
        if not self.sigma_min <= sigma <= self.sigma_max:
            raise OracleRangeError(
                f"sigma {sigma!r} outside learned-oracle range "
                f"[{self.sigma_min!r}, {self.sigma_max!r}]"
            )
        return self.net.score(sigma, x)
