"""Generators for the toy target distributions and noisy-manifold datasets.

Four dataset kinds are built in:

- ``line_mixture``: a five-component one-dimensional Gaussian mixture with
  variances (0.2, 0.5, 1, 2, 4) at means (-20, -10, 0, 10, 20), times a
  point mass at zero in the second coordinate.
- ``tilted``: 21 planar Gaussians with covariance eigenvalues (1.7, 0.2),
  rotation angles uniform on [0, pi) and means uniform in a square box.
- ``radial``: five rings of radius 10 and radial variance 2.5 with centers
  uniform in a square box (optional minimum center spacing, off by default).
- ``noisy_manifold``: points uniform on a clean one-dimensional manifold (a
  segment along the first axis, or a circle in the plane) plus isotropic
  Gaussian noise in every ambient coordinate.

Everything is seed-deterministic: the model layout and the samples are
drawn from separate spawns of one counter-based generator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .models import DiracMixture, GaussianMixture, ProductModel, RadialGaussianMixture
from .sampler import AffineReference, CircleReference

DATASET_SCHEMA_VERSION = 1

LINE_MIXTURE_VARIANCES = (0.2, 0.5, 1.0, 2.0, 4.0)
LINE_MIXTURE_MEANS = (-20.0, -10.0, 0.0, 10.0, 20.0)

TILTED_COMPONENTS = 21
TILTED_EIGENVALUES = (1.7, 0.2)
TILTED_BOX_HALF_WIDTH = 10.0

RADIAL_CENTERS = 5
RADIAL_RADIUS = 10.0
RADIAL_VARIANCE = 2.5
RADIAL_BOX_HALF_WIDTH = 25.0

MANIFOLD_LINE_HALF_LENGTH = 5.0
MANIFOLD_CIRCLE_RADIUS = 5.0

KINDS = ("line_mixture", "tilted", "radial", "noisy_manifold")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str
    count: int
    seed: int = 0
    manifold: str | None = None
    ambient_dim: int | None = None
    noise_std: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.count <= 0:
            raise ValueError("sample count must be positive")
        if self.kind == "noisy_manifold":
            if self.manifold not in ("line", "circle"):
                raise ValueError("noisy_manifold requires manifold 'line' or 'circle'")
            if self.ambient_dim is None or self.ambient_dim < 2:
                raise ValueError("noisy_manifold requires ambient_dim >= 2")
            if self.manifold == "circle" and self.ambient_dim != 2:
                raise ValueError("circle manifolds are supported in ambient_dim 2 only")
            if self.noise_std is None or self.noise_std < 0.0:
                raise ValueError("noisy_manifold requires noise_std >= 0")

    def to_dict(self):
        body = {"schema_version": DATASET_SCHEMA_VERSION, "kind": self.kind,
                "count": self.count, "seed": self.seed}
        if self.kind == "noisy_manifold":
            body |= {
                "manifold": self.manifold,
                "ambient_dim": self.ambient_dim,
                "noise_std": self.noise_std,
            }
        return body


def spec_from_dict(data):
    version = data.get("schema_version", DATASET_SCHEMA_VERSION)
    if version != DATASET_SCHEMA_VERSION:
        raise ValueError(f"unsupported dataset schema version {version!r}")
    return DatasetSpec(
        kind=data["kind"],
        count=int(data["count"]),
        seed=int(data.get("seed", 0)),
        manifold=data.get("manifold"),
        ambient_dim=data.get("ambient_dim"),
        noise_std=data.get("noise_std"),
    )


def _generators(seed, n=2):
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def line_mixture_model():
    """Degenerate planar target: a 1-d mixture on the x1 axis."""
    k = len(LINE_MIXTURE_MEANS)
    mixture = GaussianMixture(
        np.full(k, 1.0 / k),
        np.asarray(LINE_MIXTURE_MEANS)[:, None],
        np.asarray(LINE_MIXTURE_VARIANCES)[:, None, None],
    )
    return ProductModel([mixture, DiracMixture([1.0], [[0.0]])])


def tilted_model(seed=0, n_components=TILTED_COMPONENTS, box_half_width=TILTED_BOX_HALF_WIDTH):
    """Planar mixture of rotated anisotropic Gaussians."""
    rng, _ = _generators(seed)
    means = rng.uniform(-box_half_width, box_half_width, size=(n_components, 2))
    angles = rng.uniform(0.0, np.pi, size=n_components)
    cos, sin = np.cos(angles), np.sin(angles)
    rotations = np.stack(
        [np.stack([cos, -sin], axis=1), np.stack([sin, cos], axis=1)], axis=1
    )
    covs = rotations @ np.diag(TILTED_EIGENVALUES) @ np.swapaxes(rotations, 1, 2)
    return GaussianMixture(np.full(n_components, 1.0 / n_components), means, covs)


def radial_model(
    seed=0,
    n_centers=RADIAL_CENTERS,
    box_half_width=RADIAL_BOX_HALF_WIDTH,
    min_center_distance=None,
    n_angles=256,
):
    """Planar mixture of rings; optional spacing rejection keeps rings disjoint."""
    rng, _ = _generators(seed)
    for _ in range(100000):
        centers = rng.uniform(-box_half_width, box_half_width, size=(n_centers, 2))
        if min_center_distance is not None:
            gaps = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
            if gaps[~np.eye(n_centers, dtype=bool)].min() < min_center_distance:
                continue
        return RadialGaussianMixture(centers, RADIAL_RADIUS, RADIAL_VARIANCE, n_angles=n_angles)
    raise ValueError("center spacing rejection did not terminate")


def build_model(spec):
    """Analytic model for a dataset spec (manifold datasets have none)."""
    if isinstance(spec, str):
        spec = DatasetSpec(kind=spec, count=1)
    if spec.kind == "line_mixture":
        return line_mixture_model()
    if spec.kind == "tilted":
        return tilted_model(spec.seed)
    if spec.kind == "radial":
        return radial_model(spec.seed)
    raise ValueError(f"dataset kind {spec.kind!r} has no analytic model")


def manifold_reference(spec):
    """Clean-manifold geometry for noisy_manifold specs."""
    if spec.kind != "noisy_manifold":
        raise ValueError("manifold_reference applies to noisy_manifold specs")
    d = spec.ambient_dim
    if spec.manifold == "line":
        basis = np.zeros((1, d))
        basis[0, 0] = 1.0
        return AffineReference(np.zeros(d), basis)
    return CircleReference(np.zeros(2), MANIFOLD_CIRCLE_RADIUS)


def _sample_manifold(spec, rng):
    d = spec.ambient_dim
    if spec.manifold == "line":
        clean = np.zeros((spec.count, d))
        clean[:, 0] = rng.uniform(
            -MANIFOLD_LINE_HALF_LENGTH, MANIFOLD_LINE_HALF_LENGTH, size=spec.count
        )
    else:
        theta = rng.uniform(0.0, 2.0 * np.pi, size=spec.count)
        clean = MANIFOLD_CIRCLE_RADIUS * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return clean + spec.noise_std * rng.standard_normal((spec.count, d))


def sample_dataset(spec):
    """Seed-deterministic draws from the spec's distribution."""
    _, rng = _generators(spec.seed)
    if spec.kind == "noisy_manifold":
        return _sample_manifold(spec, rng)
    return build_model(spec).sample(spec.count, rng)


def dataset_to_csv(points, path, spec=None):
    points = np.asarray(points, dtype=float)
    lines = [f"# schema_version: {DATASET_SCHEMA_VERSION}"]
    if spec is not None:
        lines.append("# spec: " + json.dumps(spec.to_dict(), sort_keys=True))
    lines.append(",".join(f"x{j}" for j in range(points.shape[1])))
    for row in points:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset_csv(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("x0"):
                continue
            rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise ValueError(f"no data rows in {path}")
    return np.asarray(rows, dtype=float)


def save_spec(spec, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_spec(path):
    with open(path, encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))
