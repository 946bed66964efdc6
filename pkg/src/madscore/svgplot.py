"""Dependency-free SVG output: endpoint scatter over a target heat grid.

CSV remains the canonical data artifact; these figures exist so runs can be
eyeballed without external plotting tools.
"""

from __future__ import annotations

import numpy as np


def _color(intensity):
    """Linear ramp from near-white to deep blue."""
    u = float(np.clip(intensity, 0.0, 1.0))
    r = int(248 + u * (24 - 248))
    g = int(250 + u * (70 - 250))
    b = int(253 + u * (160 - 253))
    return f"rgb({r},{g},{b})"


def _auto_bounds(points, pad=0.06):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    return tuple((lo[i] - pad * span[i], hi[i] + pad * span[i]) for i in range(2))


def render_scatter(path, points, background=None, bounds=None, size=560,
                   bins=96, title=None):
    """Write an SVG scatter of 2-d points over an optional sample histogram."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("scatter needs points of shape (n, 2)")
    reference = points if background is None else np.asarray(background, dtype=float)
    if bounds is None:
        bounds = _auto_bounds(np.concatenate([reference, points]))
    (xlo, xhi), (ylo, yhi) = bounds

    def to_px(p):
        u = (p[0] - xlo) / (xhi - xlo) * size
        v = (1.0 - (p[1] - ylo) / (yhi - ylo)) * size
        return u, v

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="{_color(0.0)}"/>',
    ]
    if background is not None:
        counts, _, _ = np.histogram2d(
            background[:, 0], background[:, 1], bins=bins, range=[[xlo, xhi], [ylo, yhi]]
        )
        shade = np.sqrt(counts / max(counts.max(), 1.0))
        cell = size / bins
        for i in range(bins):
            for j in range(bins):
                if shade[i, j] <= 0.0:
                    continue
                x_px = i * cell
                y_px = (bins - 1 - j) * cell
                parts.append(
                    f'<rect x="{x_px:.2f}" y="{y_px:.2f}" width="{cell:.2f}" '
                    f'height="{cell:.2f}" fill="{_color(shade[i, j])}"/>'
                )
    arm = max(size / 220.0, 2.0)
    for p in points:
        u, v = to_px(p)
        parts.append(
            f'<path d="M{u - arm:.2f} {v:.2f}H{u + arm:.2f}M{u:.2f} '
            f'{v - arm:.2f}V{v + arm:.2f}" stroke="#c22" stroke-width="1.2"/>'
        )
    if title:
        parts.append(
            f'<text x="8" y="16" font-family="monospace" font-size="12">{title}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
