"""Procedural 28x28 digit corpus for fully offline runs.

Renders stroke-skeleton glyphs for the ten digit classes with randomized
affine warps, control-point jitter, and stroke widths, producing images
with MNIST-like statistics (saturated stroke cores, soft anti-aliased
edges, empty background).  ``write_synthetic_idx`` emits genuine IDX file
pairs so the rest of the pipeline exercises the exact same ingestion path
as real digit data.
"""

from __future__ import annotations

import math

import numpy as np

from .datasets import ImageSet, write_idx
from .errors import DomainError


def _arc(cx, cy, rx, ry, a0, a1, n=14):
    ts = np.linspace(a0, a1, n)
    return [(cx + rx * math.cos(t), cy + ry * math.sin(t)) for t in ts]


def _digit_strokes(d: int) -> list[list[tuple[float, float]]]:
    """Stroke polylines for one digit in the unit box (y grows downward)."""
    if d == 0:
        return [_arc(0.5, 0.5, 0.21, 0.3, 0.0, 2.0 * math.pi, 24)]
    if d == 1:
        return [[(0.4, 0.28), (0.55, 0.16), (0.55, 0.84)]]
    if d == 2:
        top = _arc(0.5, 0.34, 0.2, 0.19, math.pi, 2.0 * math.pi, 10)
        return [top + [(0.7, 0.4), (0.32, 0.82), (0.72, 0.82)]]
    if d == 3:
        upper = _arc(0.46, 0.32, 0.19, 0.17, 1.25 * math.pi, 2.55 * math.pi, 12)
        lower = _arc(0.46, 0.66, 0.21, 0.19, -0.55 * math.pi, 0.8 * math.pi, 12)
        return [upper, lower]
    if d == 4:
        return [[(0.6, 0.16), (0.3, 0.6), (0.76, 0.6)],
                [(0.62, 0.38), (0.62, 0.84)]]
    if d == 5:
        bowl = _arc(0.47, 0.62, 0.21, 0.21, -0.5 * math.pi, 0.75 * math.pi, 12)
        return [[(0.7, 0.16), (0.34, 0.16), (0.32, 0.45), (0.47, 0.41)] + bowl]
    if d == 6:
        sweep = _arc(0.62, 0.42, 0.45, 0.3, 0.75 * math.pi, 1.0 * math.pi, 8)
        loop = _arc(0.5, 0.64, 0.17, 0.18, 0.0, 2.0 * math.pi, 18)
        return [[(0.64, 0.14)] + sweep + [(0.34, 0.6)], loop]
    if d == 7:
        return [[(0.3, 0.18), (0.7, 0.18), (0.44, 0.84)]]
    if d == 8:
        return [_arc(0.5, 0.33, 0.16, 0.16, 0.0, 2.0 * math.pi, 18),
                _arc(0.5, 0.66, 0.2, 0.18, 0.0, 2.0 * math.pi, 18)]
    if d == 9:
        loop = _arc(0.52, 0.34, 0.17, 0.17, 0.0, 2.0 * math.pi, 18)
        return [loop, [(0.69, 0.36), (0.66, 0.6), (0.56, 0.84)]]
    raise DomainError(f"no glyph for digit {d}")


def _render(strokes, width_px: float, soft_px: float = 1.0) -> np.ndarray:
    """Rasterize polylines on a 28x28 grid via distance-to-segment fields."""
    size = 28
    coords = (np.arange(size) + 0.5) / size
    px, py = np.meshgrid(coords, coords)
    image = np.zeros((size, size))
    half = width_px / size / 2.0
    soft = soft_px / size
    for pts in strokes:
        for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
            dx, dy = x1 - x0, y1 - y0
            seg2 = dx * dx + dy * dy
            if seg2 == 0.0:
                t = 0.0
            else:
                t = np.clip(((px - x0) * dx + (py - y0) * dy) / seg2, 0.0, 1.0)
            dist = np.hypot(px - (x0 + t * dx), py - (y0 + t * dy))
            image = np.maximum(image, np.clip((half + soft - dist) / soft, 0.0, 1.0))
    return image


def _warp(strokes, rng: np.random.Generator):
    theta = rng.uniform(-0.18, 0.18)
    sx = rng.uniform(0.85, 1.12)
    sy = rng.uniform(0.85, 1.12)
    shear = rng.uniform(-0.12, 0.12)
    tx = rng.uniform(-0.05, 0.05)
    ty = rng.uniform(-0.05, 0.05)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    out = []
    for pts in strokes:
        warped = []
        for x, y in pts:
            x0, y0 = x - 0.5, y - 0.5
            x1 = sx * (x0 + shear * y0)
            y1 = sy * y0
            x2 = cos_t * x1 - sin_t * y1
            y2 = sin_t * x1 + cos_t * y1
            jx, jy = rng.normal(0.0, 0.008, size=2)
            warped.append((x2 + 0.5 + tx + jx, y2 + 0.5 + ty + jy))
        out.append(warped)
    return out


def synthetic_digits(count: int, seed: int = 0) -> ImageSet:
    """Generate `count` labeled 28x28 digit images, deterministic by seed."""
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=count)
    images = np.empty((count, 28, 28))
    for i in range(count):
        strokes = _warp(_digit_strokes(int(labels[i])), rng)
        width = rng.uniform(2.0, 3.0)
        images[i] = _render(strokes, width_px=width)
    return ImageSet(images=images, labels=labels)


def write_synthetic_idx(images_path, labels_path, count: int, seed: int = 0) -> None:
    """Render a synthetic corpus and write it as an IDX file pair."""
    write_idx(images_path, labels_path, synthetic_digits(count, seed=seed))
