"""Synthetic fundus-like images for desk-scale experiments: a circular
field of view, a bright optic-disc blob, curved dark vessel strokes,
and one of two global illumination styles.
"""

from __future__ import annotations

import os

import numpy as np

from . import kernels
from .imagedata import ImageRecord, save_image

# (base tint, brightness) per illumination style
STYLES = {
    0: {"tint": np.array([0.85, 0.45, 0.20]), "brightness": 1.0},
    1: {"tint": np.array([0.60, 0.30, 0.25]), "brightness": 0.75},
}


def make_fundus(size: int = 128, seed: int = 0, style: int = 0) -> ImageRecord:
    rng = np.random.default_rng(seed)
    cfg = STYLES[style % len(STYLES)]
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    cy = cx = (size - 1) / 2.0
    r = np.hypot(ys - cy, xs - cx)
    fov_radius = 0.48 * size

    # smooth circular field of view with mild vignetting
    fov = np.clip((fov_radius - r) / (0.05 * size), 0.0, 1.0)
    vignette = 1.0 - 0.25 * np.clip(r / fov_radius, 0.0, 1.0) ** 2
    base = cfg["tint"][None, None, :] * (fov * vignette * cfg["brightness"])[:, :, None]

    # slightly off-center bright optic disc
    dy = rng.uniform(-0.15, 0.15) * size
    dx = rng.uniform(-0.15, 0.15) * size
    disc_r = rng.uniform(0.08, 0.12) * size
    disc_d = np.hypot(ys - (cy + dy), xs - (cx + dx))
    disc = np.exp(-0.5 * (disc_d / disc_r) ** 2)
    base += 0.35 * disc[:, :, None] * np.array([1.0, 0.9, 0.6])[None, None, :]

    # curved vessel strokes: rasterize quadratic curves, thicken by blurring
    stroke = np.zeros((size, size))
    n_vessels = rng.integers(4, 8)
    for _ in range(n_vessels):
        p0 = np.array([cy + dy, cx + dx])
        angle = rng.uniform(0, 2 * np.pi)
        reach = rng.uniform(0.5, 0.9) * fov_radius
        p2 = p0 + reach * np.array([np.sin(angle), np.cos(angle)])
        bend = rng.uniform(-0.3, 0.3) * reach
        mid = (p0 + p2) / 2 + bend * np.array([np.cos(angle), -np.sin(angle)])
        t = np.linspace(0, 1, 4 * size)[:, None]
        pts = (1 - t) ** 2 * p0 + 2 * (1 - t) * t * mid + t**2 * p2
        iy = np.clip(np.round(pts[:, 0]).astype(int), 0, size - 1)
        ix = np.clip(np.round(pts[:, 1]).astype(int), 0, size - 1)
        stroke[iy, ix] = 1.0
    vessel = kernels.gaussian_blur(stroke, sigma=0.8)
    vessel = np.clip(vessel / max(vessel.max(), 1e-9), 0.0, 1.0)
    base *= (1.0 - 0.55 * vessel[:, :, None] * fov[:, :, None])

    noise = rng.normal(0, 0.01, size=(size, size, 3))
    pixels = np.clip(base + noise * fov[:, :, None], 0.0, 1.0)
    return ImageRecord(pixels=pixels.astype(np.float32), source_path=f"synthetic:{seed}:{style}")


def make_corpus(out_dir: str, count: int, size: int = 128, seed: int = 0) -> list[str]:
    """Write `count` images, alternating between the two illumination styles."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i in range(count):
        record = make_fundus(size=size, seed=seed + i, style=i % 2)
        path = os.path.join(out_dir, f"fundus_{i:04d}.png")
        save_image(record, path)
        paths.append(path)
    return paths
