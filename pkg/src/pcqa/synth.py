"""Deterministic synthetic point clouds for tests and demos.

All generators return voxel-grid clouds with procedural color texture so
projection metrics see realistic luminance structure, and are reproducible
given the seed.
"""

from __future__ import annotations

import numpy as np

from pcqa.cloud import PointCloud, dedupe_coords


def _texture(coords: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Smooth sinusoidal color pattern plus mild speckle, full RGB range."""
    x, y, z = (coords[:, i].astype(np.float64) for i in range(3))
    r = 127 + 80 * np.sin(x / 17.0) * np.cos(y / 23.0)
    g = 127 + 80 * np.sin((y + z) / 19.0)
    b = 127 + 80 * np.cos((x + z) / 13.0)
    colors = np.stack([r, g, b], axis=1)
    colors += rng.normal(0.0, 6.0, size=colors.shape)
    return np.clip(np.round(colors), 0, 255).astype(np.uint8)


def cube_surface(span: int = 300, step: int = 3, seed: int = 0, name: str = "cube") -> PointCloud:
    """Hollow textured cube: six dense faces on the integer grid."""
    rng = np.random.default_rng(seed)
    axis = np.arange(0, span + 1, step, dtype=np.int64)
    u, v = np.meshgrid(axis, axis, indexing="ij")
    u, v = u.ravel(), v.ravel()
    zeros = np.zeros_like(u)
    full = np.full_like(u, span)
    faces = [
        np.stack([u, v, zeros], axis=1),
        np.stack([u, v, full], axis=1),
        np.stack([u, zeros, v], axis=1),
        np.stack([u, full, v], axis=1),
        np.stack([zeros, u, v], axis=1),
        np.stack([full, u, v], axis=1),
    ]
    coords = np.concatenate(faces, axis=0)
    colors = _texture(coords, rng)
    coords, colors = dedupe_coords(coords, colors)
    return PointCloud(coords, colors, name)


def sphere_surface(
    n: int = 20000, radius: int = 150, seed: int = 0, name: str = "sphere"
) -> PointCloud:
    """Textured sphere shell sampled with a Fibonacci lattice."""
    rng = np.random.default_rng(seed)
    i = np.arange(n, dtype=np.float64)
    golden = np.pi * (3.0 - np.sqrt(5.0))
    z = 1.0 - 2.0 * (i + 0.5) / n
    rho = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    theta = golden * i
    unit = np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=1)
    coords = np.round(unit * radius).astype(np.int64) + radius
    colors = _texture(coords, rng)
    coords, colors = dedupe_coords(coords, colors)
    return PointCloud(coords, colors, name)


def wavy_sheet(
    span: int = 300, step: int = 2, seed: int = 0, name: str = "sheet"
) -> PointCloud:
    """Textured height-field sheet, more anisotropic than the cube."""
    rng = np.random.default_rng(seed)
    axis = np.arange(0, span + 1, step, dtype=np.int64)
    x, y = np.meshgrid(axis, axis, indexing="ij")
    x, y = x.ravel(), y.ravel()
    z = np.round(
        span / 6.0 * (np.sin(x / 31.0) + np.cos(y / 41.0)) + span / 3.0
    ).astype(np.int64)
    coords = np.stack([x, y, z], axis=1)
    colors = _texture(coords, rng)
    coords, colors = dedupe_coords(coords, colors)
    return PointCloud(coords, colors, name)


def random_blob(
    n: int = 15000, span: int = 300, seed: int = 0, name: str = "blob"
) -> PointCloud:
    """Dense random cluster; duplicates removed, so the count is approximate."""
    rng = np.random.default_rng(seed)
    coords = np.round(rng.normal(span / 2.0, span / 6.0, size=(n, 3))).astype(np.int64)
    np.clip(coords, 0, span, out=coords)
    colors = _texture(coords, rng)
    coords, colors = dedupe_coords(coords, colors)
    return PointCloud(coords, colors, name)
