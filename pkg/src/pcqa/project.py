"""Orthographic snapshot rendering of point clouds.

Pipeline per view: translate by the reference centroid, rotate the view
normal onto +z (row-vector convention), scale, drop the z axis, and
rasterize at one pixel per point with a largest-z z-buffer. Both clouds of
a pair share the reference centroid and canvas so their snapshots stay
aligned even when distortion moves the distorted cloud's bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pcqa.cloud import BoundingStats, PointCloud, bounding_stats
from pcqa.util import round_half_away
from pcqa.view import Viewpoint, ViewpointSet, icosphere_normals


class CanvasError(ValueError):
    """Projected points fall outside the canvas."""


@dataclass(frozen=True)
class ProjectionConfig:
    scale: float = 0.5
    canvas: tuple[int, int] | str = "auto"  # (W, H) or "auto"
    background: tuple[int, int, int] = (127, 127, 127)
    viewpoints: ViewpointSet = field(default_factory=lambda: icosphere_normals(0))

    def __post_init__(self) -> None:
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if not all(0 <= c <= 255 for c in self.background):
            raise ValueError("background channels must lie in [0, 255]")
        if self.canvas != "auto":
            w, h = self.canvas
            if w < 1 or h < 1:
                raise ValueError("canvas dimensions must be positive")


@dataclass(frozen=True)
class ProjectedImage:
    """One snapshot: RGB raster, per-pixel depth, and foreground mask.

    Background pixels hold the fill color and depth -inf; the occupancy mask
    is the authoritative foreground indicator (a point may legitimately have
    the background color).
    """

    pixels: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float64, -inf where no point landed
    occupancy: np.ndarray  # (H, W) bool


def auto_canvas(ref_stats: BoundingStats, scale: float) -> tuple[int, int]:
    """Square canvas sized from the reference diagonal.

    After centering on the centroid every point lies within half a diagonal,
    so a side of ceil(scale * diagonal) plus a few pixels of margin holds any
    rotation; the side is kept even so the canvas center is a pixel corner
    shared by both clouds of a pair.
    """
    if ref_stats.diagonal <= 0:
        raise ValueError("degenerate cloud: bounding diagonal is zero")
    side = math.ceil(scale * ref_stats.diagonal) + 9
    if side % 2:
        side += 1
    return side, side


def transform_coords(
    coords: np.ndarray, t_r: np.ndarray, rotation: np.ndarray, scale: float
) -> np.ndarray:
    """Apply translate-rotate-scale to (N, 3) row-vector coordinates."""
    return ((coords.astype(np.float64) - t_r) @ rotation) * scale


def rasterize(
    transformed: np.ndarray,
    colors: np.ndarray,
    canvas: tuple[int, int],
    background: tuple[int, int, int],
) -> ProjectedImage:
    """Z-buffer rasterization of already-transformed coordinates.

    Among points landing on one pixel the largest z wins; exact depth ties
    resolve to the lowest input index, making the raster independent of
    evaluation order.
    """
    width, height = canvas
    px = round_half_away(transformed[:, 0]).astype(np.int64) + width // 2
    py = round_half_away(transformed[:, 1]).astype(np.int64) + height // 2
    if len(px) and (px.min() < 0 or px.max() >= width or py.min() < 0 or py.max() >= height):
        need_w = int(2 * max(abs(px - width // 2).max() if len(px) else 0, 1) + 2)
        need_h = int(2 * max(abs(py - height // 2).max() if len(py) else 0, 1) + 2)
        raise CanvasError(
            f"canvas {width}x{height} too small: projected points need at least "
            f"{need_w}x{need_h}"
        )

    pixels = np.empty((height, width, 3), dtype=np.uint8)
    pixels[:, :] = np.asarray(background, dtype=np.uint8)
    depth = np.full((height, width), -np.inf, dtype=np.float64)
    occupancy = np.zeros((height, width), dtype=bool)

    if len(px):
        flat = py * width + px
        index = np.arange(len(px))
        # Sort by pixel, then depth ascending, then index descending: the last
        # entry per pixel is the deepest point, lowest index among exact ties.
        order = np.lexsort((-index, transformed[:, 2], flat))
        flat_sorted = flat[order]
        last = np.flatnonzero(np.r_[flat_sorted[1:] != flat_sorted[:-1], True])
        winners = order[last]
        rows, cols = py[winners], px[winners]
        pixels[rows, cols] = colors[winners]
        depth[rows, cols] = transformed[winners, 2]
        occupancy[rows, cols] = True

    return ProjectedImage(pixels=pixels, depth=depth, occupancy=occupancy)


def project(
    cloud: PointCloud,
    t_r: np.ndarray,
    view: Viewpoint,
    cfg: ProjectionConfig,
    canvas: tuple[int, int] | None = None,
) -> ProjectedImage:
    """Render one snapshot of ``cloud`` from ``view``.

    ``t_r`` is the translation applied before rotation and must come from the
    reference cloud even when rendering a distorted one, so paired snapshots
    stay registered.
    """
    cloud.require_nonempty("project")
    if canvas is None:
        canvas = cfg.canvas if cfg.canvas != "auto" else auto_canvas(bounding_stats(cloud), cfg.scale)
    transformed = transform_coords(cloud.coords, np.asarray(t_r, dtype=np.float64), view.rotation, cfg.scale)
    return rasterize(transformed, cloud.colors, canvas, cfg.background)


def project_pair(
    ref: PointCloud, dis: PointCloud, cfg: ProjectionConfig
) -> list[tuple[ProjectedImage, ProjectedImage]]:
    """Snapshot ``ref`` and ``dis`` from every configured viewpoint.

    Both clouds share the reference centroid, canvas, and viewpoints; the
    result holds one (reference, distorted) image pair per view.
    """
    ref.require_nonempty("project_pair")
    dis.require_nonempty("project_pair")
    stats = bounding_stats(ref)
    canvas = cfg.canvas if cfg.canvas != "auto" else auto_canvas(stats, cfg.scale)
    pairs = []
    for view in cfg.viewpoints.viewpoints:
        img_ref = project(ref, stats.center, view, cfg, canvas)
        img_dis = project(dis, stats.center, view, cfg, canvas)
        pairs.append((img_ref, img_dis))
    return pairs


def save_png(image: ProjectedImage, path: str | Path, with_mask: bool = True) -> None:
    """Write a snapshot as 8-bit RGB PNG plus a 1-bit occupancy sidecar."""
    from PIL import Image

    path = Path(path)
    Image.fromarray(image.pixels, mode="RGB").save(path)
    if with_mask:
        mask = Image.fromarray(image.occupancy).convert("1")
        mask.save(path.with_name(path.stem + "_mask.png"))
