"""Distortion generators: octree downsampling and geometry/color noise.

Codec distortions live outside this package; the manifest schema reserves
fields for externally-encoded files so benchmark runs can ingest them
alongside natively generated ones.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from pcqa.cloud import PointCloud, dedupe_coords, save_ply
from pcqa.util import round_half_away


@dataclass(frozen=True)
class DistortionSpec:
    """One distortion to apply: octree 'downsample' or 'gaussian' noise."""

    kind: str
    level: int | None = None  # downsample: octree depth, 1..10
    sigma_geo: float | None = None  # gaussian: grid units
    sigma_col: float | None = None  # gaussian: color-channel units
    seed: int | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if self.kind == "downsample":
            if self.level is None or not 1 <= self.level <= 10:
                raise ValueError(f"downsample level must be in 1..10, got {self.level}")
        elif self.kind == "gaussian":
            if self.sigma_geo is None or self.sigma_geo < 0:
                raise ValueError("gaussian sigma_geo must be >= 0")
            if self.sigma_col is None or self.sigma_col < 0:
                raise ValueError("gaussian sigma_col must be >= 0")
            if self.seed is None:
                raise ValueError("gaussian noise requires an explicit seed")
        else:
            raise ValueError(f"unknown distortion kind '{self.kind}'")

    def default_label(self) -> str:
        if self.label:
            return self.label
        if self.kind == "downsample":
            return f"downsample_N{self.level}"
        return f"gaussian_g{self.sigma_geo:g}_c{self.sigma_col:g}_s{self.seed}"


def parse_spec_file(path: str | Path) -> list[DistortionSpec]:
    """Load a JSON array of distortion specs, reporting the failing entry."""
    path = Path(path)
    try:
        entries = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(entries, list):
        raise ValueError(f"{path}: expected a JSON array of distortion specs")
    specs = []
    for i, entry in enumerate(entries):
        try:
            specs.append(DistortionSpec(**entry))
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{path}: entry {i}: {exc}") from exc
    return specs


def octree_downsample(cloud: PointCloud, level: int) -> PointCloud:
    """Merge points that share a cell of the 2^level-per-axis voxel cube.

    The cube covers the cloud's bounding box with the longest extent defining
    the cell size, so cells stay cubic. A merged point is the rounded
    centroid with the rounded channel-wise mean color. Output is sorted by
    cell index, making it independent of input point order.
    """
    cloud.require_nonempty("octree_downsample")
    if not 1 <= level <= 10:
        raise ValueError(f"octree level must be in 1..10, got {level}")
    coords = cloud.coords.astype(np.float64)
    lo = coords.min(axis=0)
    side = (coords.max(axis=0) - lo).max()
    n_cells = 2**level
    if side == 0:
        cells = np.zeros_like(cloud.coords)
    else:
        cells = np.floor((coords - lo) * (n_cells / side)).astype(np.int64)
        np.clip(cells, 0, n_cells - 1, out=cells)

    keys = (cells[:, 0] * n_cells + cells[:, 1]) * n_cells + cells[:, 2]
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    starts = np.flatnonzero(np.r_[True, sorted_keys[1:] != sorted_keys[:-1]])
    counts = np.diff(np.r_[starts, len(keys)])
    group_ids = np.repeat(np.arange(len(starts)), counts)

    # Integer accumulation keeps the means exact, hence order-insensitive.
    def group_mean(values: np.ndarray) -> np.ndarray:
        sums = np.zeros((len(starts), values.shape[1]), dtype=np.int64)
        np.add.at(sums, group_ids, values[order].astype(np.int64))
        return sums / counts[:, None]

    merged_coords = round_half_away(group_mean(cloud.coords)).astype(np.int64)
    merged_colors = round_half_away(group_mean(cloud.colors)).astype(np.int64)
    return PointCloud(merged_coords, merged_colors.astype(np.uint8), cloud.name)


def gaussian_noise(
    cloud: PointCloud, sigma_geo: float, sigma_col: float, seed: int
) -> PointCloud:
    """Add i.i.d. zero-mean Gaussian noise to coordinates and colors.

    Noisy values are rounded to the nearest integer, colors clamped to
    [0, 255], and points whose coordinates collide after rounding are
    removed keeping the first occurrence. The generator is numpy's seeded
    PCG64, geometry drawn before color, so outputs are reproducible.
    """
    cloud.require_nonempty("gaussian_noise")
    if sigma_geo < 0 or sigma_col < 0:
        raise ValueError("noise standard deviations must be >= 0")
    rng = np.random.default_rng(seed)
    coords = cloud.coords.astype(np.float64)
    colors = cloud.colors.astype(np.float64)
    if sigma_geo > 0:
        coords = coords + rng.normal(0.0, sigma_geo, size=coords.shape)
    if sigma_col > 0:
        colors = colors + rng.normal(0.0, sigma_col, size=colors.shape)
    coords = round_half_away(coords).astype(np.int64)
    colors = np.clip(round_half_away(colors), 0, 255).astype(np.uint8)
    coords, colors = dedupe_coords(coords, colors)
    return PointCloud(coords, colors, cloud.name)


def apply_spec(cloud: PointCloud, spec: DistortionSpec) -> PointCloud:
    if spec.kind == "downsample":
        return octree_downsample(cloud, spec.level)
    return gaussian_noise(cloud, spec.sigma_geo, spec.sigma_col, spec.seed)


def generate_distortions(
    cloud: PointCloud, specs: list[DistortionSpec], out_dir: str | Path
) -> dict:
    """Write one distorted PLY per spec plus a manifest describing each file.

    Manifest entries carry the applied spec and seed; the reserved ``codec``
    and ``codec_params`` fields stay null for natively generated files and
    are filled in by external encoder pipelines.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for spec in specs:
        label = spec.default_label()
        out_path = out_dir / f"{cloud.name or 'cloud'}_{label}.ply"
        distorted = apply_spec(cloud, spec)
        save_ply(distorted, out_path, format="binary_le")
        entries.append(
            {
                "file": out_path.name,
                "source": cloud.name,
                "spec": asdict(spec),
                "label": label,
                "codec": None,
                "codec_params": None,
            }
        )
    manifest = {"source": cloud.name, "outputs": entries}
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
