"""Full-reference quality metric drivers for colored point clouds.

Projection metrics render paired snapshots from every icosphere viewpoint
and average a 2D kernel over the views; point metrics compare the clouds
directly through nearest-neighbor correspondences. All scores report the
aggregation of their per-view or per-direction components, never a bare
intermediate.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from pcqa.cloud import NeighborIndex, PointCloud, bounding_stats, build_index
from pcqa.iqa2d import IwSsimParams, iw_ssim, ms_ssim, psnr, ssim, to_luma
from pcqa.project import ProjectionConfig, auto_canvas, project
from pcqa.util import config_digest

PSNR_CAP_DB = 100.0

PROJECTION_KINDS = ("iwssim", "psnr", "ssim", "msssim")


@dataclass(frozen=True)
class MetricScore:
    """One metric evaluation: scalar score plus per-view breakdown if any."""

    metric: str
    value: float
    higher_better: bool = True
    per_view: tuple[float, ...] | None = None
    extras: dict = field(default_factory=dict)
    digest: str = ""

    def to_record(self, ref: str, dis: str) -> dict:
        return {
            "ref": ref,
            "dis": dis,
            "metric": self.metric,
            "value": self.value,
            "higher_better": self.higher_better,
            "per_view": list(self.per_view) if self.per_view is not None else None,
            "extras": self.extras,
            "config_digest": self.digest,
        }


@dataclass(frozen=True)
class NormalSet:
    """Per-point unit normals; degenerate neighborhoods are flagged."""

    normals: np.ndarray  # (N, 3) float64, unit rows
    degenerate: np.ndarray  # (N,) bool


# ---------------------------------------------------------------------------
# Projection-based metrics
# ---------------------------------------------------------------------------


def _luma_pairs(ref: PointCloud, dis: PointCloud, cfg: ProjectionConfig, jobs: int = 1):
    """Luma plane pairs for every viewpoint, sharing t_r and canvas."""
    ref.require_nonempty("projection metric")
    dis.require_nonempty("projection metric")
    stats = bounding_stats(ref)
    canvas = cfg.canvas if cfg.canvas != "auto" else auto_canvas(stats, cfg.scale)

    def render(view):
        img_ref = project(ref, stats.center, view, cfg, canvas)
        img_dis = project(dis, stats.center, view, cfg, canvas)
        return to_luma(img_ref.pixels), to_luma(img_dis.pixels)

    views = cfg.viewpoints.viewpoints
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(render, views))
    return [render(v) for v in views]


def _projection_scores(
    ref: PointCloud,
    dis: PointCloud,
    cfg: ProjectionConfig,
    params: IwSsimParams,
    kinds: tuple[str, ...],
    jobs: int = 1,
) -> dict[str, list[float]]:
    kernels = {
        "iwssim": lambda x, y: iw_ssim(x, y, params),
        "psnr": lambda x, y: psnr(x, y, peak=params.data_range, cap=PSNR_CAP_DB),
        "ssim": lambda x, y: ssim(x, y, params).score,
        "msssim": lambda x, y: ms_ssim(x, y, params),
    }
    for kind in kinds:
        if kind not in kernels:
            raise ValueError(f"unknown projection kernel '{kind}'")
    per_view: dict[str, list[float]] = {k: [] for k in kinds}
    for luma_ref, luma_dis in _luma_pairs(ref, dis, cfg, jobs=jobs):
        for kind in kinds:
            per_view[kind].append(kernels[kind](luma_ref, luma_dis))
    return per_view


_METRIC_IDS = {"iwssim": "iwssim_p", "psnr": "psnr_p", "ssim": "ssim_p", "msssim": "msssim_p"}


def projection_metric(
    kind: str,
    ref: PointCloud,
    dis: PointCloud,
    cfg: ProjectionConfig | None = None,
    params: IwSsimParams | None = None,
    jobs: int = 1,
) -> MetricScore:
    """Projection metric of the requested kind, averaged over all views."""
    cfg = cfg or ProjectionConfig()
    params = params or IwSsimParams()
    views = _projection_scores(ref, dis, cfg, params, (kind,), jobs=jobs)[kind]
    return MetricScore(
        metric=_METRIC_IDS[kind],
        value=float(np.mean(views)),
        per_view=tuple(views),
        digest=config_digest(cfg.scale, cfg.canvas, cfg.background, cfg.viewpoints.level, params),
    )


def iw_ssim_p(
    ref: PointCloud,
    dis: PointCloud,
    cfg: ProjectionConfig | None = None,
    params: IwSsimParams | None = None,
    jobs: int = 1,
) -> MetricScore:
    """Information-weighted SSIM over projected snapshots, mean across views."""
    return projection_metric("iwssim", ref, dis, cfg, params, jobs=jobs)


# ---------------------------------------------------------------------------
# Point-based metrics
# ---------------------------------------------------------------------------


def _geometry_psnr(error: float, peak_sq: float) -> float:
    if error == 0.0:
        return PSNR_CAP_DB
    if peak_sq == 0.0:
        return float("-inf")
    return float(min(10.0 * np.log10(peak_sq / error), PSNR_CAP_DB))


def _aggregate(values: np.ndarray, mode: str) -> float:
    if mode == "mse":
        return float(values.mean())
    if mode == "hausdorff":
        return float(values.max())
    raise ValueError(f"unknown aggregation mode '{mode}'")


def psnr_p2po(ref: PointCloud, dis: PointCloud, mode: str = "mse") -> MetricScore:
    """Point-to-point geometry PSNR, symmetric max of both directions.

    The peak is the squared diagonal of the reference bounding box, recorded
    in the extras so scores remain interpretable across clouds.
    """
    ref.require_nonempty("psnr_p2po")
    dis.require_nonempty("psnr_p2po")
    ref_index = build_index(ref)
    dis_index = build_index(dis)
    d_ab, _ = dis_index.nearest(ref.coords)
    d_ba, _ = ref_index.nearest(dis.coords)
    error = max(_aggregate(d_ab**2, mode), _aggregate(d_ba**2, mode))
    peak_sq = bounding_stats(ref).diagonal ** 2
    return MetricScore(
        metric=f"psnr_p2po_{'m' if mode == 'mse' else 'h'}",
        value=_geometry_psnr(error, peak_sq),
        extras={"error": error, "peak_sq": peak_sq, "mode": mode},
    )


def estimate_normals(cloud: PointCloud, k: int = 12) -> NormalSet:
    """Per-point normals from PCA over the k nearest neighbors.

    The normal is the smallest-eigenvalue eigenvector of the neighborhood
    covariance, oriented away from the cloud centroid. Neighborhoods with
    zero covariance fall back to +z and are flagged.
    """
    cloud.require_nonempty("estimate_normals")
    n = len(cloud)
    if k < 3:
        raise ValueError("normal estimation needs k >= 3")
    if k > n - 1:
        raise ValueError(f"k={k} exceeds available neighbors ({n - 1})")
    coords = cloud.coords.astype(np.float64)
    index = build_index(cloud)
    _, neighbors = index._tree.query(coords, k=k + 1)
    # Drop each point from its own neighborhood; if absent (duplicate
    # coordinates crowding it out), drop the farthest instead.
    self_col = neighbors == np.arange(n)[:, None]
    has_self = self_col.any(axis=1)
    drop = np.where(has_self, self_col.argmax(axis=1), k)
    mask = np.ones_like(neighbors, dtype=bool)
    mask[np.arange(n), drop] = False
    neighborhood = coords[neighbors[mask].reshape(n, k)]

    centered = neighborhood - neighborhood.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    eigvals, eigvecs = np.linalg.eigh(cov)
    normals = eigvecs[:, :, 0]
    degenerate = eigvals[:, 2] <= 1e-12
    normals[degenerate] = (0.0, 0.0, 1.0)

    outward = coords - coords.mean(axis=0)
    flip = np.einsum("ni,ni->n", normals, outward) < 0
    normals[flip] *= -1.0
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    normals /= norms
    return NormalSet(normals=normals, degenerate=degenerate)


def psnr_p2pl(
    ref: PointCloud,
    dis: PointCloud,
    mode: str = "mse",
    normals: NormalSet | None = None,
    k: int = 12,
) -> MetricScore:
    """Point-to-plane geometry PSNR: displacement projected on ref normals.

    Both directions use the reference surface's normals (at the matched
    reference point), then aggregate exactly as psnr_p2po does.
    """
    ref.require_nonempty("psnr_p2pl")
    dis.require_nonempty("psnr_p2pl")
    if normals is None:
        normals = estimate_normals(ref, k=k)
    ref_index = build_index(ref)
    dis_index = build_index(dis)
    ref_coords = ref.coords.astype(np.float64)
    dis_coords = dis.coords.astype(np.float64)

    _, nearest_ref = ref_index.nearest(dis_coords)
    disp_ba = dis_coords - ref_coords[nearest_ref]
    err_ba = np.einsum("ni,ni->n", disp_ba, normals.normals[nearest_ref]) ** 2

    _, nearest_dis = dis_index.nearest(ref_coords)
    disp_ab = dis_coords[nearest_dis] - ref_coords
    err_ab = np.einsum("ni,ni->n", disp_ab, normals.normals) ** 2

    error = max(_aggregate(err_ab, mode), _aggregate(err_ba, mode))
    peak_sq = bounding_stats(ref).diagonal ** 2
    return MetricScore(
        metric=f"psnr_p2pl_{'m' if mode == 'mse' else 'h'}",
        value=_geometry_psnr(error, peak_sq),
        extras={"error": error, "peak_sq": peak_sq, "mode": mode},
    )


def psnr_y(ref: PointCloud, dis: PointCloud) -> MetricScore:
    """Color PSNR on luma through nearest-geometry correspondences.

    Each point's luma is compared against its geometric nearest neighbor in
    the other cloud; the symmetric max of the two directional MSEs converts
    to dB with peak 255.
    """
    ref.require_nonempty("psnr_y")
    dis.require_nonempty("psnr_y")
    luma_ref = to_luma(ref.colors)
    luma_dis = to_luma(dis.colors)
    ref_index = build_index(ref)
    dis_index = build_index(dis)
    _, nearest_ref = ref_index.nearest(dis.coords)
    _, nearest_dis = dis_index.nearest(ref.coords)
    mse_ba = float(np.mean((luma_dis - luma_ref[nearest_ref]) ** 2))
    mse_ab = float(np.mean((luma_ref - luma_dis[nearest_dis]) ** 2))
    error = max(mse_ab, mse_ba)
    return MetricScore(
        metric="psnr_y",
        value=_geometry_psnr(error, 255.0**2),
        extras={"error": error, "peak_sq": 255.0**2},
    )
