"""Quality assessment toolkit for colored 3D point clouds.

Provides a full-reference, projection-based quality metric (information
content weighted SSIM pooled over icosphere viewpoints), the classical
point-based and projection-based baselines it is usually compared with,
distortion generators for building test sets, and a benchmark harness for
subjective-score processing, correlation analysis, and statistical
significance testing.
"""

from pcqa.cloud import (
    BoundingStats,
    NeighborIndex,
    PointCloud,
    PlyError,
    bounding_stats,
    build_index,
    load_ply,
    normalize_to_grid,
    save_ply,
)
from pcqa.view import Viewpoint, ViewpointSet, icosphere_normals, rotation_for
from pcqa.project import (
    CanvasError,
    ProjectedImage,
    ProjectionConfig,
    auto_canvas,
    project,
    project_pair,
)
from pcqa.iqa2d import IwSsimParams, info_weight_map, iw_ssim, ms_ssim, psnr, ssim, to_luma
from pcqa.metrics import (
    MetricScore,
    NormalSet,
    estimate_normals,
    iw_ssim_p,
    projection_metric,
    psnr_p2pl,
    psnr_p2po,
    psnr_y,
)
from pcqa.distort import DistortionSpec, gaussian_noise, octree_downsample
from pcqa.bench import (
    SubjectiveDataset,
    compute_mos,
    correlations,
    fit_logistic,
    run_benchmark,
    significance_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingStats",
    "CanvasError",
    "DistortionSpec",
    "IwSsimParams",
    "MetricScore",
    "NeighborIndex",
    "NormalSet",
    "PlyError",
    "PointCloud",
    "ProjectedImage",
    "ProjectionConfig",
    "SubjectiveDataset",
    "Viewpoint",
    "ViewpointSet",
    "auto_canvas",
    "bounding_stats",
    "build_index",
    "compute_mos",
    "correlations",
    "estimate_normals",
    "fit_logistic",
    "gaussian_noise",
    "icosphere_normals",
    "info_weight_map",
    "iw_ssim",
    "iw_ssim_p",
    "load_ply",
    "ms_ssim",
    "normalize_to_grid",
    "octree_downsample",
    "project",
    "project_pair",
    "projection_metric",
    "psnr",
    "psnr_p2pl",
    "psnr_p2po",
    "psnr_y",
    "rotation_for",
    "run_benchmark",
    "save_ply",
    "significance_matrix",
    "ssim",
    "to_luma",
]
