"""Full-reference 2D quality kernels applied to projected snapshots.

Implements the SSIM family on luma planes: plain SSIM, multi-scale SSIM,
and information-content-weighted SSIM. The information weight models each
local patch as a Gaussian source C observed through two noisy channels: the
reference observation E = C + N1 and the distorted observation
F = g*C + V + N2, where g is the local gain, V the distortion-induced noise,
and N1, N2 i.i.d. perceptual noise of variance ``sigma_n_sq``. The weight of
a patch is the mutual information I(C; E, F) in bits: regions that tell the
observer nothing about the source (e.g. a flat background) receive zero
weight, strongly textured regions receive several bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.ndimage import correlate1d

_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
_EPS = 1e-10


@dataclass(frozen=True)
class IwSsimParams:
    """Parameters of the SSIM family.

    ``min_weight`` is an information significance floor in bits: windows
    whose modeled mutual information falls below it are treated as carrying
    none. On 8-bit data every window's information is below 0.1 bit once
    ``sigma_n_sq`` reaches ~1e6, so the floor also realizes the documented
    flat-weight limit in which weighted pooling degenerates to the uniform
    mean.
    """

    scales: int = 5
    window_size: int = 11
    window_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 255.0
    scale_weights: tuple[float, ...] = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
    info_window: int = 3
    sigma_n_sq: float = 0.4
    min_weight: float = 0.1
    lowpass: tuple[float, ...] = (1 / 16, 4 / 16, 6 / 16, 4 / 16, 1 / 16)

    def __post_init__(self) -> None:
        if self.scales < 1 or len(self.scale_weights) != self.scales:
            raise ValueError("scale_weights length must equal scales")
        total = sum(self.scale_weights)
        if abs(total - 1.0) > 1e-3:
            raise ValueError("scale_weights must sum to 1")
        if abs(total - 1.0) > 1e-6:
            # The published constants sum to 1.0001; renormalize so pooling
            # exponents form an exact partition of unity.
            object.__setattr__(
                self, "scale_weights", tuple(w / total for w in self.scale_weights)
            )
        for name in ("window_size", "window_sigma", "k1", "k2", "data_range", "info_window", "sigma_n_sq"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.window_size % 2 == 0 or self.info_window % 2 == 0:
            raise ValueError("window sizes must be odd")
        if self.min_weight < 0:
            raise ValueError("min_weight must be non-negative")

    def min_side(self) -> int:
        return self.window_size * 2 ** (self.scales - 1)


class SsimResult(NamedTuple):
    score: float
    cs: np.ndarray  # contrast-structure map, valid-window support
    luminance: np.ndarray  # luminance comparison map, same support


def to_luma(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma, float64, same leading shape as the input raster."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected trailing RGB axis of size 3, got shape {rgb.shape}")
    return rgb @ _LUMA_WEIGHTS


def psnr(x: np.ndarray, y: np.ndarray, peak: float = 255.0, cap: float = 100.0) -> float:
    """Peak signal-to-noise ratio in dB, capped so aggregates stay finite."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return cap
    return min(10.0 * math.log10(peak * peak / mse), cap)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2
    k = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def _valid_filter(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable correlation keeping only fully-supported (valid) output."""
    r = len(kernel) // 2
    out = correlate1d(plane, kernel, axis=0, mode="constant")
    out = correlate1d(out, kernel, axis=1, mode="constant")
    return out[r:-r, r:-r] if r else out


def _check_pair(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape != y.shape:
        raise ValueError(f"expected equal-shaped 2D planes, got {x.shape} and {y.shape}")
    return x, y


def ssim(x: np.ndarray, y: np.ndarray, params: IwSsimParams = IwSsimParams()) -> SsimResult:
    """Single-scale SSIM with Gaussian valid windowing.

    Returns the mean score together with the per-pixel contrast-structure
    and luminance maps so multi-scale variants can reuse them.
    """
    x, y = _check_pair(x, y)
    if min(x.shape) < params.window_size:
        raise ValueError(
            f"image {x.shape} smaller than the {params.window_size}x{params.window_size} window"
        )
    kernel = _gaussian_kernel(params.window_size, params.window_sigma)
    c1 = (params.k1 * params.data_range) ** 2
    c2 = (params.k2 * params.data_range) ** 2

    mu_x = _valid_filter(x, kernel)
    mu_y = _valid_filter(y, kernel)
    var_x = np.maximum(_valid_filter(x * x, kernel) - mu_x * mu_x, 0.0)
    var_y = np.maximum(_valid_filter(y * y, kernel) - mu_y * mu_y, 0.0)
    cov = _valid_filter(x * y, kernel) - mu_x * mu_y

    luminance = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    cs = (2.0 * cov + c2) / (var_x + var_y + c2)
    return SsimResult(score=float(np.mean(luminance * cs)), cs=cs, luminance=luminance)


# ---------------------------------------------------------------------------
# Dyadic pyramid: binomial low-pass reduce, phase-correct expand
# ---------------------------------------------------------------------------


def _reduce(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = correlate1d(plane, kernel, axis=0, mode="reflect")
    out = correlate1d(out, kernel, axis=1, mode="reflect")
    return out[::2, ::2]


def _expand_axis(arr: np.ndarray, axis: int, n_out: int) -> np.ndarray:
    a = np.moveaxis(arr, axis, 0)
    m = a.shape[0]
    if m == 1:
        out = np.repeat(a, n_out, axis=0)
        return np.moveaxis(out, 0, axis)
    pad = np.pad(a, [(1, 1)] + [(0, 0)] * (a.ndim - 1), mode="reflect")
    even = (pad[:m] + 6.0 * pad[1 : m + 1] + pad[2 : m + 2]) / 8.0
    odd = (pad[1 : m + 1] + pad[2 : m + 2]) / 2.0
    out = np.empty((n_out,) + a.shape[1:], dtype=np.float64)
    out[0::2] = even[: (n_out + 1) // 2]
    out[1::2] = odd[: n_out // 2]
    return np.moveaxis(out, 0, axis)


def _expand(lo: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    out = _expand_axis(lo, 0, shape[0])
    return _expand_axis(out, 1, shape[1])


def _detail_band(plane: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """High-frequency residual: the plane minus its low-pass prediction.

    Constant regions predict themselves exactly, so flat areas (notably the
    gray snapshot background) have an identically zero detail band.
    """
    return plane - _expand(_reduce(plane, kernel), plane.shape)


def info_weight_map(
    x: np.ndarray, y: np.ndarray, params: IwSsimParams = IwSsimParams()
) -> np.ndarray:
    """Per-window mutual information I(C; E, F) in bits, on valid support.

    Local statistics over a uniform ``info_window`` square give the source
    variance s1, the distorted variance s2, and their covariance s12; the
    channel is then gain g = s12/s1 with distortion noise sv = s2 - g*s12.
    For jointly Gaussian variables,

        I(C; E, F) = 1/2 * log2( det Cov(E,F) / det Cov(E,F | C) )
                   = 1/2 * log2( ((s1+sn)(g^2 s1 + sv + sn) - g^2 s1^2)
                                 / (sn (sv + sn)) )

    with sn = ``sigma_n_sq``. The result is floored at zero and weights
    below ``min_weight`` bits are zeroed as insignificant.
    """
    x, y = _check_pair(x, y)
    if min(x.shape) < params.info_window:
        raise ValueError(f"plane {x.shape} smaller than the info window")
    kernel = np.full(params.info_window, 1.0 / params.info_window)
    mu_x = _valid_filter(x, kernel)
    mu_y = _valid_filter(y, kernel)
    s1 = np.maximum(_valid_filter(x * x, kernel) - mu_x * mu_x, 0.0)
    s2 = np.maximum(_valid_filter(y * y, kernel) - mu_y * mu_y, 0.0)
    s12 = _valid_filter(x * y, kernel) - mu_x * mu_y

    g = s12 / (s1 + _EPS)
    sv = np.maximum(s2 - g * s12, 0.0)
    sn = params.sigma_n_sq
    numer = (s1 + sn) * (g * g * s1 + sv + sn) - g * g * s1 * s1
    denom = sn * (sv + sn)
    w = 0.5 * np.log2(np.maximum(numer / denom, 1.0))
    w[w < params.min_weight] = 0.0
    return w


@dataclass(frozen=True)
class ScaleScore:
    """Per-scale pooling outcome of the information-weighted pipeline."""

    scale: int
    pooled: float  # information-weighted mean of the value map
    uniform: float  # plain mean of the same map
    value_map: np.ndarray  # cs map, or luminance*cs at the coarsest scale
    weight_map: np.ndarray  # aligned with value_map


def _pooled(value_map: np.ndarray, weight_map: np.ndarray) -> float:
    total = weight_map.sum()
    if total <= 0.0:
        return float(value_map.mean())
    return float((value_map * weight_map).sum() / total)


def _require_pyramid_size(x: np.ndarray, params: IwSsimParams) -> None:
    if min(x.shape) < params.min_side():
        raise ValueError(
            f"image {x.shape} too small for {params.scales} scales; "
            f"needs at least {params.min_side()} per side"
        )


def iw_ssim_scales(
    x: np.ndarray, y: np.ndarray, params: IwSsimParams = IwSsimParams()
) -> list[ScaleScore]:
    """Run the multi-scale decomposition and return per-scale pooling detail.

    At every scale the similarity maps are computed on the low-pass plane
    while the information weights come from its detail band, where flat
    luminance carries no weight. The weight map's 3x3 support is cropped to
    the SSIM window's valid support so the two maps align pixel-for-pixel.
    """
    x, y = _check_pair(x, y)
    _require_pyramid_size(x, params)
    kernel = np.asarray(params.lowpass, dtype=np.float64)
    margin = params.window_size // 2 - params.info_window // 2

    scores: list[ScaleScore] = []
    for j in range(params.scales):
        res = ssim(x, y, params)
        weights = info_weight_map(_detail_band(x, kernel), _detail_band(y, kernel), params)
        weights = weights[margin:-margin, margin:-margin] if margin else weights
        value = res.luminance * res.cs if j == params.scales - 1 else res.cs
        scores.append(
            ScaleScore(
                scale=j,
                pooled=_pooled(value, weights),
                uniform=float(value.mean()),
                value_map=value,
                weight_map=weights,
            )
        )
        if j < params.scales - 1:
            x = _reduce(x, kernel)
            y = _reduce(y, kernel)
    return scores


def iw_ssim(x: np.ndarray, y: np.ndarray, params: IwSsimParams = IwSsimParams()) -> float:
    """Information-content-weighted SSIM across ``params.scales`` scales."""
    scores = iw_ssim_scales(x, y, params)
    result = 1.0
    for s, beta in zip(scores, params.scale_weights):
        result *= max(s.pooled, 0.0) ** beta
    return float(result)


def ms_ssim(x: np.ndarray, y: np.ndarray, params: IwSsimParams = IwSsimParams()) -> float:
    """Multi-scale SSIM: uniform-mean cs per scale, luminance at the coarsest."""
    x, y = _check_pair(x, y)
    _require_pyramid_size(x, params)
    kernel = np.asarray(params.lowpass, dtype=np.float64)
    result = 1.0
    for j in range(params.scales):
        res = ssim(x, y, params)
        mean = res.score if j == params.scales - 1 else float(np.mean(res.cs))
        result *= max(mean, 0.0) ** params.scale_weights[j]
        if j < params.scales - 1:
            x = _reduce(x, kernel)
            y = _reduce(y, kernel)
    return float(result)


def save_weight_maps(
    scores: list[ScaleScore], directory: str | Path, prefix: str = "weights"
) -> list[Path]:
    """Dump per-scale weight maps as grayscale PNGs for visual inspection."""
    from PIL import Image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for s in scores:
        w = s.weight_map
        top = w.max()
        scaled = (w / top * 255.0) if top > 0 else np.zeros_like(w)
        img = Image.fromarray(scaled.astype(np.uint8), mode="L")
        out = directory / f"{prefix}_scale{s.scale}.png"
        img.save(out)
        paths.append(out)
    return paths
