import numpy as np
import pytest

from pcqa.iqa2d import (
    IwSsimParams,
    _detail_band,
    _expand,
    _pooled,
    _reduce,
    info_weight_map,
    iw_ssim,
    iw_ssim_scales,
    ms_ssim,
    psnr,
    save_weight_maps,
    ssim,
    to_luma,
)

from conftest import textured_image


def noisy(img: np.ndarray, sigma: float, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.clip(img + rng.normal(0, sigma, img.shape), 0, 255)


class TestLuma:
    def test_gray_is_127(self):
        rgb = np.full((4, 4, 3), 127, dtype=np.uint8)
        assert np.allclose(to_luma(rgb), 127.0)

    def test_pure_red(self):
        rgb = np.zeros((1, 1, 3), dtype=np.uint8)
        rgb[..., 0] = 255
        assert to_luma(rgb)[0, 0] == pytest.approx(0.299 * 255)

    def test_black_is_zero(self):
        assert to_luma(np.zeros((2, 2, 3)))[0, 0] == 0.0

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            to_luma(np.zeros((4, 4)))


class TestPsnr:
    def test_identity_capped(self):
        img = textured_image()
        assert psnr(img, img) == 100.0

    def test_full_range_constant_difference(self):
        x = np.zeros((8, 8))
        y = np.full((8, 8), 255.0)
        assert psnr(x, y) == pytest.approx(0.0)

    def test_matches_direct_mse(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 255, (32, 32))
        y = rng.uniform(0, 255, (32, 32))
        mse = ((x - y) ** 2).mean()
        assert psnr(x, y) == pytest.approx(10 * np.log10(255**2 / mse), abs=1e-9)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            psnr(np.zeros((4, 4)), np.zeros((5, 5)))


class TestSsim:
    def test_identity(self):
        img = textured_image()
        assert ssim(img, img).score == pytest.approx(1.0)

    def test_inverted_is_dissimilar(self):
        img = textured_image(seed=2)
        assert ssim(img, 255.0 - img).score < 0.3

    def test_constant_pair(self):
        x = np.full((32, 32), 40.0)
        assert ssim(x, x.copy()).score == pytest.approx(1.0)

    def test_symmetric(self):
        x = textured_image(seed=3)
        y = noisy(x, 12, seed=4)
        assert ssim(x, y).score == pytest.approx(ssim(y, x).score, abs=1e-12)

    def test_window_larger_than_image(self):
        with pytest.raises(ValueError, match="smaller"):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))

    def test_map_support_is_valid_region(self):
        img = textured_image((64, 48))
        res = ssim(img, img)
        assert res.cs.shape == (54, 38)
        assert res.luminance.shape == (54, 38)


class TestMsSsim:
    def test_identity(self):
        img = textured_image()
        assert ms_ssim(img, img) == pytest.approx(1.0)

    def test_bounded(self):
        x = textured_image(seed=5)
        y = 255.0 - x
        assert -1.0 <= ms_ssim(x, y) <= 1.0

    def test_monotone_in_noise(self):
        img = textured_image(seed=6)
        scores = [ms_ssim(img, noisy(img, s, seed=7)) for s in (5, 15, 30)]
        assert scores[0] > scores[1] > scores[2]

    def test_too_small_rejected(self):
        with pytest.raises(ValueError, match="too small"):
            ms_ssim(np.zeros((64, 64)), np.zeros((64, 64)))


class TestPyramid:
    def test_reduce_halves_and_preserves_constant(self):
        k = np.array(IwSsimParams().lowpass)
        plane = np.full((65, 64), 9.5)
        lo = _reduce(plane, k)
        assert lo.shape == (33, 32)
        assert np.allclose(lo, 9.5)

    def test_expand_preserves_constant(self):
        k = np.array(IwSsimParams().lowpass)
        lo = np.full((33, 32), 4.25)
        hi = _expand(lo, (65, 64))
        assert hi.shape == (65, 64)
        assert np.allclose(hi, 4.25)

    def test_detail_band_zero_on_constant(self):
        k = np.array(IwSsimParams().lowpass)
        plane = np.full((80, 80), 127.0)
        assert np.max(np.abs(_detail_band(plane, k))) < 1e-12


class TestInfoWeights:
    def test_constant_planes_have_zero_weight(self):
        x = np.full((32, 32), 50.0)
        w = info_weight_map(x, x.copy())
        assert np.all(w == 0.0)

    def test_textured_region_outweighs_flat(self):
        rng = np.random.default_rng(8)
        x = np.full((40, 80), 100.0)
        x[:, 40:] += rng.normal(0, 25, (40, 40))
        y = noisy(x, 3, seed=9)
        w = info_weight_map(x, y)
        flat = w[:, : w.shape[1] // 2 - 2].mean()
        textured = w[:, w.shape[1] // 2 + 2 :].mean()
        assert textured > flat

    def test_nonnegative(self):
        x = textured_image(seed=10)
        y = noisy(x, 20, seed=11)
        assert (info_weight_map(x, y) >= 0).all()


class TestIwSsim:
    def test_identity(self):
        img = textured_image()
        assert iw_ssim(img, img) == pytest.approx(1.0, abs=1e-9)

    def test_monotone_in_noise(self):
        img = textured_image(seed=12)
        scores = [iw_ssim(img, noisy(img, s, seed=13)) for s in (5, 15, 30)]
        assert scores[0] > scores[1] > scores[2]

    def test_near_symmetry(self):
        for seed in (14, 15, 16):
            x = textured_image(seed=seed)
            y = noisy(x, 18, seed=seed + 50)
            assert abs(iw_ssim(x, y) - iw_ssim(y, x)) < 0.05

    def test_flat_weight_limit_equals_uniform_pooling(self):
        x = textured_image(seed=17)
        y = noisy(x, 15, seed=18)
        params = IwSsimParams(sigma_n_sq=1e6)
        for s in iw_ssim_scales(x, y, params):
            assert s.pooled == pytest.approx(s.uniform, abs=1e-6)

    def test_constant_weight_map_pools_to_mean(self):
        rng = np.random.default_rng(19)
        values = rng.uniform(-1, 1, (30, 30))
        assert _pooled(values, np.full_like(values, 0.7)) == pytest.approx(values.mean())
        assert _pooled(values, np.zeros_like(values)) == pytest.approx(values.mean())

    def test_no_nan_on_edge_case_images(self):
        cases = [
            (np.zeros((192, 192)), np.zeros((192, 192))),
            (np.full((192, 192), 255.0), np.zeros((192, 192))),
            (np.full((192, 192), 127.0), np.full((192, 192), 127.0)),
        ]
        single = np.zeros((192, 192))
        single[96, 96] = 255.0
        cases.append((np.zeros((192, 192)), single))
        for x, y in cases:
            for value in (
                iw_ssim(x, y),
                ms_ssim(x, y),
                ssim(x, y).score,
                psnr(x, y),
            ):
                assert np.isfinite(value)

    def test_weight_map_alignment(self):
        img = textured_image((200, 176))
        scales = iw_ssim_scales(img, img)
        for s in scales:
            assert s.weight_map.shape == s.value_map.shape


def test_save_weight_maps(tmp_path):
    x = textured_image(seed=20)
    scales = iw_ssim_scales(x, noisy(x, 10, seed=21))
    paths = save_weight_maps(scales, tmp_path)
    assert len(paths) == 5
    assert all(p.exists() for p in paths)
