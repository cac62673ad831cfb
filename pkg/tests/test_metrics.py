import numpy as np
import pytest

from pcqa.cloud import PointCloud
from pcqa.distort import gaussian_noise
from pcqa.metrics import (
    estimate_normals,
    iw_ssim_p,
    projection_metric,
    psnr_p2pl,
    psnr_p2po,
    psnr_y,
)
from pcqa.project import ProjectionConfig

from conftest import make_random_cloud
from oracles import brute_p2pl_error, brute_p2po_error, brute_psnr_y_error


class TestProjectionMetrics:
    def test_identity_is_maximal(self, blob_cloud):
        cfg = ProjectionConfig()
        assert iw_ssim_p(blob_cloud, blob_cloud, cfg).value == pytest.approx(1.0, abs=1e-9)
        assert projection_metric("ssim", blob_cloud, blob_cloud, cfg).value == pytest.approx(1.0)
        assert projection_metric("psnr", blob_cloud, blob_cloud, cfg).value == 100.0

    def test_per_view_count_and_aggregation(self, blob_cloud):
        cfg = ProjectionConfig()
        dis = gaussian_noise(blob_cloud, 1, 8, seed=3)
        score = iw_ssim_p(blob_cloud, dis, cfg)
        assert len(score.per_view) == 12
        assert score.value == pytest.approx(np.mean(score.per_view), abs=1e-9)

    def test_point_order_invariance(self, blob_cloud):
        cfg = ProjectionConfig()
        dis = gaussian_noise(blob_cloud, 1, 8, seed=4)
        rng = np.random.default_rng(0)
        perm = rng.permutation(len(dis))
        shuffled = PointCloud(dis.coords[perm], dis.colors[perm], dis.name)
        a = projection_metric("ssim", blob_cloud, dis, cfg)
        b = projection_metric("ssim", blob_cloud, shuffled, cfg)
        assert a.value == pytest.approx(b.value, abs=1e-12)

    def test_threaded_matches_serial(self, blob_cloud):
        cfg = ProjectionConfig()
        dis = gaussian_noise(blob_cloud, 1, 8, seed=5)
        serial = projection_metric("msssim", blob_cloud, dis, cfg, jobs=1)
        threaded = projection_metric("msssim", blob_cloud, dis, cfg, jobs=4)
        assert serial.per_view == threaded.per_view

    def test_unknown_kind(self, blob_cloud):
        with pytest.raises(ValueError, match="unknown projection kernel"):
            projection_metric("vif", blob_cloud, blob_cloud)


class TestP2po:
    def test_identity_capped(self):
        cloud = make_random_cloud(100, 50, seed=1)
        assert psnr_p2po(cloud, cloud, "mse").value == 100.0
        assert psnr_p2po(cloud, cloud, "hausdorff").value == 100.0

    def test_three_four_five_triangle(self):
        ref = PointCloud([[0, 0, 0]], [[0, 0, 0]])
        dis = PointCloud([[3, 4, 0]], [[0, 0, 0]])
        for mode in ("mse", "hausdorff"):
            score = psnr_p2po(ref, dis, mode)
            assert score.extras["error"] == 25.0
            # a single-point reference has zero diagonal, hence a -inf dB score
            assert score.extras["peak_sq"] == 0.0
            assert np.isneginf(score.value)

    def test_hand_computed_db(self):
        ref = PointCloud([[0, 0, 0], [10, 0, 0]], [[0, 0, 0]] * 2)
        dis = PointCloud([[3, 4, 0], [10, 0, 0]], [[0, 0, 0]] * 2)
        score = psnr_p2po(ref, dis, "hausdorff")
        assert score.extras["error"] == 25.0
        assert score.value == pytest.approx(10 * np.log10(100 / 25))
        mse = psnr_p2po(ref, dis, "mse")
        assert mse.extras["error"] == 12.5

    @pytest.mark.parametrize("mode", ["mse", "hausdorff"])
    def test_matches_brute_force(self, mode):
        ref = make_random_cloud(200, 60, seed=2)
        dis = make_random_cloud(180, 60, seed=3)
        score = psnr_p2po(ref, dis, mode)
        assert score.extras["error"] == brute_p2po_error(ref.coords, dis.coords, mode)

    def test_error_symmetric_under_swap(self):
        a = make_random_cloud(150, 40, seed=4)
        b = make_random_cloud(120, 40, seed=5)
        for mode in ("mse", "hausdorff"):
            assert (
                psnr_p2po(a, b, mode).extras["error"] == psnr_p2po(b, a, mode).extras["error"]
            )


class TestNormals:
    def test_planar_cloud(self):
        pts = np.array([[x, y, 0] for x in range(15) for y in range(15)])
        cloud = PointCloud(pts, np.full_like(pts, 90))
        ns = estimate_normals(cloud)
        assert np.allclose(np.abs(ns.normals[:, 2]), 1.0, atol=1e-6)
        assert not ns.degenerate.any()

    def test_sphere_normals_point_radially(self, sphere_cloud):
        ns = estimate_normals(sphere_cloud, k=12)
        center = sphere_cloud.coords.mean(axis=0)
        radial = sphere_cloud.coords - center
        radial = radial / np.linalg.norm(radial, axis=1, keepdims=True)
        alignment = np.einsum("ni,ni->n", ns.normals, radial)
        assert alignment.mean() > 0.95

    def test_k_exceeding_points_rejected(self):
        cloud = make_random_cloud(10, 20, seed=6)
        with pytest.raises(ValueError, match="exceeds"):
            estimate_normals(cloud, k=len(cloud))

    def test_degenerate_neighborhood_flagged(self):
        coords = np.vstack([np.zeros((6, 3), dtype=int), [[50, 50, 50], [60, 60, 60]]])
        cloud = PointCloud(coords, np.full_like(coords, 10))
        ns = estimate_normals(cloud, k=4)
        assert ns.degenerate[:6].all()
        assert np.allclose(np.linalg.norm(ns.normals, axis=1), 1.0, atol=1e-9)


class TestP2pl:
    def test_identity_capped(self):
        cloud = make_random_cloud(100, 50, seed=7)
        assert psnr_p2pl(cloud, cloud, "mse").value == 100.0

    def test_tangential_displacement_is_invisible(self):
        pts = np.array([[x, y, 0] for x in range(0, 40, 2) for y in range(0, 40, 2)])
        ref = PointCloud(pts, np.full_like(pts, 50))
        moved = PointCloud(pts + np.array([1, 0, 0]), ref.colors)
        p2pl = psnr_p2pl(ref, moved, "mse")
        p2po = psnr_p2po(ref, moved, "mse")
        assert p2pl.extras["error"] == pytest.approx(0.0, abs=1e-12)
        assert p2po.extras["error"] > 0

    @pytest.mark.parametrize("mode", ["mse", "hausdorff"])
    def test_matches_brute_force(self, mode):
        ref = make_random_cloud(200, 60, seed=8)
        dis = make_random_cloud(150, 60, seed=9)
        normals = estimate_normals(ref, k=8)
        score = psnr_p2pl(ref, dis, mode, normals=normals)
        expected = brute_p2pl_error(
            ref.coords.astype(float), dis.coords.astype(float), normals.normals, mode
        )
        assert score.extras["error"] == pytest.approx(expected, rel=1e-12)


class TestPsnrY:
    def test_identity_capped(self):
        cloud = make_random_cloud(100, 50, seed=10)
        assert psnr_y(cloud, cloud).value == 100.0

    def test_uniform_luma_shift(self):
        coords = make_random_cloud(200, 80, seed=11, unique=True).coords
        rng = np.random.default_rng(12)
        colors = rng.integers(0, 246, size=(len(coords), 3))
        ref = PointCloud(coords, colors)
        dis = PointCloud(coords, colors + 10)
        score = psnr_y(ref, dis)
        assert score.extras["error"] == pytest.approx(100.0)
        assert score.value == pytest.approx(10 * np.log10(255**2 / 100.0), abs=1e-9)

    def test_matches_brute_force(self):
        ref = make_random_cloud(200, 60, seed=13)
        dis = make_random_cloud(170, 60, seed=14)
        score = psnr_y(ref, dis)
        expected = brute_psnr_y_error(ref.coords, ref.colors, dis.coords, dis.colors)
        assert score.extras["error"] == pytest.approx(expected, rel=1e-12)

    def test_error_symmetric_under_swap(self):
        a = make_random_cloud(150, 40, seed=15)
        b = make_random_cloud(140, 40, seed=16)
        assert psnr_y(a, b).extras["error"] == psnr_y(b, a).extras["error"]


def test_metric_records_serialize(blob_cloud):
    score = psnr_y(blob_cloud, blob_cloud)
    record = score.to_record("ref", "dis")
    assert record["metric"] == "psnr_y"
    assert record["value"] == 100.0
    import json

    json.dumps(record)
