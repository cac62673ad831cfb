import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcqa.cloud import (
    PlyError,
    PointCloud,
    bounding_stats,
    build_index,
    load_ply,
    normalize_to_grid,
    save_ply,
)

from conftest import make_random_cloud
from oracles import brute_nearest


def write_text_ply(path, body, props=("x", "y", "z", "red", "green", "blue"), count=None):
    lines = body.strip().splitlines()
    count = len(lines) if count is None else count
    types = {"red": "uchar", "green": "uchar", "blue": "uchar"}
    header = ["ply", "format ascii 1.0", f"element vertex {count}"]
    header += [f"property {types.get(p, 'float')} {p}" for p in props]
    header.append("end_header")
    path.write_text("\n".join(header) + "\n" + body.strip() + "\n")


class TestPlyRead:
    def test_single_ascii_vertex(self, tmp_path):
        p = tmp_path / "one.ply"
        write_text_ply(p, "0 0 0 255 0 0")
        cloud = load_ply(p)
        assert len(cloud) == 1
        assert cloud.coords.tolist() == [[0, 0, 0]]
        assert cloud.colors.tolist() == [[255, 0, 0]]

    def test_binary_matches_ascii_reencoding(self, tmp_path):
        cloud = make_random_cloud(3, 50, seed=0)
        save_ply(cloud, tmp_path / "b.ply", "binary_le")
        reread = load_ply(tmp_path / "b.ply")
        save_ply(reread, tmp_path / "a.ply", "ascii")
        assert load_ply(tmp_path / "a.ply") == cloud

    def test_missing_color_property(self, tmp_path):
        p = tmp_path / "nored.ply"
        write_text_ply(p, "0 0 0 1 2", props=("x", "y", "z", "green", "blue"))
        with pytest.raises(PlyError, match="missing color property 'red'"):
            load_ply(p)

    def test_big_endian_rejected(self, tmp_path):
        p = tmp_path / "be.ply"
        p.write_text("ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n")
        with pytest.raises(PlyError, match="binary_big_endian"):
            load_ply(p)

    def test_truncated_ascii_body_reports_line(self, tmp_path):
        p = tmp_path / "trunc.ply"
        write_text_ply(p, "0 0 0 1 2 3", count=2)
        with pytest.raises(PlyError, match="truncated"):
            load_ply(p)

    def test_truncated_binary_body_reports_offset(self, tmp_path):
        cloud = make_random_cloud(10, 50, seed=1)
        p = tmp_path / "t.ply"
        save_ply(cloud, p, "binary_le")
        p.write_bytes(p.read_bytes()[:-5])
        with pytest.raises(PlyError, match="byte offset"):
            load_ply(p)

    def test_unknown_properties_skipped(self, tmp_path):
        p = tmp_path / "extra.ply"
        write_text_ply(
            p, "1 2 3 0.5 10 20 30", props=("x", "y", "z", "alpha", "red", "green", "blue")
        )
        cloud = load_ply(p)
        assert cloud.coords.tolist() == [[1, 2, 3]]
        assert cloud.colors.tolist() == [[10, 20, 30]]

    def test_float_coordinates_rounded(self, tmp_path):
        p = tmp_path / "float.ply"
        write_text_ply(p, "1.4 2.5 -0.5 1 2 3")
        cloud = load_ply(p)
        assert cloud.coords.tolist() == [[1, 3, -1]]


class TestPlyRoundTrip:
    @pytest.mark.parametrize("fmt", ["ascii", "binary_le"])
    def test_large_random_round_trip(self, tmp_path, fmt):
        cloud = make_random_cloud(10_000, 1000, seed=7)
        path = tmp_path / f"c_{fmt}.ply"
        save_ply(cloud, path, fmt)
        assert load_ply(path) == cloud

    @settings(max_examples=25, deadline=None)
    @given(
        data=st.lists(
            st.tuples(
                st.integers(-2000, 2000),
                st.integers(-2000, 2000),
                st.integers(-2000, 2000),
                st.integers(0, 255),
                st.integers(0, 255),
                st.integers(0, 255),
            ),
            min_size=1,
            max_size=40,
        ),
        fmt=st.sampled_from(["ascii", "binary_le"]),
    )
    def test_round_trip_is_identity(self, tmp_path_factory, data, fmt):
        rows = np.array(data, dtype=np.int64)
        cloud = PointCloud(rows[:, :3], rows[:, 3:])
        path = tmp_path_factory.mktemp("ply") / "c.ply"
        save_ply(cloud, path, fmt)
        assert load_ply(path) == cloud

    def test_empty_cloud_rejected(self, tmp_path):
        empty = PointCloud(np.empty((0, 3), dtype=np.int64), np.empty((0, 3), dtype=np.uint8))
        with pytest.raises(ValueError, match="nonempty"):
            save_ply(empty, tmp_path / "e.ply")


class TestNormalize:
    def test_two_point_span(self):
        cloud = PointCloud([[0, 0, 0], [2, 0, 0]], [[0, 0, 0], [1, 1, 1]])
        out = normalize_to_grid(cloud, steps=1000)
        assert out.coords.tolist() == [[0, 0, 0], [1000, 0, 0]]

    def test_longest_axis_spans_grid(self):
        cloud = make_random_cloud(500, 3000, seed=2)
        out = normalize_to_grid(cloud)
        assert out.coords.min(axis=0).tolist() == [0, 0, 0]
        assert out.coords.max() == 1000
        assert (out.coords.max(axis=0) <= 1000).all()

    def test_duplicates_removed_keeping_first(self):
        coords = np.array([[0, 0, 0], [1, 0, 0], [1000, 0, 0]])
        colors = np.array([[1, 1, 1], [2, 2, 2], [3, 3, 3]])
        # steps=10 merges the first two cells
        out = normalize_to_grid(PointCloud(coords, colors), steps=10)
        assert len(out) == 2
        seen = set(map(tuple, out.coords.tolist()))
        assert len(seen) == len(out)
        assert out.colors[0].tolist() == [1, 1, 1]

    def test_degenerate_cloud_rejected(self):
        cloud = PointCloud([[5, 5, 5]] * 3, [[0, 0, 0]] * 3)
        with pytest.raises(ValueError, match="degenerate"):
            normalize_to_grid(cloud)

    @pytest.mark.parametrize("seed", range(5))
    def test_idempotent(self, seed):
        cloud = make_random_cloud(300, 777, seed=seed)
        once = normalize_to_grid(cloud)
        assert normalize_to_grid(once) == once


class TestBoundingStats:
    def test_symmetric_pair(self):
        cloud = PointCloud([[0, 0, 0], [2, 2, 2]], [[0, 0, 0], [0, 0, 0]])
        stats = bounding_stats(cloud)
        assert np.allclose(stats.center, [1, 1, 1])
        assert stats.diagonal == pytest.approx(2 * np.sqrt(3))

    def test_single_point(self):
        cloud = PointCloud([[4, 5, 6]], [[0, 0, 0]])
        stats = bounding_stats(cloud)
        assert np.allclose(stats.center, [4, 5, 6])
        assert stats.diagonal == 0.0

    def test_matches_brute_force(self):
        cloud = make_random_cloud(100, 500, seed=3)
        stats = bounding_stats(cloud)
        coords = cloud.coords.astype(float)
        assert np.array_equal(stats.min, coords.min(axis=0))
        assert np.array_equal(stats.max, coords.max(axis=0))
        assert np.allclose(stats.center, coords.sum(axis=0) / len(coords))

    @settings(max_examples=30, deadline=None)
    @given(
        shift=st.tuples(
            st.integers(-500, 500), st.integers(-500, 500), st.integers(-500, 500)
        )
    )
    def test_center_translation_equivariant(self, shift):
        cloud = make_random_cloud(60, 100, seed=4)
        moved = PointCloud(cloud.coords + np.array(shift), cloud.colors)
        assert np.allclose(
            bounding_stats(moved).center, bounding_stats(cloud).center + np.array(shift)
        )


class TestNeighborIndex:
    def test_query_on_cloud_point(self):
        cloud = make_random_cloud(50, 100, seed=5)
        index = build_index(cloud)
        dist, idx = index.nearest(cloud.coords[17])
        assert dist[0] == 0.0
        # lowest index among possible duplicate coordinates
        expected = brute_nearest(cloud.coords, cloud.coords[17])[1]
        assert idx[0] == expected

    def test_matches_exhaustive_scan(self):
        cloud = make_random_cloud(500, 40, seed=6)  # small span forces many ties
        index = build_index(cloud)
        queries = make_random_cloud(100, 40, seed=7).coords
        dists, idxs = index.nearest(queries)
        for q, d, i in zip(queries, dists, idxs):
            bd, bi = brute_nearest(cloud.coords, q)
            assert d == pytest.approx(bd, abs=0)
            assert i == bi

    @pytest.mark.parametrize(
        "points", [[[1, 0, 0], [-1, 0, 0]], [[-1, 0, 0], [1, 0, 0]], [[0, 2, 0], [2, 0, 0], [0, 0, 2]]]
    )
    def test_tie_breaks_to_lowest_index(self, points):
        cloud = PointCloud(points, [[0, 0, 0]] * len(points))
        _, idx = build_index(cloud).nearest(np.zeros(3))
        assert idx[0] == 0

    @pytest.mark.parametrize("seed", range(4))
    def test_property_matches_exhaustive_on_random_clouds(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 2000))
        cloud = make_random_cloud(n, int(rng.integers(5, 200)), seed=seed + 100)
        index = build_index(cloud)
        queries = rng.integers(-20, 220, size=(50, 3))
        dists, idxs = index.nearest(queries)
        for q, d, i in zip(queries, dists, idxs):
            bd, bi = brute_nearest(cloud.coords, q)
            assert d == bd and i == bi
