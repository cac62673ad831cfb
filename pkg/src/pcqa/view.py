"""Viewpoint generation on an icosphere and view-aligning rotations.

Viewpoints are the vertices of a recursively subdivided icosahedron pushed
onto the unit sphere, which samples directions nearly uniformly. For each
view normal we build the rotation that maps it onto +z under the row-vector
convention used throughout the projection pipeline: coordinates are row
vectors and transform as ``g_rotated = g @ R``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

N_Z = np.array([0.0, 0.0, 1.0])

# Golden-ratio icosahedron: cyclic permutations of (±1, ±phi, 0), normalized.
# Vertex order and face indices are fixed so viewpoint sets are reproducible
# bit-for-bit across runs and platforms.
_PHI = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTICES = np.array(
    [
        (-1.0, _PHI, 0.0),
        (1.0, _PHI, 0.0),
        (-1.0, -_PHI, 0.0),
        (1.0, -_PHI, 0.0),
        (0.0, -1.0, _PHI),
        (0.0, 1.0, _PHI),
        (0.0, -1.0, -_PHI),
        (0.0, 1.0, -_PHI),
        (_PHI, 0.0, -1.0),
        (_PHI, 0.0, 1.0),
        (-_PHI, 0.0, -1.0),
        (-_PHI, 0.0, 1.0),
    ]
)
_ICO_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


@dataclass(frozen=True)
class Viewpoint:
    """Unit view normal plus the rotation taking it onto +z (row vectors)."""

    normal: np.ndarray  # (3,) unit vector
    rotation: np.ndarray  # (3, 3); normal @ rotation == (0, 0, 1)


@dataclass(frozen=True)
class ViewpointSet:
    level: int
    viewpoints: tuple[Viewpoint, ...]

    def __len__(self) -> int:
        return len(self.viewpoints)

    @property
    def normals(self) -> np.ndarray:
        return np.array([v.normal for v in self.viewpoints])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "nx", "ny", "nz"])
            for i, v in enumerate(self.viewpoints):
                writer.writerow([i] + [repr(float(c)) for c in v.normal])


def expected_viewpoint_count(level: int) -> int:
    """Vertex count of an icosphere at the given subdivision level."""
    return 12 + 10 * (4**level - 1)


def rotation_for(n_v: np.ndarray) -> np.ndarray:
    """Rotation matrix R with ``n_v @ R == (0, 0, 1)``.

    Built from the axis-angle pair (axis = n_v x n_z normalized, angle =
    arccos(n_v . n_z)) in Rodrigues form, then transposed because row
    vectors multiply from the left. When n_v is (anti)parallel to n_z the
    axis is undefined: identity for +z, a 180-degree rotation about x for -z.
    """
    n_v = np.asarray(n_v, dtype=np.float64)
    norm = np.linalg.norm(n_v)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"view normal must be unit length, got |n_v| = {norm}")

    cross = np.cross(n_v, N_Z)
    sin_theta = np.linalg.norm(cross)
    if sin_theta < 1e-12:
        if n_v[2] > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])

    axis = cross / sin_theta
    cos_theta = np.clip(np.dot(n_v, N_Z), -1.0, 1.0)
    theta = np.arccos(cos_theta)
    k = np.array(
        [
            [0.0, -axis[2], axis[1]],
            [axis[2], 0.0, -axis[0]],
            [-axis[1], axis[0], 0.0],
        ]
    )
    column_form = np.eye(3) + np.sin(theta) * k + (1.0 - np.cos(theta)) * (k @ k)
    return column_form.T


def _subdivide(vertices: list[np.ndarray], faces: list[tuple[int, int, int]]):
    """One 4-to-1 triangle split; midpoints are cached per edge so shared
    vertices are created exactly once (no tolerance-based dedup needed)."""
    midpoint_cache: dict[tuple[int, int], int] = {}

    def midpoint(i: int, j: int) -> int:
        key = (i, j) if i < j else (j, i)
        cached = midpoint_cache.get(key)
        if cached is not None:
            return cached
        m = vertices[i] + vertices[j]
        m = m / np.linalg.norm(m)
        vertices.append(m)
        midpoint_cache[key] = len(vertices) - 1
        return midpoint_cache[key]

    new_faces: list[tuple[int, int, int]] = []
    for a, b, c in faces:
        ab = midpoint(a, b)
        bc = midpoint(b, c)
        ca = midpoint(c, a)
        new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return vertices, new_faces


def icosphere_normals(level: int) -> ViewpointSet:
    """Viewpoint set from an icosphere at subdivision level 0..4."""
    if not 0 <= level <= 4:
        raise ValueError(f"subdivision level must be in [0, 4], got {level}")
    vertices = [v / np.linalg.norm(v) for v in _ICO_VERTICES]
    faces = list(_ICO_FACES)
    for _ in range(level):
        vertices, faces = _subdivide(vertices, faces)
    expected = expected_viewpoint_count(level)
    if len(vertices) != expected:
        raise AssertionError(f"icosphere produced {len(vertices)} vertices, expected {expected}")
    views = tuple(Viewpoint(normal=v, rotation=rotation_for(v)) for v in vertices)
    return ViewpointSet(level=level, viewpoints=views)
