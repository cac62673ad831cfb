"""Point-cloud data model, PLY I/O, grid normalization, and spatial indexing.

A cloud is a pair of aligned arrays: integer voxel coordinates and 8-bit RGB
colors, one row per point. Point order is preserved by every loader and is
part of the contract (tie-breaking in rasterization and nearest-neighbor
queries resolves to the lowest point index).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from pcqa.util import round_half_away


class PlyError(ValueError):
    """Malformed or unsupported PLY content."""


@dataclass(frozen=True)
class PointCloud:
    """Ordered set of points with integer coordinates and RGB colors."""

    coords: np.ndarray  # (N, 3) int64 voxel coordinates
    colors: np.ndarray  # (N, 3) uint8
    name: str = ""

    def __post_init__(self) -> None:
        coords = np.ascontiguousarray(np.asarray(self.coords, dtype=np.int64))
        colors = np.asarray(self.colors)
        if coords.ndim != 2 or coords.shape[1] != 3:
            raise ValueError(f"coords must be (N, 3), got {coords.shape}")
        if colors.shape != coords.shape:
            raise ValueError(f"colors shape {colors.shape} != coords shape {coords.shape}")
        if colors.size and (colors.min() < 0 or colors.max() > 255):
            raise ValueError("color channels must lie in [0, 255]")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "colors", np.ascontiguousarray(colors.astype(np.uint8)))

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def n_points(self) -> int:
        return self.coords.shape[0]

    def require_nonempty(self, what: str = "operation") -> None:
        if len(self) == 0:
            raise ValueError(f"{what} requires a nonempty point cloud")

    def with_name(self, name: str) -> "PointCloud":
        return PointCloud(self.coords, self.colors, name)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return (
            np.array_equal(self.coords, other.coords)
            and np.array_equal(self.colors, other.colors)
        )


@dataclass(frozen=True)
class BoundingStats:
    """Axis-aligned bounds, centroid, and diagonal of a cloud's coordinates."""

    min: np.ndarray
    max: np.ndarray
    center: np.ndarray  # arithmetic mean of coordinates
    diagonal: float


def bounding_stats(cloud: PointCloud) -> BoundingStats:
    cloud.require_nonempty("bounding_stats")
    coords = cloud.coords.astype(np.float64)
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    return BoundingStats(
        min=lo,
        max=hi,
        center=coords.mean(axis=0),
        diagonal=float(np.linalg.norm(hi - lo)),
    )


def dedupe_coords(coords: np.ndarray, colors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop points whose coordinates already appeared earlier in the arrays."""
    _, first = np.unique(coords, axis=0, return_index=True)
    keep = np.sort(first)
    return coords[keep], colors[keep]


def normalize_to_grid(cloud: PointCloud, steps: int = 1000) -> PointCloud:
    """Map a cloud onto an integer grid whose longest axis spans [0, steps].

    Every axis is shifted to start at 0 and all three share one scale factor,
    so the cloud's proportions are preserved. Quantization can collapse
    points onto the same cell; the first occurrence wins.
    """
    cloud.require_nonempty("normalize_to_grid")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    coords = cloud.coords.astype(np.float64)
    lo = coords.min(axis=0)
    extent = coords.max(axis=0) - lo
    longest = extent.max()
    if longest == 0:
        raise ValueError("degenerate cloud: all points identical, no valid scale")
    scaled = (coords - lo) * (steps / longest)
    quantized = round_half_away(scaled).astype(np.int64)
    coords_out, colors_out = dedupe_coords(quantized, cloud.colors)
    return PointCloud(coords_out, colors_out, cloud.name)


class NeighborIndex:
    """Nearest-neighbor index with deterministic lowest-index tie-breaking.

    Coordinates are integers, so squared distances are exact in float64 and
    ties are exact equalities, not tolerance matches.
    """

    def __init__(self, cloud: PointCloud):
        cloud.require_nonempty("build_index")
        self._points = cloud.coords.astype(np.float64)
        self._tree = cKDTree(self._points)

    @property
    def size(self) -> int:
        return self._points.shape[0]

    def nearest(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (distances, indices) of the nearest point per query row.

        Among points at exactly the minimal distance the lowest index is
        returned.
        """
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        k = min(4, self.size)
        dist, idx = self._tree.query(queries, k=k)
        dist = np.atleast_2d(dist)
        idx = np.atleast_2d(idx)
        best_dist = dist[:, 0]
        tied = dist == best_dist[:, None]
        best_idx = np.where(tied, idx, self.size).min(axis=1)
        # If every returned candidate ties, there may be lower-index ties
        # beyond k; re-query those rows exhaustively against the ball.
        saturated = tied.all(axis=1) & (k < self.size)
        for row in np.flatnonzero(saturated):
            ball = self._tree.query_ball_point(queries[row], r=best_dist[row] + 1e-9)
            exact = [
                j
                for j in ball
                if np.dot(queries[row] - self._points[j], queries[row] - self._points[j])
                == best_dist[row] ** 2
            ]
            if exact:
                best_idx[row] = min(exact)
        return best_dist, best_idx.astype(np.int64)


def build_index(cloud: PointCloud) -> NeighborIndex:
    return NeighborIndex(cloud)


# ---------------------------------------------------------------------------
# PLY reading and writing
# ---------------------------------------------------------------------------

_PLY_SCALAR_FMT = {
    "char": "b",
    "int8": "b",
    "uchar": "B",
    "uint8": "B",
    "short": "h",
    "int16": "h",
    "ushort": "H",
    "uint16": "H",
    "int": "i",
    "int32": "i",
    "uint": "I",
    "uint32": "I",
    "float": "f",
    "float32": "f",
    "double": "d",
    "float64": "d",
}

_COORD_PROPS = ("x", "y", "z")
_COLOR_PROPS = ("red", "green", "blue")


@dataclass
class _PlyHeader:
    binary: bool
    vertex_count: int
    properties: list[tuple[str, str]]  # (type name, property name), vertex element only
    data_start: int  # byte offset just past end_header
    header_lines: int
    leading_elements: list[str] = field(default_factory=list)


def _parse_header(raw: bytes, path: str) -> _PlyHeader:
    end = raw.find(b"end_header")
    if end < 0:
        raise PlyError(f"{path}: no end_header found")
    newline = raw.find(b"\n", end)
    if newline < 0:
        raise PlyError(f"{path}: header not terminated by newline")
    header_text = raw[:newline].decode("ascii", errors="replace")
    lines = header_text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise PlyError(f"{path}: line 1: missing 'ply' magic")

    binary = False
    fmt_seen = False
    vertex_count = -1
    properties: list[tuple[str, str]] = []
    leading: list[str] = []
    current_element = None
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.strip().split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2:
                raise PlyError(f"{path}: line {lineno}: malformed format line")
            if tokens[1] == "ascii":
                binary = False
            elif tokens[1] == "binary_little_endian":
                binary = True
            elif tokens[1] == "binary_big_endian":
                raise PlyError(f"{path}: line {lineno}: binary_big_endian is not supported")
            else:
                raise PlyError(f"{path}: line {lineno}: unknown format '{tokens[1]}'")
            fmt_seen = True
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise PlyError(f"{path}: line {lineno}: malformed element line")
            current_element = tokens[1]
            if tokens[1] == "vertex":
                vertex_count = int(tokens[2])
            elif vertex_count < 0:
                leading.append(tokens[1])
        elif tokens[0] == "property" and current_element == "vertex":
            if tokens[1] == "list":
                raise PlyError(f"{path}: line {lineno}: list properties on vertex unsupported")
            if len(tokens) != 3:
                raise PlyError(f"{path}: line {lineno}: malformed property line")
            if tokens[1] not in _PLY_SCALAR_FMT:
                raise PlyError(f"{path}: line {lineno}: unknown property type '{tokens[1]}'")
            properties.append((tokens[1], tokens[2]))
        elif tokens[0] == "end_header":
            break

    if not fmt_seen:
        raise PlyError(f"{path}: missing format line")
    if vertex_count < 0:
        raise PlyError(f"{path}: no vertex element declared")
    names = [name for _, name in properties]
    for prop in _COORD_PROPS:
        if prop not in names:
            raise PlyError(f"{path}: missing coordinate property '{prop}'")
    for prop in _COLOR_PROPS:
        if prop not in names:
            raise PlyError(f"{path}: missing color property '{prop}'")
    return _PlyHeader(
        binary=binary,
        vertex_count=vertex_count,
        properties=properties,
        data_start=newline + 1,
        header_lines=len(lines),
        leading_elements=leading,
    )


def load_ply(path: str | Path) -> PointCloud:
    """Read a colored point cloud from an ASCII or binary_little_endian PLY.

    Only the vertex element is interpreted; unknown vertex properties are
    skipped. Float coordinates are rounded to the nearest integer.
    """
    path = Path(path)
    raw = path.read_bytes()
    header = _parse_header(raw, str(path))
    if header.leading_elements:
        raise PlyError(
            f"{path}: elements {header.leading_elements} precede the vertex element; "
            "cannot locate vertex data"
        )

    names = [name for _, name in header.properties]
    want = {name: names.index(name) for name in _COORD_PROPS + _COLOR_PROPS}

    if header.binary:
        fmt = "<" + "".join(_PLY_SCALAR_FMT[t] for t, _ in header.properties)
        stride = struct.calcsize(fmt)
        need = stride * header.vertex_count
        body = raw[header.data_start : header.data_start + need]
        if len(body) < need:
            raise PlyError(
                f"{path}: truncated body at byte offset "
                f"{header.data_start + len(body)}: expected {need} bytes of vertex data"
            )
        dtype = np.dtype([(f"f{i}", "<" + _PLY_SCALAR_FMT[t]) for i, (t, _) in enumerate(header.properties)])
        table = np.frombuffer(body, dtype=dtype, count=header.vertex_count)
        cols = {name: table[f"f{want[name]}"].astype(np.float64) for name in want}
    else:
        text = raw[header.data_start :].decode("ascii", errors="replace")
        rows = text.splitlines()
        if len(rows) < header.vertex_count:
            raise PlyError(
                f"{path}: truncated body: {len(rows)} data lines, "
                f"expected {header.vertex_count}"
            )
        values = np.empty((header.vertex_count, len(names)), dtype=np.float64)
        for i in range(header.vertex_count):
            parts = rows[i].split()
            if len(parts) < len(names):
                raise PlyError(
                    f"{path}: line {header.header_lines + 1 + i}: "
                    f"{len(parts)} values, expected {len(names)}"
                )
            try:
                values[i] = [float(v) for v in parts[: len(names)]]
            except ValueError as exc:
                raise PlyError(f"{path}: line {header.header_lines + 1 + i}: {exc}") from exc
        cols = {name: values[:, want[name]] for name in want}

    coords = np.stack([cols[p] for p in _COORD_PROPS], axis=1)
    colors = np.stack([cols[p] for p in _COLOR_PROPS], axis=1)
    coords = round_half_away(coords).astype(np.int64)
    if colors.size and (colors.min() < 0 or colors.max() > 255):
        raise PlyError(f"{path}: color values outside [0, 255]")
    return PointCloud(coords, colors.astype(np.uint8), name=path.stem)


def save_ply(cloud: PointCloud, path: str | Path, format: str = "ascii") -> None:
    """Write a cloud as PLY; format is 'ascii' or 'binary_le'. Exact round trip."""
    cloud.require_nonempty("save_ply")
    if format not in ("ascii", "binary_le"):
        raise ValueError(f"unknown PLY format '{format}'")
    path = Path(path)
    fmt_line = "ascii 1.0" if format == "ascii" else "binary_little_endian 1.0"
    header = (
        "ply\n"
        f"format {fmt_line}\n"
        f"element vertex {len(cloud)}\n"
        "property int x\n"
        "property int y\n"
        "property int z\n"
        "property uchar red\n"
        "property uchar green\n"
        "property uchar blue\n"
        "end_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if format == "ascii":
            lines = [
                "%d %d %d %d %d %d" % (gx, gy, gz, r, g, b)
                for (gx, gy, gz), (r, g, b) in zip(cloud.coords, cloud.colors)
            ]
            fh.write(("\n".join(lines) + "\n").encode("ascii"))
        else:
            dtype = np.dtype(
                [("x", "<i4"), ("y", "<i4"), ("z", "<i4"), ("r", "u1"), ("g", "u1"), ("b", "u1")]
            )
            table = np.empty(len(cloud), dtype=dtype)
            for i, axis in enumerate(("x", "y", "z")):
                if np.any(np.abs(cloud.coords[:, i]) > np.iinfo(np.int32).max):
                    raise ValueError("coordinates exceed int32 range of the PLY writer")
                table[axis] = cloud.coords[:, i].astype(np.int32)
            for i, chan in enumerate(("r", "g", "b")):
                table[chan] = cloud.colors[:, i]
            fh.write(table.tobytes())
