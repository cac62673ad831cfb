import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pcqa.cloud import PointCloud
from pcqa.synth import cube_surface, random_blob, sphere_surface, wavy_sheet


def make_random_cloud(n: int, span: int, seed: int, unique: bool = False) -> PointCloud:
    rng = np.random.default_rng(seed)
    coords = rng.integers(0, span + 1, size=(n, 3))
    if unique:
        coords = np.unique(coords, axis=0)
    colors = rng.integers(0, 256, size=(len(coords), 3))
    return PointCloud(coords, colors, f"rand{seed}")


@pytest.fixture(scope="session")
def cube_cloud() -> PointCloud:
    return cube_surface(span=300, step=3, seed=1)


@pytest.fixture(scope="session")
def sheet_cloud() -> PointCloud:
    return wavy_sheet(span=300, step=2, seed=2)


@pytest.fixture(scope="session")
def sphere_cloud() -> PointCloud:
    return sphere_surface(n=30000, radius=150, seed=3)


@pytest.fixture(scope="session")
def blob_cloud() -> PointCloud:
    return random_blob(n=15000, span=300, seed=4)


def textured_image(shape=(256, 256), seed: int = 0) -> np.ndarray:
    """Luma plane with gradients, sinusoid texture, and mild speckle."""
    rng = np.random.default_rng(seed)
    rows = np.arange(shape[0])[:, None]
    cols = np.arange(shape[1])[None, :]
    img = 110.0 + 60.0 * np.sin(rows / 11.0) * np.cos(cols / 7.0) + 0.2 * (rows + cols)
    img += rng.normal(0, 4.0, size=shape)
    return np.clip(img, 0, 255)
