"""Small shared helpers: deterministic rounding and config digests."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from typing import Any

import numpy as np


def round_half_away(x: np.ndarray | float) -> np.ndarray:
    """Round to the nearest integer with halves away from zero.

    numpy's default rint rounds halves to even, which is fine statistically
    but makes pixel placement depend on parity; half-away is what fixed-point
    rasterizers do and keeps results identical across platforms.
    """
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def _jsonable(value: Any) -> Any:
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: _jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def config_digest(*objects: Any) -> str:
    """Stable hex digest of configuration objects for reproducibility audits."""
    payload = json.dumps([_jsonable(o) for o in objects], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
