"""Field dumps: a JSON header next to a raw little-endian complex128 payload."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import GridField, SpectralGrid
from .errors import ValidationError

LAYOUT = "component-major, x-fastest"
SCALAR = "complex128 as (re,im) float64 little-endian"


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def payload_path(header_path) -> Path:
    return Path(header_path).with_suffix(".bin")


def write_field(path, f: GridField) -> Path:
    """Write ``path`` (JSON header) and its ``.bin`` sibling; returns the payload path."""
    header = {
        "components": f.components,
        "grid": {"half_width": f.grid.half_width, "points_per_axis": f.grid.points_per_axis},
        "layout": LAYOUT,
        "scalar": SCALAR,
        "payload": payload_path(path).name,
    }
    # x (the first spatial index) varies fastest within each component
    flat = np.concatenate([f.values[c].ravel(order="F") for c in range(f.components)])
    atomic_write_bytes(payload_path(path), flat.astype("<c16").tobytes())
    atomic_write_bytes(path, (json.dumps(header, indent=2, sort_keys=True) + "\n").encode())
    return payload_path(path)


def read_field(path) -> GridField:
    path = Path(path)
    try:
        header = json.loads(path.read_text())
        grid = SpectralGrid(float(header["grid"]["half_width"]), int(header["grid"]["points_per_axis"]))
        comps = int(header["components"])
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise ValidationError(f"unreadable field header {path}: {exc}") from exc
    if header.get("layout") != LAYOUT or header.get("scalar") != SCALAR:
        raise ValidationError(f"unsupported field layout in {path}")
    data_path = path.parent / header.get("payload", payload_path(path).name)
    raw = np.fromfile(data_path, dtype="<c16")
    n = grid.points_per_axis
    if raw.size != comps * n ** 3:
        raise ValidationError(f"payload {data_path} has {raw.size} values, expected {comps * n ** 3}")
    values = raw.reshape(comps, n ** 3)
    values = np.stack([v.reshape((n, n, n), order="F") for v in values])
    return GridField(grid, values.astype(complex))
