"""Field files, VTK export and small report writers.

Field file layout (little endian)::

    offset  size  content
    0       3     magic b"DFB"
    3       1     dimension (uint8)
    4       2x2   cells per axis (uint16; 0 for a missing axis)
    8       8     h (float64)
    16      2x8   origin (float64; 0 for a missing axis)
    32      ...   node values, float64, C order ('ij' indexing)

A sidecar ``<file>.meta`` holds ``key = value`` lines, including the boundary
mask as a run-length encoding over the flattened node array.
"""
from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .fields import Grid, GridError, ScalarField

MAGIC = b"DFB"
HEADER = struct.Struct("<3sBHHddd")
assert HEADER.size == 32


def _rle(mask: np.ndarray) -> str:
    flat = mask.reshape(-1).astype(np.int8)
    if flat.size == 0:
        return ""
    change = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate([[0], change])
    lengths = np.diff(np.concatenate([starts, [flat.size]]))
    return f"{int(flat[0])}:" + ",".join(str(int(n)) for n in lengths)


def _unrle(text: str, size: int) -> np.ndarray:
    first, runs = text.split(":")
    val = bool(int(first))
    out = []
    for n in runs.split(","):
        out.append(np.full(int(n), val))
        val = not val
    arr = np.concatenate(out) if out else np.zeros(0, bool)
    if arr.size != size:
        raise GridError("boundary mask length does not match the grid")
    return arr


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta")


def save_field(f: ScalarField, path, meta: dict | None = None) -> Path:
    """Write ``f`` as a field file plus sidecar; returns the field path."""
    path = Path(path)
    g = f.grid
    cells = list(g.n_cells) + [0] * (2 - g.dim)
    origin = list(g.origin) + [0.0] * (2 - g.dim)
    if max(cells) > 0xFFFF:
        raise GridError("field files support at most 65535 cells per axis")
    header = HEADER.pack(MAGIC, g.dim, cells[0], cells[1], g.h, origin[0], origin[1])
    path.write_bytes(header + np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    lines = {
        "format": "degenfb-field-1",
        "dim": g.dim,
        "n_cells": " ".join(str(n) for n in g.n_cells),
        "h": repr(g.h),
        "origin": " ".join(repr(o) for o in g.origin),
        "boundary_mask_rle": _rle(f.boundary_mask),
    }
    for k, v in (meta or {}).items():
        lines[k] = v
    sidecar_path(path).write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))
    return path


def read_sidecar(path) -> dict:
    out = {}
    for line in sidecar_path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def load_field(path) -> ScalarField:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise GridError("field file shorter than its header")
    magic, dim, c0, c1, h, o0, o1 = HEADER.unpack_from(data)
    if magic != MAGIC or dim not in (1, 2):
        raise GridError("not a field file")
    cells = (c0,) if dim == 1 else (c0, c1)
    grid = Grid((o0,) if dim == 1 else (o0, o1), h, cells)
    values = np.frombuffer(data, dtype="<f8", offset=HEADER.size)
    if values.size != int(np.prod(grid.shape)):
        raise GridError("field file payload does not match its header")
    mask = None
    if sidecar_path(path).exists():
        meta = read_sidecar(path)
        if "boundary_mask_rle" in meta:
            mask = _unrle(meta["boundary_mask_rle"], values.size)
    return ScalarField(grid, values.reshape(grid.shape), mask)


def export_vtk(f: ScalarField, path, name: str = "w") -> Path:
    """Legacy ASCII VTK ``STRUCTURED_POINTS`` file with one scalar array."""
    g = f.grid
    dims = list(g.shape) + [1] * (3 - g.dim)
    origin = list(g.origin) + [0.0] * (3 - g.dim)
    # VTK wants x varying fastest
    vals = f.values.T.reshape(-1) if g.dim == 2 else f.values.reshape(-1)
    lines = [
        "# vtk DataFile Version 3.0",
        name,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS {} {} {}".format(*dims),
        "ORIGIN {!r} {!r} {!r}".format(*origin),
        f"SPACING {g.h!r} {g.h!r} {g.h!r}",
        f"POINT_DATA {vals.size}",
        f"SCALARS {name} double 1",
        "LOOKUP_TABLE default",
    ]
    body = "\n".join(repr(float(v)) for v in vals)
    Path(path).write_text("\n".join(lines) + "\n" + body + "\n")
    return Path(path)


def write_points(points: np.ndarray, normals: np.ndarray, path) -> Path:
    """FB point cloud as ``x y nx ny`` rows (``x nx`` in 1D)."""
    arr = np.hstack([np.asarray(points), np.asarray(normals)])
    np.savetxt(path, arr, fmt="%.17g", header=" ".join(
        ["x", "y", "nx", "ny"] if arr.shape[1] == 4 else ["x", "nx"]))
    return Path(path)


def write_csv(rows: list[dict], path) -> Path:
    path = Path(path)
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with path.open("w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=keys)
        wr.writeheader()
        for r in rows:
            wr.writerow(r)
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(obj, path) -> Path:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return Path(path)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
