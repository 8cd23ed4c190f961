"""Output artifacts: CSV tables with a provenance header, and binary checkpoints.

Numbers are written with 17 significant digits so two identical runs give
byte-identical files.  Checkpoints are a magic line, one JSON header line
and the raw little-endian float64 arrays in header order.
"""
from __future__ import annotations

import csv
import json
import os

import numpy as np

from .lowrank import LowRankState
from .fulltensor import FullTensorState
from .spatial import SpatialGrid
from .velocity import VelocityGrid

FORMAT_VERSION = 1
CHECKPOINT_MAGIC = b"LRBCKPT 1\n"


class CheckpointError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def header_lines(config_hash: str, extra=()) -> list:
    lines = [f"# lowrank_boltzmann format {FORMAT_VERSION}", f"# config {config_hash}"]
    lines += [f"# {e}" for e in extra]
    return lines


def write_csv(path, columns, rows, config_hash: str = "", extra=()):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines(config_hash, extra):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    """Return ``(header_comments, columns, float array)``."""
    comments, body = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line[1:].strip())
            else:
                body.append(line)
    rows = list(csv.reader(body))
    columns = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(columns))
    return comments, columns, data


def write_text(path, lines, config_hash: str = ""):
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines(config_hash) + list(lines):
            fh.write(line + "\n")


# --------------------------------------------------------------------------
# checkpoints


def checkpoint_write(path, state, grid_x: SpatialGrid, grid_v: VelocityGrid, step: int = 0,
                     controller: dict | None = None, history=None, config_hash: str = ""):
    """Write a low-rank or full-tensor state atomically."""
    if isinstance(state, LowRankState):
        kind = "lowrank"
        arrays = [("X", state.X), ("S", state.S), ("V", state.V)]
        rank = state.r
    elif isinstance(state, FullTensorState):
        kind = "fulltensor"
        arrays = [("values", state.values)]
        rank = None
    else:
        raise TypeError(f"cannot checkpoint {type(state).__name__}")
    if history is not None and len(history):
        arrays.append(("history", np.asarray(history, dtype=float)))
    header = {
        "version": FORMAT_VERSION,
        "kind": kind,
        "grid_x": grid_x.describe(),
        "grid_v": grid_v.describe(),
        "rank": rank,
        "time": float(state.time),
        "step": int(step),
        "controller": controller or {},
        "config": config_hash,
        "arrays": [{"name": n, "shape": list(np.shape(a))} for n, a in arrays],
    }
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    os.replace(tmp, path)


def checkpoint_read(path, grid_x: SpatialGrid | None = None, grid_v: VelocityGrid | None = None):
    """Read a checkpoint; returns ``(state, header, history)``.

    When grids are given they must match those stored in the file.
    """
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint (bad magic line)")
        header = json.loads(fh.readline())
        if header.get("version") != FORMAT_VERSION:
            raise CheckpointError(f"{path}: format version {header.get('version')}, expected {FORMAT_VERSION}")
        for name, grid in (("grid_x", grid_x), ("grid_v", grid_v)):
            if grid is not None and header[name] != grid.describe():
                raise CheckpointError(f"{path}: {name} mismatch\n  checkpoint: {header[name]}\n  config:     {grid.describe()}")
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise CheckpointError(f"{path}: truncated array {spec['name']}")
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(float)
    if header["kind"] == "lowrank":
        state = LowRankState(arrays["X"], arrays["S"], arrays["V"], header["time"])
    elif header["kind"] == "fulltensor":
        state = FullTensorState(arrays["values"], header["time"])
    else:
        raise CheckpointError(f"{path}: unknown state kind {header['kind']!r}")
    return state, header, arrays.get("history")
