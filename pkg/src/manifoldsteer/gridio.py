"""Sampled velocity fields on a uniform lattice and their on-disk format.

A field file is a JSON header::

    {"schema_version": 1, "nx": .., "ny": .., "x_bounds": [..], "y_bounds": [..],
     "times": [..], "payload": "name.bin"}

next to a raw payload of little-endian float64 values laid out row-major as
``(nt, ny, nx, 2)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .advect import Grid
from .errors import ConfigError, EmptyGrid
from .flow_model import PlanarVelocityField

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SampledField:
    grid: Grid
    times: np.ndarray
    values: np.ndarray  # (nt, ny, nx, 2)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) == 0 or v.size == 0:
            raise EmptyGrid("sampled field has no samples")
        if v.shape != (len(t), self.grid.ny, self.grid.nx, 2):
            raise ConfigError(f"values shape {v.shape} does not match grid and times")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "times", t)


def sample_field(field: PlanarVelocityField, grid: Grid, times) -> SampledField:
    nodes = grid.nodes()
    times = np.asarray(times, dtype=float)
    return SampledField(grid, times, np.stack([field.velocity(nodes, t) for t in times]))


def write_sampled_field(sf: SampledField, header_path, payload_name: str | None = None) -> None:
    header_path = Path(header_path)
    payload_name = payload_name or header_path.with_suffix(".bin").name
    g = sf.grid
    header = {
        "schema_version": SCHEMA_VERSION,
        "nx": g.nx, "ny": g.ny,
        "x_bounds": list(g.x_bounds), "y_bounds": list(g.y_bounds),
        "times": [float(t) for t in sf.times],
        "payload": payload_name,
    }
    header_path.write_text(json.dumps(header, indent=2) + "\n")
    (header_path.parent / payload_name).write_bytes(np.ascontiguousarray(sf.values, dtype="<f8").tobytes())


def read_sampled_field(header_path) -> SampledField:
    header_path = Path(header_path)
    try:
        h = json.loads(header_path.read_text())
        if h.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {h.get('schema_version')!r}")
        grid = Grid(tuple(h["x_bounds"]), tuple(h["y_bounds"]), int(h["nx"]), int(h["ny"]))
        times = np.asarray(h["times"], dtype=float)
        payload = header_path.parent / h.get("payload", header_path.with_suffix(".bin").name)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed field header {header_path}: {exc}") from exc
    raw = np.fromfile(payload, dtype="<f8")
    expected = len(times) * grid.ny * grid.nx * 2
    if raw.size != expected:
        raise ConfigError(f"payload holds {raw.size} values, header implies {expected}")
    return SampledField(grid, times, raw.reshape(len(times), grid.ny, grid.nx, 2))
