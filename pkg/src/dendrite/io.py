"""File outputs: raw field dumps, PGM snapshots and the energy CSV."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .model import EnergyRecord
from .spectral import Grid

__all__ = [
    "CSV_COLUMNS",
    "dump_field",
    "load_field",
    "sidecar_path",
    "render_image",
    "to_gray",
    "write_energy_csv",
    "read_energy_csv",
    "EnergyCSVWriter",
]

CSV_COLUMNS = ("step", "time", "e_original", "e_modified", "radius", "phi_min", "phi_max",
               "solver_iters", "solver_residual")


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def dump_field(field: np.ndarray, path, meta: dict) -> tuple[Path, Path]:
    """Write ``field`` as raw little-endian float64 (x fastest) plus a JSON sidecar.

    ``meta`` must provide ``nx, ny, lx, ly, time, name``; 3D fields also
    ``nz, lz``. A 2D field is recorded with ``nz = 1`` and ``lz = 0``.
    """
    path = Path(path)
    field = np.asarray(field, dtype=float)
    if field.ndim not in (2, 3):
        raise ValueError(f"field must be 2D or 3D, got shape {field.shape}")
    meta = dict(meta)
    meta.setdefault("nz", 1)
    meta.setdefault("lz", 0.0)
    expected = (meta["nz"], meta["ny"], meta["nx"]) if field.ndim == 3 else (meta["ny"], meta["nx"])
    if field.shape != tuple(expected):
        raise ValueError(f"field shape {field.shape} does not match sidecar dimensions {expected}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.ascontiguousarray(field, dtype="<f8").tobytes())
    side = sidecar_path(path)
    keys = ("nx", "ny", "nz", "lx", "ly", "lz", "time", "name")
    side.write_text(json.dumps({k: meta[k] for k in keys}, indent=1) + "\n")
    return path, side


def field_meta(grid: Grid, time: float, name: str) -> dict:
    meta = {"nx": grid.n[0], "ny": grid.n[1], "lx": grid.length[0], "ly": grid.length[1],
            "time": float(time), "name": name}
    if grid.dims == 3:
        meta.update(nz=grid.n[2], lz=grid.length[2])
    return meta


def load_field(path) -> tuple[np.ndarray, dict]:
    """Inverse of :func:`dump_field`; 2D fields come back with shape ``(ny, nx)``."""
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    data = np.frombuffer(path.read_bytes(), dtype="<f8")
    nx, ny, nz = meta["nx"], meta["ny"], meta["nz"]
    if data.size != nx * ny * nz:
        raise ValueError(f"{path} holds {data.size} values, sidecar expects {nx * ny * nz}")
    shape = (ny, nx) if nz == 1 and meta.get("lz", 0) == 0 else (nz, ny, nx)
    return data.reshape(shape).astype(float), meta


def to_gray(field: np.ndarray) -> np.ndarray:
    """Map ``[-1, 1]`` linearly onto ``0..255``, rounding half up and clipping."""
    return np.clip(np.floor((np.asarray(field) + 1.0) * 127.5 + 0.5), 0, 255).astype(np.uint8)


def render_image(field: np.ndarray, path) -> Path:
    """Write a binary PGM of a 2D field, or of the middle z-slice of a 3D field.

    Rows are emitted from the largest y down so that y points up in viewers.
    """
    field = np.asarray(field, dtype=float)
    if field.ndim == 3:
        field = field[field.shape[0] // 2]
    if field.ndim != 2:
        raise ValueError(f"cannot render a field of shape {field.shape}")
    img = to_gray(field)[::-1]
    ny, nx = img.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(f"P5\n{nx} {ny}\n255\n".encode("ascii") + img.tobytes())
    return path


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _row(rec: EnergyRecord, quadratized: bool) -> str:
    values = (rec.step, rec.time, rec.e_original, rec.e_modified if quadratized else None,
              rec.radius, rec.phi_min, rec.phi_max, rec.solver_iters, rec.solver_residual)
    return ",".join(_fmt(v) for v in values)


def divergence_comment(step: int, reason: str | None) -> str:
    return f"# diverged at step {step}: {reason or 'unknown'}"


class EnergyCSVWriter:
    """Append records as they are produced; the header is written on open."""

    def __init__(self, path, quadratized: bool):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.quadratized = quadratized
        self._fh = self.path.open("w", newline="")
        self._fh.write(",".join(CSV_COLUMNS) + "\n")

    def write(self, rec: EnergyRecord):
        self._fh.write(_row(rec, self.quadratized) + "\n")

    def divergence(self, step: int, reason: str | None):
        self._fh.write(divergence_comment(step, reason) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_energy_csv(path, records: Iterable[EnergyRecord], quadratized: bool,
                     diverged_at: int | None = None, reason: str | None = None) -> Path:
    with EnergyCSVWriter(path, quadratized) as out:
        for rec in records:
            out.write(rec)
        if diverged_at is not None:
            out.divergence(diverged_at, reason)
    return Path(path)


def read_energy_csv(path) -> tuple[dict[str, np.ndarray], int | None]:
    """Columns as float arrays (blank cells become NaN) and the divergence step, if any."""
    lines = Path(path).read_text().splitlines()
    if not lines or tuple(lines[0].split(",")) != CSV_COLUMNS:
        raise ValueError(f"{path} does not start with the energy CSV header")
    rows: list[Sequence[str]] = []
    diverged = None
    for line in lines[1:]:
        if line.startswith("#"):
            diverged = int(line.split("step", 1)[1].split(":")[0])
            continue
        rows.append(line.split(","))
    cols = {}
    for j, name in enumerate(CSV_COLUMNS):
        cols[name] = np.array([float(r[j]) if r[j] else math.nan for r in rows])
    return cols, diverged
