"""Snapshot files and diagnostics CSV.

A snapshot is one line of JSON (the header) followed by the component arrays in
physical space, little-endian float64, row-major, one array per component in
header order.  The header carries a sha256 of the payload.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..limits import XmhdState
from ..plasma import COMPONENTS, FieldState14
from ..spectral import GridMismatchError, GridSpec

SCHEMA = "emtf-snapshot"
SCHEMA_VERSION = 1
DTYPE = "<f8"

BASIS_COMPONENTS = dict(COMPONENTS)
BASIS_COMPONENTS["xmhd"] = ["u_1", "u_2", "u_3", "B_star_1", "B_star_2", "B_star_3"]
BASIS_COMPONENTS["raw"] = ["v_e_1", "v_e_2", "v_e_3", "v_i_1", "v_i_2", "v_i_3"]

DIAG_COLUMNS = ["t", "l2_norm", "hsigma_norm", "div_B", "gauss_charge", "energy", "gol_residual"]


class SnapshotError(ValueError):
    pass


@dataclass
class Snapshot:
    header: dict
    arrays: np.ndarray          # (components, n, n, n) physical values

    @property
    def basis(self) -> str:
        return self.header["basis"]

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.header["grid"], self.header.get("dealias_fraction", 2.0 / 3.0))

    def to_state(self):
        """Spectral state for the stored basis (raw velocity snapshots return a (6, ...) array)."""
        g = self.grid
        spec = g.forward(self.arrays)
        if self.basis in ("sym", "U"):
            return FieldState14(spec, g, self.basis)
        if self.basis == "xmhd":
            return XmhdState(spec, g)
        return spec


def _as_arrays(state):
    if isinstance(state, FieldState14):
        return state.physical(), state.basis, state.grid
    if isinstance(state, XmhdState):
        return state.grid.inverse(state.data), "xmhd", state.grid
    raise TypeError(f"cannot snapshot {type(state).__name__}")


def save_snapshot(path, state=None, *, arrays=None, basis=None, grid=None, t=0.0,
                  params_hash="", config_hash="") -> Path:
    """Write a state (or explicit physical arrays with basis and grid) to ``path``."""
    if state is not None:
        arrays, basis, grid = _as_arrays(state)
    if arrays is None or basis is None or grid is None:
        raise ValueError("need a state or arrays, basis and grid")
    if basis not in BASIS_COMPONENTS:
        raise ValueError(f"unknown basis {basis!r}")
    names = BASIS_COMPONENTS[basis]
    arrays = np.asarray(arrays, dtype=float)
    if arrays.shape != (len(names),) + grid.phys_shape:
        raise GridMismatchError(f"array shape {arrays.shape} does not match basis {basis} on grid n={grid.n}")
    payload = np.ascontiguousarray(arrays, dtype=DTYPE).tobytes()
    header = {
        "schema": SCHEMA,
        "version": SCHEMA_VERSION,
        "grid": grid.n,
        "dealias_fraction": grid.dealias_fraction,
        "basis": basis,
        "components": names,
        "dtype": DTYPE,
        "layout": "row-major",
        "params_hash": params_hash,
        "config_hash": config_hash,
        "t": float(t),
        "nbytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)
    return path


def load_snapshot(path, grid: GridSpec | None = None) -> Snapshot:
    """Read a snapshot; ``grid`` (if given) must match the stored grid."""
    blob = Path(path).read_bytes()
    nl = blob.find(b"\n")
    if nl < 0:
        raise SnapshotError(f"{path}: missing header line")
    try:
        header = json.loads(blob[:nl])
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"{path}: malformed header: {exc}") from None
    if header.get("schema") != SCHEMA:
        raise SnapshotError(f"{path}: not a snapshot file")
    if header.get("version") != SCHEMA_VERSION:
        raise SnapshotError(f"{path}: schema version {header.get('version')} (expected {SCHEMA_VERSION})")
    if grid is not None and header["grid"] != grid.n:
        raise GridMismatchError(f"{path}: snapshot grid n={header['grid']} but n={grid.n} requested")
    payload = blob[nl + 1:]
    if len(payload) < header["nbytes"]:
        raise SnapshotError(f"{path}: truncated payload ({len(payload)} of {header['nbytes']} bytes)")
    if len(payload) > header["nbytes"]:
        raise SnapshotError(f"{path}: trailing bytes after payload")
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise SnapshotError(f"{path}: checksum mismatch")
    n = header["grid"]
    arrays = np.frombuffer(payload, dtype=DTYPE).reshape(len(header["components"]), n, n, n)
    return Snapshot(header, arrays.astype(float))


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    return repr(float(v))


def write_diagnostics(path, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAG_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in DIAG_COLUMNS])
    return path


def read_diagnostics(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows and Path(path).read_text().strip() == "":
        raise SnapshotError(f"{path}: empty diagnostics file")
    return [{k: float(v) for k, v in r.items()} for r in rows]


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
