"""Initial-data recipes. All randomness goes through a seeded numpy Generator."""
from __future__ import annotations

import numpy as np

from ..limits import PreparedState, prepare_data
from ..plasma import PlasmaParams
from ..spectral import GridSpec
from .config import InitialData
from .io import load_snapshot


def random_solenoidal(grid: GridSpec, rng, kmax=4, h1_norm=1.0):
    """Band-limited (|k|_inf <= kmax) divergence-free real field with the given H^1 norm."""
    v = grid.forward(rng.standard_normal((3,) + grid.phys_shape))
    band = np.all(np.abs(grid.k_int) <= kmax, axis=0) & grid.dealias_mask
    v = grid.leray(v * band)
    nrm = grid.norm(v, 1.0)
    return v * (h1_norm / nrm) if nrm > 0 else v


def single_mode_field(grid: GridSpec, mode=(1, 0, 0), amplitude=1.0):
    """amplitude * cos(k.x) along a direction orthogonal to k."""
    k = np.asarray(mode, dtype=float)
    e = np.array([0.0, 1.0, 0.0]) if abs(k[1]) < np.linalg.norm(k) * 0.9 else np.array([1.0, 0.0, 0.0])
    d = e - k * (e @ k) / (k @ k)
    d /= np.linalg.norm(d)
    phase = np.tensordot(k, grid.x, axes=1)
    return grid.forward(amplitude * d[:, None, None, None] * np.cos(phase))


def raw_velocities(init: InitialData, grid: GridSpec, params: PlasmaParams):
    """Raw (v_e, v_i) spectral fields for a recipe, before preparation."""
    rng = np.random.default_rng(init.seed)
    if init.recipe == "prepared-random":
        ve = random_solenoidal(grid, rng, init.kmax, init.amplitude)
        vi = random_solenoidal(grid, rng, init.kmax, init.amplitude)
    elif init.recipe == "irrotational":
        # constant flows are the only irrotational data compatible with Ampere's law
        ve = np.zeros((3,) + grid.spec_shape, dtype=complex)
        ve[:, 0, 0, 0] = init.amplitude * rng.standard_normal(3)
        vi = ve.copy()
    elif init.recipe == "single-mode":
        ve = single_mode_field(grid, init.mode, init.amplitude)
        vi = np.zeros_like(ve)
    elif init.recipe == "from-file":
        snap = load_snapshot(init.file, grid)
        if snap.basis != "raw":
            raise ValueError(f"{init.file}: expected raw velocities, found basis {snap.basis!r}")
        spec = snap.to_state()
        ve, vi = spec[0:3], spec[3:6]
    else:
        raise ValueError(f"unknown recipe {init.recipe!r}")
    return ve, vi


def build_prepared(init: InitialData, grid: GridSpec, params: PlasmaParams) -> PreparedState:
    if init.recipe == "from-file":
        snap = load_snapshot(init.file, grid)
        if snap.basis == "sym":
            st = snap.to_state()
            re, ri = st.data[0, 0, 0, 0].real, st.data[1, 0, 0, 0].real
            nbar0 = re / np.sqrt(params.dp_e / params.n_bar)
            return PreparedState(st, re, ri, nbar0)
    ve, vi = raw_velocities(init, grid, params)
    return prepare_data(ve, vi, init.nbar0, params, grid)
