"""Symmetrised EMTF dynamics integrated on the filtered variable V = S(-t/eps) U.

The stiff term eps^{-1} L is never discretised: it is carried exactly by the
unitary group.  The remaining quasilinear part is evaluated pseudo-spectrally.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .modes import group_exp, mode_cache
from .plasma import B_F, E_F, U_E, U_I, FieldState14, PlasmaParams

log = logging.getLogger(__name__)


class InstabilityError(RuntimeError):
    """Non-finite values appeared; ``last_state`` holds the last finite state."""

    def __init__(self, msg, last_state=None, t=None):
        super().__init__(msg)
        self.last_state = last_state
        self.t = t


def _check_sym(state):
    if state.basis != "sym":
        raise ValueError("EMTF operators act on the symmetrised basis")


def emtf_rhs_nonstiff(eps: float, state: FieldState14, params: PlasmaParams) -> FieldState14:
    """sum_j A_j(eps, U) d_j U + F(eps, U), dealiased."""
    _check_sym(state)
    g, d = state.grid, state.data
    se = math.sqrt(params.n_bar * params.m_e)
    si = math.sqrt(params.n_bar * params.m_i)
    el, io = params.electron, params.ion

    fields = np.concatenate([
        d[0:2],
        d[2:8],
        d[B_F],
        g.grad(d[0:2]).reshape(6, *g.spec_shape),
        g.grad(d[2:8]).reshape(18, *g.spec_shape),
    ])
    ph = g.inverse(fields)
    rho = ph[0:2]
    u = ph[2:8].reshape(2, 3, *g.phys_shape)
    B = ph[8:11]
    grho = ph[11:17].reshape(2, 3, *g.phys_shape)
    gu = ph[17:35].reshape(2, 3, 3, *g.phys_shape)   # [species, component, derivative]

    out = np.empty((14,) + g.phys_shape)
    scale = (se, si)
    species = (el, io)
    sign = (-1.0, 1.0)
    mass = (params.m_e, params.m_i)
    Rg = []
    for s in range(2):
        q = rho[s] / scale[s]
        v = u[s] / scale[s]
        Ra = species[s].R_a(eps, q)
        divu = gu[s, 0, 0] + gu[s, 1, 1] + gu[s, 2, 2]
        out[s] = -np.einsum("j...,j...->...", v, grho[s]) - Ra * divu
        adv = np.einsum("j...,cj...->c...", v, gu[s])
        lor = np.cross(u[s], B, axis=0) / mass[s]
        out[2 + 3 * s: 5 + 3 * s] = -adv - Ra * grho[s] + sign[s] * lor
        Rg.append(species[s].R_ginv(eps, q) * v)
    out[E_F] = Rg[0] - Rg[1]
    out[B_F] = 0.0
    return state.with_data(g.dealias(g.forward(out)))


def filtered_rhs(t: float, eps: float, V: FieldState14, params: PlasmaParams, rhs=None) -> FieldState14:
    """S(-t/eps) N(eps, S(t/eps) V); ``rhs`` overrides the non-stiff part N."""
    if eps <= 0:
        raise ValueError("filtered dynamics needs eps > 0")
    tau = t / eps
    U = group_exp(tau, V, params)
    N = emtf_rhs_nonstiff(eps, U, params) if rhs is None else rhs(U)
    return group_exp(-tau, N, params)


def rk4_step(f, t, y: FieldState14, dt) -> FieldState14:
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + k1 * (0.5 * dt))
    k3 = f(t + 0.5 * dt, y + k2 * (0.5 * dt))
    k4 = f(t + dt, y + k3 * dt)
    return y + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6.0)


@dataclass
class EmtfRunState:
    eps: float
    t: float
    V: FieldState14
    dt: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def physical_state(run: EmtfRunState, params: PlasmaParams) -> FieldState14:
    return group_exp(run.t / run.eps, run.V, params)


def step(run: EmtfRunState, params: PlasmaParams, spectral_filter=None) -> EmtfRunState:
    f = lambda t, V: filtered_rhs(t, run.eps, V, params)
    V = rk4_step(f, run.t, run.V, run.dt)
    V = V.with_data(V.grid.dealias(V.data))
    if spectral_filter is not None:
        V = V.with_data(V.data * spectral_filter)
    if not np.all(np.isfinite(V.data)):
        raise InstabilityError(f"non-finite state at t={run.t + run.dt:.6g}", run.V, run.t)
    return EmtfRunState(run.eps, run.t + run.dt, V, run.dt)


def gauss_residual(state: FieldState14, eps: float, params: PlasmaParams) -> dict:
    """L2 norms of div B and of div E + R(g_e^{-1}) - R(g_i^{-1}).

    ``gauss_charge_resolved`` restricts the charge residual to the dealiased band.
    """
    _check_sym(state)
    g, d = state.grid, state.data
    divB = g.div(d[B_F])
    qe = g.inverse(d[0]) / math.sqrt(params.n_bar * params.m_e)
    qi = g.inverse(d[1]) / math.sqrt(params.n_bar * params.m_i)
    dens = params.electron.R_ginv(eps, qe) - params.ion.R_ginv(eps, qi)
    charge = g.div(d[E_F]) + g.forward(dens)
    return {"div_B": g.norm(divB), "gauss_charge": g.norm(charge),
            "gauss_charge_resolved": g.norm(charge * g.dealias_mask)}


def spectral_filter_mask(grid, strength=36.0, order=36):
    """Exponential filter exp(-strength (|k|/k_c)^order); k_c the dealiasing cut-off."""
    kc = grid.dealias_fraction * grid.n / 2.0
    kk = np.max(np.abs(grid.k_int), axis=0) / kc
    return np.exp(-strength * kk ** order)


def fast_time_step(grid, params, eps, factor=0.5) -> float:
    """Step resolving the fastest linear frequency present in the dealiased band."""
    lam = mode_cache(grid, params).lam_max(grid.dealias_mask)
    return factor * eps / lam if lam > 0 else math.inf


def advective_time_step(state: FieldState14, params: PlasmaParams, cfl=0.5) -> float:
    """0.5 dx / (max|v| + max sound speed)."""
    g = state.grid
    se = math.sqrt(params.n_bar * params.m_e)
    si = math.sqrt(params.n_bar * params.m_i)
    ph = g.inverse(state.data[2:8])
    vmax = max(np.max(np.linalg.norm(ph[0:3], axis=0)) / se, np.max(np.linalg.norm(ph[3:6], axis=0)) / si)
    dx = g.domain_length / g.n
    return cfl * dx / (vmax + max(params.a_e, params.a_i))


def integrate_filtered(V0: FieldState14, params: PlasmaParams, eps, T, dt, snapshot_every=None,
                       callback=None, spectral_filter=None):
    """Advance V from t = 0 to T with a uniform step adjusted to land on T.

    ``callback(t, V, V_prev, dt)`` is called at t = 0 and at every snapshot step.
    Returns the final run state.
    """
    nsteps = 0 if T == 0 else max(1, int(math.ceil(T / dt - 1e-12)))
    h = T / nsteps if nsteps else dt
    run = EmtfRunState(eps, 0.0, V0, h)
    every = snapshot_every or nsteps or 1
    if callback is not None:
        callback(0.0, run.V, None, h)
    for i in range(1, nsteps + 1):
        prev = run.V
        run = step(run, params, spectral_filter)
        if i == nsteps:
            run.t = T
        if callback is not None and (i % every == 0 or i == nsteps):
            callback(run.t, run.V, prev, h)
    return run


def run_emtf(config):
    """Integrate EMTF for ``config`` (a harness RunConfig); returns a Trajectory."""
    from .harness.runs import run_emtf as _run
    return _run(config)
