"""Limit models: the effective slow limit model (ESLM), incompressible extended MHD
(XMHD), the bridge between them, data preparation and physics diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import emtf_rhs_nonstiff, rk4_step
from .modes import PreconditionError, apply_Pe, group_exp, nullspace_projector
from .plasma import B_F, E_F, U_E, U_I, FieldState14, PlasmaParams
from .spectral import GridSpec

PREP_TOL = 1e-10
DIV_TOL = 1e-10


# -- prepared data -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PreparedState:
    """A symmetrised state with U = P_e U, zero E and constant densities."""
    state: FieldState14
    rho_bar_e: float
    rho_bar_i: float
    nbar0: float

    @property
    def grid(self):
        return self.state.grid

    def initial_state(self, eps: float, params: PlasmaParams) -> FieldState14:
        """EMTF data at scale eps with the nonlinear charge law satisfied exactly.

        The density entries become sqrt(n_bar m_s) g_s(n_bar + eps nbar0) / eps, which
        differ from the eps = 0 entries by O(eps); every other component is unchanged.
        """
        if eps == 0:
            return self.state.copy()
        d = self.state.data.copy()
        g = self.grid
        nt = params.n_bar + eps * self.nbar0
        for s, sp, m in ((0, params.electron, params.m_e), (1, params.ion, params.m_i)):
            q = float(sp.g(nt)) / eps
            d[s] = 0.0
            d[s][0, 0, 0] = math.sqrt(params.n_bar * m) * q
        del g
        return self.state.with_data(d)


def density_entries(nbar0: float, params: PlasmaParams):
    """Linearised symmetrised densities rho_s = sqrt(p'_s / n_bar) nbar0."""
    return (math.sqrt(params.dp_e / params.n_bar) * nbar0,
            math.sqrt(params.dp_i / params.n_bar) * nbar0)


def prepare_data(ve, vi, nbar0: float, params: PlasmaParams, grid: GridSpec, check=True) -> PreparedState:
    """Project raw velocity coefficients onto prepared data.

    Both velocities are Leray projected and their means replaced by the common
    centre-of-mass mean; densities are n_e = n_i = nbar0, E = 0 and
    B = n_bar curl Delta^{-1} (v_e - v_i).
    """
    ve = grid.leray(np.asarray(ve, dtype=complex))
    vi = grid.leray(np.asarray(vi, dtype=complex))
    me, mi = params.m_e, params.m_i
    z = grid.zero_mode
    vbar = (me * ve + mi * vi) / (me + mi)
    ve = np.where(z, vbar, ve)
    vi = np.where(z, vbar, vi)
    B = params.n_bar * grid.curl(grid.inv_laplacian(ve - vi))
    d = np.zeros((14,) + grid.spec_shape, dtype=complex)
    re, ri = density_entries(nbar0, params)
    d[0][0, 0, 0] = re
    d[1][0, 0, 0] = ri
    d[U_E] = math.sqrt(params.n_bar * me) * ve
    d[U_I] = math.sqrt(params.n_bar * mi) * vi
    d[B_F] = B
    prep = PreparedState(FieldState14(d, grid, "sym"), re, ri, nbar0)
    if check:
        res = prepared_residuals(prep.state, params)
        scale = max(prep.state.norm(), 1e-300)
        if res["pe"] > 1e-11 * scale or res["ampere"] > 1e-10 * scale:
            raise PreconditionError(f"prepared data check failed: {res}", res)
    return prep


def prepared_residuals(state: FieldState14, params: PlasmaParams) -> dict:
    g, d = state.grid, state.data
    se = math.sqrt(params.n_bar / params.m_e)
    si = math.sqrt(params.n_bar / params.m_i)
    J = si * d[U_I] - se * d[U_E]
    return {
        "pe": (state - apply_Pe(state, params)).norm(),
        "ampere": g.norm(g.curl(d[B_F]) - J),
        "div": g.norm(g.div(d[U_E])) + g.norm(g.div(d[U_I])) + g.norm(g.div(d[B_F])),
        "E": g.norm(d[E_F]),
    }


def _as_state(x) -> FieldState14:
    return x.state if isinstance(x, PreparedState) else x


def _check_prepared(state, params, tol=PREP_TOL):
    res = prepared_residuals(state, params)
    scale = max(state.norm(), 1e-300)
    bad = {k: v for k, v in res.items() if v > tol * scale}
    if bad:
        raise PreconditionError(f"state is not prepared (residuals {bad})", res)


# -- ESLM --------------------------------------------------------------------

def _cross(a, b):
    return np.cross(a, b, axis=0)


def eslm_rhs(x, params: PlasmaParams, check=True) -> FieldState14:
    """Closed-form right-hand side of the effective slow limit model."""
    state = _as_state(x)
    if check:
        _check_prepared(state, params)
    g, d = state.grid, state.data
    me, mi, nb = params.m_e, params.m_i, params.n_bar
    b, rho, delta = params.b, params.rho, params.delta
    u0 = (math.sqrt(me) * d[U_E] + math.sqrt(mi) * d[U_I]) / (math.sqrt(nb) * (me + mi))
    Lu = g.leray(u0)
    J = g.curl(d[B_F])
    D0 = Lu - (1.0 - delta) * (mi / rho) * J
    cJ = g.curl(J)
    w = g.curl(Lu)
    ph = g.inverse(np.concatenate([Lu, J, d[B_F], D0, cJ, w]))
    Lu_p, J_p, B_p, D0_p, cJ_p, w_p = (ph[3 * i: 3 * i + 3] for i in range(6))

    JxB = _cross(J_p, B_p)
    DxB = _cross(D0_p, B_p)
    T0 = (-b * _cross(Lu_p, cJ_p) - b * _cross(J_p, w_p)
          + rho ** -2 * mi ** 3 * delta * (1.0 - delta) * _cross(J_p, cJ_p))
    S0 = Lu_p[:, None] * Lu_p[None, :] + (b / rho) * J_p[:, None] * J_p[None, :]
    prods = g.dealias(g.forward(np.concatenate([JxB, DxB, T0, S0.reshape(9, *g.phys_shape)])))
    JxB_h, DxB_h, T0_h = prods[0:3], prods[3:6], prods[6:9]
    S0_h = prods[9:18].reshape(3, 3, *g.spec_shape)
    divS = 1j * np.einsum("j...,ij...->i...", g.k, S0_h)

    LJxB = g.leray(JxB_h)
    rD = g.helmholtz_ratio(g.leray(DxB_h), b)
    rT = g.helmholtz_ratio(g.leray(T0_h), b)
    LdivS = g.leray(divS)
    sme, smi = math.sqrt(nb * me), math.sqrt(nb * mi)
    se, si = math.sqrt(nb / me), math.sqrt(nb / mi)

    out = np.zeros_like(d)
    out[U_E] = sme / (me * mi) * b * LJxB + se * rD - (sme * LdivS + se * rT)
    out[U_I] = smi / (me * mi) * b * LJxB - si * rD - (smi * LdivS - si * rT)
    out[B_F] = g.helmholtz_inverse(g.curl(DxB_h - T0_h), b)
    return state.with_data(out)


def redundancy_residual(x, params: PlasmaParams, rhs=None) -> float:
    """Relative mismatch of the redundant ESLM rows.

    Differentiating Ampere's law in time, the current combination
    sqrt(n_bar/m_i) du_i - sqrt(n_bar/m_e) du_e of the velocity rows must equal
    curl of the B row.
    """
    state = _as_state(x)
    r = eslm_rhs(state, params, check=False) if rhs is None else rhs
    g, d = state.grid, r.data
    se = math.sqrt(params.n_bar / params.m_e)
    si = math.sqrt(params.n_bar / params.m_i)
    dJ = si * d[U_I] - se * d[U_E]
    return g.norm(dJ - g.curl(d[B_F])) / max(r.norm(1.0), 1e-300)


def eslm_conserved(x, params: PlasmaParams) -> dict:
    """Means of B and of the momentum sqrt(m_e) u_e + sqrt(m_i) u_i, and the densities."""
    state = _as_state(x)
    g, d = state.grid, state.data
    z = g.zero_mode
    mom = math.sqrt(params.m_e) * d[U_E] + math.sqrt(params.m_i) * d[U_I]
    return {
        "B_mean": (d[B_F] * z)[:, 0, 0, 0].real.copy(),
        "momentum_mean": (mom * z)[:, 0, 0, 0].real.copy(),
        "densities": d[0:2].copy(),
    }


def eslm_rhs_oracle(x, params: PlasmaParams, projector="Pe") -> FieldState14:
    """Projected EMTF right-hand side at eps = 0 (independent evaluation path)."""
    from .modes import apply_P
    state = _as_state(x)
    N = emtf_rhs_nonstiff(0.0, state, params)
    return apply_Pe(N, params) if projector == "Pe" else apply_P(N, params)


# -- XMHD --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class XmhdState:
    """(u, B*) stacked as a (6, n, n, n//2+1) spectral array."""
    data: np.ndarray
    grid: GridSpec

    @classmethod
    def from_fields(cls, u, B_star, grid):
        return cls(np.concatenate([u, B_star]).astype(complex), grid)

    @property
    def u(self):
        return self.data[0:3]

    @property
    def B_star(self):
        return self.data[3:6]

    def B(self, params):
        return b_of_bstar(self.B_star, self.grid, params)

    def with_data(self, data):
        return XmhdState(data, self.grid)

    def __add__(self, o):
        return self.with_data(self.data + o.data)

    def __sub__(self, o):
        return self.with_data(self.data - o.data)

    def __mul__(self, s):
        return self.with_data(self.data * s)

    __rmul__ = __mul__

    def norm(self, sigma=0.0):
        return self.grid.norm(self.data, sigma)

    def copy(self):
        return self.with_data(self.data.copy())


def bstar_of_b(B, grid: GridSpec, params: PlasmaParams):
    return grid.helmholtz(B, params.b)


def b_of_bstar(B_star, grid: GridSpec, params: PlasmaParams):
    return grid.helmholtz_inverse(B_star, params.b)


def _check_divfree(x: XmhdState):
    g = x.grid
    scale = max(x.norm(1.0), 1e-300)
    r = g.norm(g.div(x.u)) + g.norm(g.div(x.B_star))
    if r > DIV_TOL * scale:
        raise PreconditionError(f"XMHD fields are not divergence free (residual {r:.3e})", r)


def _xmhd_terms(x: XmhdState, params: PlasmaParams):
    g = x.grid
    rho, b = params.rho, params.b
    B = x.B(params)
    J = g.curl(B)
    w = g.curl(x.u)
    gu = g.grad(x.u)                    # [component, derivative]
    ph = g.inverse(np.concatenate([x.u, x.B_star, J, w, gu.reshape(9, *g.spec_shape)]))
    u_p, Bs_p, J_p, w_p = ph[0:3], ph[3:6], ph[6:9], ph[9:12]
    gu_p = ph[12:21].reshape(3, 3, *g.phys_shape)
    adv = np.einsum("j...,cj...->c...", u_p, gu_p)
    mom = adv + _cross(Bs_p, J_p) / rho
    ind = _cross(Bs_p, u_p - (params.d_i / rho) * J_p) + b * _cross(w_p, J_p)
    prods = g.dealias(g.forward(np.concatenate([mom, ind])))
    return prods[0:3], prods[3:6]


def xmhd_rhs(x: XmhdState, params: PlasmaParams, check=True) -> XmhdState:
    """Time derivatives of (u, B*); the pressure gradient is removed by Leray."""
    if check:
        _check_divfree(x)
    g = x.grid
    mom, ind = _xmhd_terms(x, params)
    return x.with_data(np.concatenate([-g.leray(mom), -g.curl(ind)]))


def xmhd_pressure(x: XmhdState, params: PlasmaParams):
    """p = -Delta^{-1} div[(u.grad)u + B* x curl B / rho]."""
    g = x.grid
    mom, _ = _xmhd_terms(x, params)
    return -g.inv_laplacian(g.div(mom))


def energy(x: XmhdState, params: PlasmaParams) -> float:
    """int rho|u|^2/2 + |B|^2/2 + d_e^2 |curl B|^2 / (2 rho)."""
    g = x.grid
    B = x.B(params)
    return 0.5 * (params.rho * g.integral_sq(x.u) + g.integral_sq(B)
                  + params.b * g.integral_sq(g.curl(B)))


# -- bridge ------------------------------------------------------------------

def slm_to_xmhd(x, params: PlasmaParams, check=True) -> XmhdState:
    state = _as_state(x)
    if check:
        _check_prepared(state, params)
    g, d = state.grid, state.data
    me, mi = params.m_e, params.m_i
    u = (math.sqrt(me) * d[U_E] + math.sqrt(mi) * d[U_I]) / (math.sqrt(params.n_bar) * (me + mi))
    return XmhdState.from_fields(u, bstar_of_b(d[B_F], g, params), g)


def xmhd_to_slm(x: XmhdState, params: PlasmaParams, nbar0: float = 0.0, check=True) -> PreparedState:
    if check:
        _check_divfree(x)
    g = x.grid
    me, mi, nb, b = params.m_e, params.m_i, params.n_bar, params.b
    B = x.B(params)
    cB = g.curl(B)
    d = np.zeros((14,) + g.spec_shape, dtype=complex)
    re, ri = density_entries(nbar0, params)
    d[0][0, 0, 0] = re
    d[1][0, 0, 0] = ri
    d[U_E] = math.sqrt(nb * me) * x.u - b * math.sqrt(nb / me) * cB
    d[U_I] = math.sqrt(nb * mi) * x.u + b * math.sqrt(nb / mi) * cB
    d[B_F] = B
    return PreparedState(FieldState14(d, g, "sym"), re, ri, nbar0)


def bridge_differential(dstate: FieldState14, params: PlasmaParams) -> XmhdState:
    """Linear part of slm_to_xmhd, applied to a time derivative."""
    return slm_to_xmhd(dstate, params, check=False)


# -- FLM ---------------------------------------------------------------------

def flm_rhs_quadrature(state: FieldState14, params: PlasmaParams, T_avg=200.0, n_nodes=4096, rhs=None):
    """Trapezoidal mean over tau in [0, T_avg] of S(-tau) N(0, S(tau) U).

    ``rhs`` replaces N(0, .) (for instance by a frozen forcing).
    """
    if T_avg <= 0:
        raise ValueError("T_avg must be positive")
    if n_nodes < 16:
        raise ValueError("n_nodes must be >= 16")
    f = rhs if rhs is not None else (lambda U: emtf_rhs_nonstiff(0.0, U, params))
    taus = np.linspace(0.0, T_avg, n_nodes)
    h = taus[1] - taus[0]
    acc = np.zeros_like(state.data)
    for j, tau in enumerate(taus):
        w = 0.5 * h if j in (0, n_nodes - 1) else h
        acc += w * group_exp(-tau, f(group_exp(tau, state, params)), params).data
    return state.with_data(acc / T_avg)


# -- GOL ---------------------------------------------------------------------

def physical_fields(state: FieldState14, eps: float, params: PlasmaParams) -> dict:
    """Unscaled physical fields n_s, v_s, E, B (grid values) at scale eps."""
    if eps <= 0:
        raise ValueError("physical reconstruction needs eps > 0")
    g = state.grid
    ph = g.inverse(state.data)
    se = math.sqrt(params.n_bar * params.m_e)
    si = math.sqrt(params.n_bar * params.m_i)
    return {
        "n_e": params.electron.g_inv(eps * ph[0] / se),
        "n_i": params.ion.g_inv(eps * ph[1] / si),
        "v_e": eps * ph[2:5] / se,
        "v_i": eps * ph[5:8] / si,
        "E": eps * ph[8:11],
        "B": eps * ph[11:14],
    }


def _fluid_moments(f, params):
    me, mi = params.m_e, params.m_i
    rho = me * f["n_e"] + mi * f["n_i"]
    u = (me * f["n_e"] * f["v_e"] + mi * f["n_i"] * f["v_i"]) / rho
    J = f["n_i"] * f["v_i"] - f["n_e"] * f["v_e"]
    p = params.pressure_e.p(f["n_e"]) + params.pressure_i.p(f["n_i"])
    return rho, u, J, p


def gol_residual(prev: FieldState14, nxt: FieldState14, dt: float, eps: float, params: PlasmaParams,
                 d_e=None, d_i=None) -> float:
    """Rms residual of the generalised Ohm's law, divided by eps.

    Fields are evaluated at the midpoint of two states ``dt`` apart in slow time;
    the fast-time derivative of J/rho is their finite difference (approximate).
    """
    if dt <= 0:
        raise ValueError("snapshot spacing must be positive")
    g = prev.grid
    d_e = params.d_e if d_e is None else d_e
    d_i = params.d_i if d_i is None else d_i
    mid = prev.with_data(0.5 * (prev.data + nxt.data))
    f = physical_fields(mid, eps, params)
    rho, u, J, p = _fluid_moments(f, params)
    _, _, J0, _ = _fluid_moments(physical_fields(prev, eps, params), params)
    rho0 = _fluid_moments(physical_fields(prev, eps, params), params)[0]
    _, _, J1, _ = _fluid_moments(physical_fields(nxt, eps, params), params)
    rho1 = _fluid_moments(physical_fields(nxt, eps, params), params)[0]
    Jr = J / rho
    dJr = eps * (J1 / rho1 - J0 / rho0) / dt

    def grad(a):
        return g.inverse(g.grad(g.forward(a)))

    def dirderiv(a, w):
        """(a . grad) w for vector w."""
        gw = g.inverse(g.grad(g.forward(w)))       # [component, derivative]
        return np.einsum("j...,cj...->c...", a, gw)

    lhs = f["E"] + _cross(u, f["B"])
    rhs = (-(d_i / rho) * grad(p) + d_i * _cross(Jr, f["B"]) - d_i * d_e ** 2 * dirderiv(Jr, Jr)
           + d_e ** 2 * (dJr + dirderiv(u, Jr) + dirderiv(Jr, u)))
    return g.physical_rms(lhs - rhs) / eps


def gol_residual_static(state: FieldState14, eps: float, params: PlasmaParams, d_e=0.0, d_i=0.0) -> float:
    """Ohm's-law residual without the time-derivative term (exact for d_e = 0)."""
    if d_e != 0:
        raise ValueError("the static form omits the d_e^2 time derivative; use gol_residual")
    return gol_residual(state, state, 1.0, eps, params, d_e=0.0, d_i=d_i)


# -- irrotational flows ------------------------------------------------------

def _constraint_matrices(grid: GridSpec, params: PlasmaParams):
    """Per-mode constraints on (v_e, v_i, B): PauPau, Ampere and divergence."""
    kv = grid.k.reshape(3, -1).T
    M = kv.shape[0]
    X = np.zeros((M, 3, 3), dtype=complex)
    X[:, 0, 1], X[:, 0, 2] = -kv[:, 2], kv[:, 1]
    X[:, 1, 0], X[:, 1, 2] = kv[:, 2], -kv[:, 0]
    X[:, 2, 0], X[:, 2, 1] = -kv[:, 1], kv[:, 0]
    X *= 1j
    I3 = np.eye(3)
    delta, nb = params.delta, params.n_bar
    A = np.zeros((M, 12, 9), dtype=complex)
    A[:, 0:3, 0:3] = delta * X
    A[:, 0:3, 6:9] = -I3
    A[:, 3:6, 3:6] = -X
    A[:, 3:6, 6:9] = -I3
    A[:, 6:9, 6:9] = X
    A[:, 6:9, 0:3] = nb * I3
    A[:, 6:9, 3:6] = -nb * I3
    A[:, 9, 0:3] = kv
    A[:, 10, 3:6] = kv
    A[:, 11, 6:9] = kv
    return A


def irrotational_check(ve, vi, B, params: PlasmaParams, grid: GridSpec, tol=1e-10) -> dict:
    """Check the cancellation forced by delta curl v_e = -curl v_i = B with Ampere's law."""
    g = grid
    scale = max(g.norm(ve) + g.norm(vi) + g.norm(B), 1e-300)
    pau = (g.norm(params.delta * g.curl(ve) - B) + g.norm(g.curl(vi) + B)) / scale
    report = {"paupau_residual": pau, "paupau_satisfied": bool(pau <= tol)}
    if not report["paupau_satisfied"]:
        report["conclusion"] = None
        return report
    A = _constraint_matrices(g, params)
    P, _ = nullspace_projector(A)
    x = np.concatenate([ve, vi, B]).reshape(9, -1)
    y = np.einsum("mij,jm->im", P, x).reshape((9,) + g.spec_shape)
    ve_p, vi_p, B_p = y[0:3], y[3:6], y[6:9]
    factor = g.k2 + params.n_bar * (1.0 + params.delta) / params.delta
    prep = prepare_data(ve_p, vi_p, 0.0, params, g, check=False)
    rhs = eslm_rhs(prep, params, check=False)
    report.update({
        "projected_B_norm": g.norm(B_p),
        "mode_factor_min": float(np.min(factor)),
        "mode_identity_residual": g.norm(factor * B_p),
        "velocity_nonconstant_norm": g.norm(np.where(g.zero_mode, 0.0, ve_p)) + g.norm(np.where(g.zero_mode, 0.0, vi_p)),
        "eslm_rhs_norm": rhs.norm(),
        "conclusion": "B vanishes and the limit state is constant",
    })
    return report


# -- integrators -------------------------------------------------------------

def integrate(f, y0, T, dt, callback=None, every=None):
    """Uniform RK4 from 0 to T; ``callback(t, y, y_prev, h)`` at 0 and every ``every`` steps."""
    nsteps = 0 if T == 0 else max(1, int(math.ceil(T / dt - 1e-12)))
    h = T / nsteps if nsteps else dt
    every = every or nsteps or 1
    y, t = y0, 0.0
    if callback is not None:
        callback(0.0, y, None, h)
    for i in range(1, nsteps + 1):
        prev = y
        y = rk4_step(f, t, y, h)
        t = T if i == nsteps else t + h
        if not np.all(np.isfinite(y.data)):
            from .dynamics import InstabilityError
            raise InstabilityError(f"non-finite state at t={t:.6g}", prev, t - h)
        if callback is not None and (i % every == 0 or i == nsteps):
            callback(t, y, prev, h)
    return y


def integrate_eslm(state: FieldState14, params, T, dt, callback=None, every=None):
    return integrate(lambda t, y: eslm_rhs(y, params, check=False), state, T, dt, callback, every)


def integrate_xmhd(x: XmhdState, params, T, dt, callback=None, every=None):
    return integrate(lambda t, y: xmhd_rhs(y, params, check=False), x, T, dt, callback, every)


def run_eslm(config):
    from .harness.runs import run_eslm as _run
    return _run(config)


def run_xmhd(config):
    from .harness.runs import run_xmhd as _run
    return _run(config)
