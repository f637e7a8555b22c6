"""Oracle verification suite for the mode decomposition and projectors."""
from __future__ import annotations

import itertools
import math

import numpy as np

from .. import modes
from ..modes import apply_P, apply_Pe, apply_Pe_global, basis_arrays, build_G, build_L, group_exp, nullspace_projector
from ..plasma import B_F, E_F, FieldState14, PlasmaParams
from ..spectral import GridSpec

TOL = 1e-10
EXPECTED_DIMS = {"zero": (8, 7), "nonzero": (6, 4)}     # (dim Ker L_k, dim Ker L_k & Ker G_k)


def lattice(kmax: int) -> np.ndarray:
    r = range(-kmax, kmax + 1)
    return np.array(list(itertools.product(r, r, r)), dtype=float)


def _opnorm(A):
    return np.linalg.norm(A, ord=2, axis=(-2, -1))


def _herm(A):
    return A.conj().swapaxes(-1, -2)


def random_state(grid: GridSpec, rng, band=True) -> FieldState14:
    d = grid.forward(rng.standard_normal((14,) + grid.phys_shape))
    if band:
        d = grid.dealias(d)
    return FieldState14(d, grid, "sym")


def k_set_state(grid: GridSpec, rng) -> FieldState14:
    """Random element of K: no densities, no B, divergence-free E."""
    s = random_state(grid, rng)
    d = s.data
    d[0:2] = 0.0
    d[B_F] = 0.0
    d[E_F] = grid.leray(d[E_F])
    return s.with_data(d)


def mode_checks(kv, params: PlasmaParams, corrupt_w3_sign=False) -> dict:
    """Per-mode algebraic checks against SVD nullspace oracles."""
    L = build_L(kv, params)
    G = build_G(kv, params)
    Wh, Wx, dh, dx = basis_arrays(kv, params, corrupt_w3_sign)
    zero = np.all(kv == 0, axis=1)
    P_e_or, null_e = nullspace_projector(np.concatenate([L, G], axis=1))
    P_or, null_p = nullspace_projector(L)

    W = np.concatenate([Wh, Wx], axis=2)
    # columns beyond the mode's dimension are zero padding
    dim = dh + dx
    mask = np.concatenate([np.arange(Wh.shape[2])[None, :] < dh[:, None],
                           np.arange(Wx.shape[2])[None, :] < dx[:, None]], axis=1)
    gram = _herm(W) @ W
    eye = np.eye(W.shape[2])[None] * (mask[:, :, None] & mask[:, None, :])
    Pe = Wh @ _herm(Wh)
    P = Pe + Wx @ _herm(Wx)

    exp_ker = np.where(zero, EXPECTED_DIMS["zero"][0], EXPECTED_DIMS["nonzero"][0])
    exp_h = np.where(zero, EXPECTED_DIMS["zero"][1], EXPECTED_DIMS["nonzero"][1])
    res = {
        "dimensions": {
            "ok": bool(np.all(dim == exp_ker) and np.all(dh == exp_h)
                       and np.all(null_p == exp_ker) and np.all(null_e == exp_h)),
            "zero_mode": [int(dim[zero][0]), int(dh[zero][0])] if zero.any() else None,
            "nonzero_modes": sorted({(int(a), int(b)) for a, b in zip(dim[~zero], dh[~zero])}),
        },
        "orthonormality": float(np.max(_opnorm(gram - eye))),
        "annihilation_L": float(np.max(_opnorm(L @ W))),
        "annihilation_G": float(np.max(_opnorm(G @ Wh))),
        "Pe_idempotent": float(np.max(_opnorm(Pe @ Pe - Pe))),
        "Pe_hermitian": float(np.max(_opnorm(Pe - _herm(Pe)))),
        "P_idempotent": float(np.max(_opnorm(P @ P - P))),
        "P_hermitian": float(np.max(_opnorm(P - _herm(P)))),
        "P_Pe_equals_Pe": float(np.max(_opnorm(P @ Pe - Pe))),
        "oracle_Pe": float(np.max(_opnorm(Pe - P_e_or))),
        "oracle_P": float(np.max(_opnorm(P - P_or))),
    }
    return res


def mean_value_errors(state: FieldState14, params: PlasmaParams, T_max: float, h: float, checkpoints):
    """Relative error of the running trapezoidal tau-average of S(tau) state against P state."""
    target = apply_P(state, params).data
    scale = state.norm()
    n = int(round(T_max / h))
    cps = sorted({int(round(T / h)) for T in checkpoints if 0 < T <= T_max})
    acc = 0.5 * state.data.copy()
    out = {}
    for j in range(1, n + 1):
        f = group_exp(j * h, state, params).data
        if j in cps:
            avg = (acc + 0.5 * f) * h / (j * h)
            out[round(j * h, 9)] = state.grid.norm(avg - target) / scale
        acc += f
    return out


def windowed_slope(errors: dict, centres) -> tuple:
    """Fit log(rms error over [T, 2T]) against log T."""
    Ts = np.array(sorted(errors))
    e = np.array([errors[t] for t in Ts])
    xs, ys = [], []
    for c in centres:
        sel = (Ts >= c) & (Ts <= 2 * c)
        if sel.sum() >= 3:
            xs.append(math.log(c))
            ys.append(math.log(math.sqrt(np.mean(e[sel] ** 2))))
    slope = float(np.polyfit(xs, ys, 1)[0])
    return slope, dict(zip(np.exp(xs).tolist(), np.exp(ys).tolist()))


def verify_suite(params: PlasmaParams | None = None, kmax: int = 8, inject_fault=None, seed: int = 0,
                 n_states: int = 5, grid_n: int = 16, mean_value=True) -> dict:
    """Run every check; failures are report entries, never exceptions."""
    if kmax < 2:
        raise ValueError("kmax must be >= 2")
    params = params or PlasmaParams()
    rng = np.random.default_rng(seed)
    corrupt = inject_fault == "w3_sign"
    if inject_fault not in (None, "w3_sign"):
        raise ValueError(f"unknown fault {inject_fault!r}")

    checks = {}
    mc = mode_checks(lattice(kmax), params, corrupt)
    checks["dimensions"] = {"pass": mc["dimensions"]["ok"], **mc["dimensions"]}
    for key in ("orthonormality", "annihilation_L", "annihilation_G", "Pe_idempotent", "Pe_hermitian",
                "P_idempotent", "P_hermitian", "P_Pe_equals_Pe", "oracle_Pe", "oracle_P"):
        checks[key] = {"pass": mc[key] <= TOL, "worst": mc[key]}

    grid = GridSpec(grid_n)
    modes.mode_cache.cache_clear()
    dual, kset, iso, law = [], [], [], []
    for _ in range(n_states):
        s = random_state(grid, rng)
        a = apply_Pe(s, params)
        dual.append((a - apply_Pe_global(s, params)).norm() / max(a.norm(), 1e-300))
        k = k_set_state(grid, rng)
        kset.append((apply_P(k, params) - apply_Pe(k, params)).norm() / max(k.norm(), 1e-300))
        t1, t2 = rng.uniform(-3, 3, size=2)
        iso.append(abs(group_exp(t1, s, params).norm() - s.norm()) / s.norm())
        lhs = group_exp(t1, group_exp(t2, s, params), params)
        law.append((lhs - group_exp(t1 + t2, s, params)).norm() / s.norm())
    checks["dual_path_Pe"] = {"pass": max(dual) <= 1e-11, "worst": max(dual)}
    checks["K_coincidence"] = {"pass": max(kset) <= 1e-11, "worst": max(kset)}
    checks["group_isometry"] = {"pass": max(iso) <= 1e-12, "worst": max(iso)}
    checks["group_law"] = {"pass": max(law) <= 1e-11, "worst": max(law)}

    if mean_value:
        g8 = GridSpec(8)
        s = random_state(g8, rng)
        errs = mean_value_errors(s, params, 320.0, 0.05, np.arange(10.0, 320.01, 1.0))
        slope, _ = windowed_slope(errs, [10, 20, 40, 80, 160])
        checks["mean_value"] = {"pass": abs(slope + 1.0) <= 0.1 and errs[320.0] < 1e-2,
                                "slope": slope, "error_at_T320": errs[320.0]}

    return {
        "params": params.to_dict(), "params_hash": params.digest(), "kmax": kmax,
        "fault": inject_fault, "tolerance": TOL, "checks": checks,
        "pass": all(c["pass"] for c in checks.values()),
    }
