"""Per-Fourier-mode algebra of the penalisation operator.

For each wavenumber k the singular operator acts as a 14x14 skew-Hermitian
matrix L_k and the Gauss constraints as a 2x14 matrix G_k.  This module
assembles them, writes down orthonormal bases of H_k = Ker L_k /\\ Ker G_k and of
Ker L_k in closed form, builds the projectors P_e and P, the unitary group
exp(tau L) through a Hermitian eigensolver, and brute-force SVD oracles.

Arrays over modes are laid out with the mode index first, ``(n_modes, 14, 14)``;
states are flattened to ``(14, n_modes)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from . import _kernels
from .plasma import B_F, E_F, U_E, U_I, FieldState14, PlasmaParams
from .spectral import GridSpec

RANK_RTOL = 1e-10
FRAME_TOL = 1e-8


class PreconditionError(ValueError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


def _cross_matrix(kv):
    """X such that X @ x = k x x, for kv of shape (M, 3)."""
    M = kv.shape[0]
    X = np.zeros((M, 3, 3))
    X[:, 0, 1], X[:, 0, 2] = -kv[:, 2], kv[:, 1]
    X[:, 1, 0], X[:, 1, 2] = kv[:, 2], -kv[:, 0]
    X[:, 2, 0], X[:, 2, 1] = -kv[:, 1], kv[:, 0]
    return X


def build_L(kv, params: PlasmaParams):
    kv = np.atleast_2d(np.asarray(kv, dtype=float))
    M = kv.shape[0]
    L = np.zeros((M, 14, 14), dtype=complex)
    ae, ai = params.a_e, params.a_i
    se = np.sqrt(params.n_bar / params.m_e)
    si = np.sqrt(params.n_bar / params.m_i)
    I3 = np.eye(3)
    L[:, 0, U_E] = -1j * ae * kv
    L[:, 1, U_I] = -1j * ai * kv
    L[:, U_E, 0] = -1j * ae * kv
    L[:, U_I, 1] = -1j * ai * kv
    L[:, U_E, E_F] = -se * I3
    L[:, U_I, E_F] = si * I3
    L[:, E_F, U_E] = se * I3
    L[:, E_F, U_I] = -si * I3
    X = _cross_matrix(kv)
    L[:, E_F, B_F] = 1j * X
    L[:, B_F, E_F] = -1j * X
    return L


def build_G(kv, params: PlasmaParams):
    kv = np.atleast_2d(np.asarray(kv, dtype=float))
    M = kv.shape[0]
    G = np.zeros((M, 2, 14), dtype=complex)
    G[:, 0, B_F] = 1j * kv
    G[:, 1, 0] = np.sqrt(params.n_bar / params.dp_e)
    G[:, 1, 1] = -np.sqrt(params.n_bar / params.dp_i)
    G[:, 1, E_F] = 1j * kv
    return G


@dataclass(frozen=True, eq=False)
class ModeMatrices:
    k: np.ndarray
    L: np.ndarray
    G: np.ndarray
    params: PlasmaParams


def build_mode_matrices(k, params: PlasmaParams) -> ModeMatrices:
    k = np.asarray(k, dtype=float).reshape(3)
    L = build_L(k[None], params)[0]
    G = build_G(k[None], params)[0]
    assert np.max(np.abs(L + L.conj().T)) <= 1e-14 * max(1.0, np.max(np.abs(L)))
    return ModeMatrices(k, L, G, params)


def frame(kv):
    """Right-handed orthonormal frames (e1 = k/|k|, e2, e3), each of shape (M, 3).

    Rows with k = 0 are returned as zeros.
    """
    kv = np.atleast_2d(np.asarray(kv, dtype=float))
    nk = np.linalg.norm(kv, axis=1)
    nz = nk > 0
    e1 = np.zeros_like(kv)
    e1[nz] = kv[nz] / nk[nz, None]
    c3 = np.cross(e1, np.array([0.0, 0.0, 1.0]))
    c1 = np.cross(e1, np.array([1.0, 0.0, 0.0]))
    use1 = np.linalg.norm(c3, axis=1) < FRAME_TOL
    c = np.where(use1[:, None], c1, c3)
    cn = np.linalg.norm(c, axis=1)
    assert np.all(cn[nz] > 0), "degenerate frame"
    e2 = np.zeros_like(kv)
    e2[nz] = c[nz] / cn[nz, None]
    e3 = np.cross(e1, e2)
    return e1, e2, e3


def _zero_mode_vectors(params: PlasmaParams):
    """w_0^0..w_0^6 (columns) and the extra density vector completing Ker L_0."""
    me, mi = params.m_e, params.m_i
    r = params.dp_e / params.dp_i
    H = np.zeros((14, 7))
    H[0, 0], H[1, 0] = np.sqrt(r), 1.0
    H[:, 0] /= np.sqrt(1.0 + r)
    for j in range(3):
        H[2 + j, 1 + j] = np.sqrt(me / mi)
        H[5 + j, 1 + j] = 1.0
        H[:, 1 + j] *= np.sqrt(mi / (me + mi))
        H[11 + j, 4 + j] = 1.0
    X = np.zeros((14, 1))
    X[0, 0], X[1, 0] = 1.0, -np.sqrt(r)
    X /= np.sqrt(1.0 + r)
    return H, X


def basis_arrays(kv, params: PlasmaParams, corrupt_w3_sign=False):
    """Closed-form bases for an array of wavenumbers.

    Returns (Wh, Wx, dim_h, dim_x): Wh has shape (M, 14, 7) holding the H_k basis
    in its first dim_h columns; Wx has shape (M, 14, 2) holding the vectors that
    complete it to a basis of Ker L_k.  Unused columns are zero.
    """
    kv = np.atleast_2d(np.asarray(kv, dtype=float))
    M = kv.shape[0]
    me, mi, nb = params.m_e, params.m_i, params.n_bar
    b = params.b
    dpe, dpi = params.dp_e, params.dp_i
    se, si = np.sqrt(nb / me), np.sqrt(nb / mi)
    nk = np.linalg.norm(kv, axis=1)
    zero = nk == 0
    e1, e2, e3 = frame(kv)

    Wh = np.zeros((M, 14, 7), dtype=complex)
    Wx = np.zeros((M, 14, 2), dtype=complex)
    nkz = np.where(zero, 1.0, nk)

    s = 1.0 / np.sqrt(me + mi)
    Wh[:, U_E, 0] = s * np.sqrt(me) * e2
    Wh[:, U_I, 0] = s * np.sqrt(mi) * e2
    Wh[:, U_E, 1] = s * np.sqrt(me) * e3
    Wh[:, U_I, 1] = s * np.sqrt(mi) * e3

    fac = (1.0 / b + 1.0 / (b * b * nkz ** 2)) ** -0.5
    sgn = -1.0 if corrupt_w3_sign else 1.0
    Wh[:, U_E, 2] = (fac * se)[:, None] * e2
    Wh[:, U_I, 2] = -(fac * si)[:, None] * e2
    Wh[:, B_F, 2] = sgn * (-1j * fac / (b * nkz))[:, None] * e3
    Wh[:, U_E, 3] = (fac * se)[:, None] * e3
    Wh[:, U_I, 3] = -(fac * si)[:, None] * e3
    Wh[:, B_F, 3] = (1j * fac / (b * nkz))[:, None] * e2

    Wx[:, B_F, 0] = e1
    f6 = (nb * dpe + nb * dpi + nk ** 2 * dpe * dpi) ** -0.5
    Wx[:, 0, 1] = -f6 * np.sqrt(nb * dpi)
    Wx[:, 1, 1] = f6 * np.sqrt(nb * dpe)
    Wx[:, E_F, 1] = (1j * f6 * nk * np.sqrt(dpe * dpi))[:, None] * e1

    Wh[zero] = 0.0
    Wx[zero] = 0.0
    H0, X0 = _zero_mode_vectors(params)
    Wh[zero] = H0
    Wx[zero, :, :1] = X0

    dim_h = np.where(zero, 7, 4)
    dim_x = np.where(zero, 1, 2)
    return Wh, Wx, dim_h, dim_x


@dataclass(frozen=True, eq=False)
class ModeBasis:
    k: np.ndarray
    h_basis: np.ndarray       # (14, dim H_k)
    kernel_basis: np.ndarray  # (14, dim Ker L_k)
    eigvals: np.ndarray       # lambda, with L_k = -i V diag(lambda) V^H
    eigvecs: np.ndarray


def kernel_bases(mm: ModeMatrices, corrupt_w3_sign=False) -> ModeBasis:
    Wh, Wx, dh, dx = basis_arrays(mm.k[None], mm.params, corrupt_w3_sign)
    h = Wh[0, :, : dh[0]]
    ker = np.concatenate([h, Wx[0, :, : dx[0]]], axis=1)
    lam, V = np.linalg.eigh(1j * mm.L)
    return ModeBasis(mm.k, h, ker, lam, V)


def projector_Pe_k(basis: ModeBasis) -> np.ndarray:
    return basis.h_basis @ basis.h_basis.conj().T


def projector_P_k(basis: ModeBasis) -> np.ndarray:
    return basis.kernel_basis @ basis.kernel_basis.conj().T


# -- oracles ---------------------------------------------------------------

def nullspace_projector(A, rtol=RANK_RTOL):
    """Orthogonal projector onto the numerical nullspace of each A[m] (batched)."""
    A = np.asarray(A)
    single = A.ndim == 2
    if single:
        A = A[None]
    _, s, Vh = np.linalg.svd(A, full_matrices=True)
    ncol = A.shape[-1]
    sv = np.zeros(A.shape[:1] + (ncol,))
    sv[:, : s.shape[1]] = s
    null = sv <= rtol * sv[:, :1]
    N = Vh.conj().transpose(0, 2, 1) * null[:, None, :]
    P = N @ N.conj().transpose(0, 2, 1)
    return (P[0], int(null[0].sum())) if single else (P, null.sum(axis=1))


def oracle_Pe_k(mm: ModeMatrices):
    return nullspace_projector(np.vstack([mm.L, mm.G]))


def oracle_P_k(mm: ModeMatrices):
    return nullspace_projector(mm.L)


# -- cache over a grid -----------------------------------------------------

class ModeCache:
    """Projectors and eigendecompositions for every stored mode of a grid."""

    def __init__(self, grid: GridSpec, params: PlasmaParams):
        self.grid = grid
        self.params = params
        self.kv = grid.k.reshape(3, -1).T.copy()
        self.M = self.kv.shape[0]

    @cached_property
    def L(self):
        return build_L(self.kv, self.params)

    @cached_property
    def eigen(self):
        lam, V = np.linalg.eigh(1j * self.L)
        self.__dict__.pop("L", None)
        return np.ascontiguousarray(lam), np.ascontiguousarray(V)

    @cached_property
    def _bases(self):
        return basis_arrays(self.kv, self.params)

    @cached_property
    def Pe(self):
        Wh = self._bases[0]
        return np.ascontiguousarray(Wh @ Wh.conj().transpose(0, 2, 1))

    @cached_property
    def P(self):
        Wx = self._bases[1]
        return np.ascontiguousarray(self.Pe + Wx @ Wx.conj().transpose(0, 2, 1))

    def lam_max(self, mask=None) -> float:
        lam = self.eigen[0]
        if mask is not None:
            lam = lam[mask.reshape(-1)]
        return float(np.max(np.abs(lam)))

    def flat(self, data):
        return data.reshape(14, self.M)

    def unflat(self, x):
        return x.reshape((14,) + self.grid.spec_shape)


@lru_cache(maxsize=4)
def mode_cache(grid: GridSpec, params: PlasmaParams) -> ModeCache:
    return ModeCache(grid, params)


def _require_sym(state: FieldState14):
    if state.basis != "sym":
        raise ValueError("operation requires the symmetrised basis")


def apply_modal(state: FieldState14, mats) -> FieldState14:
    cache_shape = state.data.shape
    x = state.data.reshape(14, -1)
    return state.with_data(_kernels.batched_matvec(mats, x).reshape(cache_shape))


def apply_Pe(state: FieldState14, params: PlasmaParams, method="modal") -> FieldState14:
    _require_sym(state)
    if method == "modal":
        return apply_modal(state, mode_cache(state.grid, params).Pe)
    if method == "global":
        return apply_Pe_global(state, params)
    raise ValueError(f"unknown method {method!r}")


def apply_P(state: FieldState14, params: PlasmaParams) -> FieldState14:
    _require_sym(state)
    return apply_modal(state, mode_cache(state.grid, params).P)


def apply_Pe_global(state: FieldState14, params: PlasmaParams) -> FieldState14:
    """P_e through Leray, (1 - b Delta)^{-1} and curl multipliers."""
    _require_sym(state)
    g, d = state.grid, state.data
    me, mi, b = params.m_e, params.m_i, params.b
    se = np.sqrt(params.n_bar / me)
    si = np.sqrt(params.n_bar / mi)
    r = np.sqrt(params.dp_e / params.dp_i)
    c = params.c
    z = g.zero_mode
    out = np.zeros_like(d)
    out[0] = z * (c * r * d[0] + c * d[1])
    out[1] = z * (c * d[0] + c / r * d[1])
    ue, ui, B = d[U_E], d[U_I], d[B_F]
    Lm = g.leray(np.sqrt(me) * ue + np.sqrt(mi) * ui)
    J = si * ui - se * ue
    mag = g.helmholtz_inverse(b * g.curl(B) - b * b * g.laplacian(g.leray(J)), b)
    out[U_E] = np.sqrt(me) / (me + mi) * Lm - se * mag
    out[U_I] = np.sqrt(mi) / (me + mi) * Lm + si * mag
    out[B_F] = g.helmholtz_inverse(g.leray(B) + b * g.curl(J), b)
    return state.with_data(out)


def apply_Pe_simplified(state: FieldState14, params: PlasmaParams, tol=1e-10) -> FieldState14:
    """Shortcut valid only when the state already equals its P_e projection."""
    _require_sym(state)
    res = (state - apply_Pe(state, params)).norm()
    scale = max(state.norm(), 1e-300)
    if res > tol * scale:
        raise PreconditionError(f"state is not P_e-invariant (residual {res:.3e})", res)
    g, d = state.grid, state.data
    me, mi, b = params.m_e, params.m_i, params.b
    se = np.sqrt(params.n_bar / me)
    si = np.sqrt(params.n_bar / mi)
    out = np.zeros_like(d)
    out[0] = g.mean(d[0])
    out[1] = g.mean(d[1])
    Lm = g.leray(np.sqrt(me) * d[U_E] + np.sqrt(mi) * d[U_I])
    cB = g.curl(d[B_F])
    out[U_E] = np.sqrt(me) / (me + mi) * Lm - se * b * cB
    out[U_I] = np.sqrt(mi) / (me + mi) * Lm + si * b * cB
    out[B_F] = g.leray(d[B_F])
    return state.with_data(out)


def group_exp(tau: float, state: FieldState14, params: PlasmaParams) -> FieldState14:
    """S(tau) = exp(tau L) applied mode by mode."""
    _require_sym(state)
    if tau == 0:
        return state.copy()
    lam, V = mode_cache(state.grid, params).eigen
    x = state.data.reshape(14, -1)
    return state.with_data(_kernels.group_apply(V, lam, tau, x).reshape(state.data.shape))


def mean_value_exact(state: FieldState14, params: PlasmaParams) -> FieldState14:
    """Exact tau-average of S(tau) state, which is the kernel projection P."""
    return apply_P(state, params)


def mean_value_quadrature(state: FieldState14, params: PlasmaParams, T: float, n_nodes: int) -> FieldState14:
    """Trapezoidal (1/T) int_0^T S(tau) state dtau."""
    taus = np.linspace(0.0, T, n_nodes)
    w = np.full(n_nodes, taus[1] - taus[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    acc = np.zeros_like(state.data)
    for tau, wt in zip(taus, w):
        acc += wt * group_exp(tau, state, params).data
    return state.with_data(acc / T)
