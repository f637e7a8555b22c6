import numpy as np
import pytest

from emtf import _kernels, modes
from emtf.harness.verify import k_set_state, random_state
from emtf.modes import (PreconditionError, apply_P, apply_Pe, apply_Pe_global, apply_Pe_simplified, build_L,
                        build_mode_matrices, frame, group_exp, kernel_bases, mean_value_quadrature, oracle_P_k,
                        oracle_Pe_k, projector_P_k, projector_Pe_k)
from emtf.plasma import PlasmaParams, PressureLaw

KS = [(0, 0, 0), (1, 2, 3), (0, 0, 2), (-3, 1, 0), (5, -8, 7), (0, 0, -1)]


def hand_C1_D(p):
    """C_1 and D written out entry by entry from the block display."""
    C = np.zeros((14, 14))
    C[0, 2] = C[2, 0] = -p.a_e
    C[1, 5] = C[5, 1] = -p.a_i
    # R_1 = (0 | e3 | -e2): columns
    R1 = np.zeros((3, 3))
    R1[2, 1] = 1.0
    R1[1, 2] = -1.0
    C[8:11, 11:14] = -R1.T
    C[11:14, 8:11] = -R1
    D = np.zeros((14, 14))
    s = np.sqrt(p.n_bar)
    D[2:5, 8:11] = -s / np.sqrt(p.m_e) * np.eye(3)
    D[5:8, 8:11] = s / np.sqrt(p.m_i) * np.eye(3)
    D[8:11, 2:5] = s / np.sqrt(p.m_e) * np.eye(3)
    D[8:11, 5:8] = -s / np.sqrt(p.m_i) * np.eye(3)
    return C, D


def test_L_matches_hand_built_C1(params):
    C1, D = hand_C1_D(params)
    for k1 in (1.0, -2.0):
        L = build_L(np.array([[k1, 0, 0]]), params)[0]
        assert np.allclose(L, 1j * k1 * C1 + D, atol=1e-15)


@pytest.mark.parametrize("k", KS)
def test_explicit_projectors_match_svd_oracle(k, params):
    mm = build_mode_matrices(k, params)
    b = kernel_bases(mm)
    Pe_or, dim_e = oracle_Pe_k(mm)
    P_or, dim_p = oracle_P_k(mm)
    assert np.linalg.norm(projector_Pe_k(b) - Pe_or, 2) < 1e-12
    assert np.linalg.norm(projector_P_k(b) - P_or, 2) < 1e-12
    expected = (8, 7) if not any(k) else (6, 4)
    assert (dim_p, dim_e) == expected
    assert (b.kernel_basis.shape[1], b.h_basis.shape[1]) == expected
    assert np.allclose(mm.L @ b.kernel_basis, 0, atol=1e-13)
    assert np.allclose(mm.G @ b.h_basis, 0, atol=1e-13)


def test_L_skew_hermitian_and_spectrum(params):
    mm = build_mode_matrices((2, -1, 1), params)
    assert np.allclose(mm.L, -mm.L.conj().T)
    b = kernel_bases(mm)
    assert np.allclose(b.eigvecs @ np.diag(b.eigvals) @ b.eigvecs.conj().T, 1j * mm.L, atol=1e-13)
    assert np.all(np.isreal(b.eigvals))


def test_frame_right_handed():
    kv = np.array([[1.0, 2, 3], [0, 0, 5], [-1, 0, 0], [0, 0, 0]])
    e1, e2, e3 = frame(kv)
    for i in range(3):
        M = np.stack([e1[i], e2[i], e3[i]])
        assert np.allclose(M @ M.T, np.eye(3))
        assert np.isclose(np.linalg.det(M), 1.0)
    assert not e1[3].any()


def test_corrupted_basis_keeps_orthonormality(params):
    mm = build_mode_matrices((1, 2, 2), params)
    b = kernel_bases(mm, corrupt_w3_sign=True)
    W = b.kernel_basis
    assert np.allclose(W.conj().T @ W, np.eye(W.shape[1]), atol=1e-13)
    assert np.abs(mm.L @ W).max() > 1e-3


def test_apply_Pe_dual_path_and_algebra(grid16, params, rng):
    s = random_state(grid16, rng)
    a = apply_Pe(s, params)
    assert (a - apply_Pe_global(s, params)).norm() < 1e-12 * a.norm()
    assert (apply_Pe(a, params) - a).norm() < 1e-12 * a.norm()
    assert (apply_P(a, params) - a).norm() < 1e-12 * a.norm()
    t = random_state(grid16, rng)
    # self-adjoint: <P_e s, t> = <s, P_e t>
    assert np.isclose(grid16.inner(a.data, t.data), grid16.inner(s.data, apply_Pe(t, params).data), rtol=1e-12)
    with pytest.raises(ValueError):
        apply_Pe(s, params, method="bogus")


def test_simplified_Pe(grid16, params, rng):
    s = random_state(grid16, rng)
    a = apply_Pe(s, params)
    assert (apply_Pe_simplified(a, params) - a).norm() < 1e-12 * a.norm()
    with pytest.raises(PreconditionError) as err:
        apply_Pe_simplified(s, params)
    assert err.value.residual > 0


def test_projectors_coincide_on_K(grid16, params, rng):
    k = k_set_state(grid16, rng)
    assert (apply_P(k, params) - apply_Pe(k, params)).norm() < 1e-12 * k.norm()


def test_group_unitary_and_law(grid16, params, rng):
    s = random_state(grid16, rng)
    a = group_exp(0.7, s, params)
    assert np.isclose(a.norm(), s.norm(), rtol=1e-13)
    assert (group_exp(-0.7, a, params) - s).norm() < 1e-13 * s.norm()
    b = group_exp(0.4, group_exp(0.3, s, params), params)
    assert (b - a).norm() < 1e-13 * s.norm()
    k = apply_P(s, params)
    assert (group_exp(5.0, k, params) - k).norm() < 1e-12 * k.norm()


def test_group_generator(grid8, params, rng):
    """d/dtau S(tau) U at 0 equals L U."""
    s = random_state(grid8, rng)
    h = 1e-5
    fd = (group_exp(h, s, params) - group_exp(-h, s, params)) * (0.5 / h)
    L = modes.build_L(modes.mode_cache(grid8, params).kv, params)
    LU = np.einsum("mij,jm->im", L, s.data.reshape(14, -1)).reshape(s.data.shape)
    assert grid8.norm(fd.data - LU) < 1e-8 * grid8.norm(LU)


def test_mean_value_quadrature_approaches_P(grid8, params, rng):
    s = random_state(grid8, rng)
    target = apply_P(s, params)
    e1 = (mean_value_quadrature(s, params, 50.0, 2001) - target).norm()
    e2 = (mean_value_quadrature(s, params, 200.0, 8001) - target).norm()
    assert e2 < e1 < 0.2 * s.norm()


def test_other_pressure_laws_still_match_oracle():
    p = PlasmaParams(m_e=0.05, m_i=2.0, n_bar=1.7, pressure_e=PressureLaw(0.3, 5 / 3), pressure_i=PressureLaw(1.1, 1.0))
    for k in KS:
        mm = build_mode_matrices(k, p)
        b = kernel_bases(mm)
        assert np.linalg.norm(projector_Pe_k(b) - oracle_Pe_k(mm)[0], 2) < 1e-12


def test_kernels_numpy_fallback_agrees(rng):
    M = 50
    A = rng.standard_normal((M, 14, 14)) + 1j * rng.standard_normal((M, 14, 14))
    x = rng.standard_normal((14, M)) + 1j * rng.standard_normal((14, M))
    assert np.allclose(_kernels.batched_matvec(A, x), _kernels.batched_matvec_numpy(A, x))
    H = A + A.conj().transpose(0, 2, 1)
    lam, V = np.linalg.eigh(H)
    assert np.allclose(_kernels.group_apply(V, lam, 0.3, x), _kernels.group_apply_numpy(V, lam, 0.3, x))
    assert _kernels.backend() in ("numba", "numpy")
