"""Per-mode dense kernels.

Every Fourier mode carries a 14x14 complex matrix (projector or eigenvector
frame).  Applying those matrices to a state laid out as ``(14, n_modes)`` is the
hot loop of the filtered EMTF solver.  The compiled numba versions are used by
default; setting ``EMTF_DISABLE_NUMBA=1`` selects the pure numpy versions.
"""
import os

import numpy as np

_DISABLED = os.getenv("EMTF_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def batched_matvec_numpy(mats, x):
    """y[:, m] = mats[m] @ x[:, m]."""
    return np.einsum("mij,jm->im", mats, x, optimize=True)


def group_apply_numpy(vecs, lam, tau, x):
    """y[:, m] = V_m diag(exp(-i lam_m tau)) V_m^H x[:, m]."""
    c = np.einsum("mji,jm->im", vecs.conj(), x, optimize=True)
    c *= np.exp(-1j * tau * lam).T
    return np.einsum("mij,jm->im", vecs, c, optimize=True)


if HAVE_NUMBA:

    @njit(cache=True)
    def _batched_matvec_nb(mats, x):
        nm = mats.shape[0]
        d = mats.shape[1]
        y = np.zeros((d, nm), dtype=np.complex128)
        for m in range(nm):
            for i in range(d):
                acc = 0j
                for j in range(d):
                    acc += mats[m, i, j] * x[j, m]
                y[i, m] = acc
        return y

    @njit(cache=True)
    def _group_apply_nb(vecs, lam, tau, x):
        nm = vecs.shape[0]
        d = vecs.shape[1]
        y = np.zeros((d, nm), dtype=np.complex128)
        c = np.empty(d, dtype=np.complex128)
        for m in range(nm):
            for j in range(d):
                acc = 0j
                for i in range(d):
                    v = vecs[m, i, j]
                    acc += (v.real - 1j * v.imag) * x[i, m]
                ph = -tau * lam[m, j]
                c[j] = acc * (np.cos(ph) + 1j * np.sin(ph))
            for i in range(d):
                acc = 0j
                for j in range(d):
                    acc += vecs[m, i, j] * c[j]
                y[i, m] = acc
        return y

    def batched_matvec(mats, x):
        return _batched_matvec_nb(mats, np.ascontiguousarray(x, dtype=np.complex128))

    def group_apply(vecs, lam, tau, x):
        return _group_apply_nb(vecs, lam, float(tau), np.ascontiguousarray(x, dtype=np.complex128))

else:
    batched_matvec = batched_matvec_numpy
    group_apply = group_apply_numpy


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
