"""Real periodic fields on the cube [0, 2pi)^3 and constant-coefficient multipliers.

Spectral coefficients follow the normalisation ``u_hat[k] = sum(u * exp(-i k.x)) / N^3``
so that a constant field 1 has coefficient 1 at k = 0 and cos(x1) has 1/2 at
k = +-e1.  Only the half spectrum of ``numpy.fft.rfftn`` is stored, shape
``(n, n, n // 2 + 1)``.  Vector fields carry their component axis at position -4.

Nyquist convention: first-order operators (grad, div, curl) and everything built
on them use wavenumbers with the Nyquist entry set to zero, since i*k cannot be
represented on the unpaired Nyquist coefficient of a real field.  The Laplacian
uses the same wavenumbers so that curl curl = grad div - Laplacian holds exactly
on every stored mode.  Physical states are always dealiased, which removes the
Nyquist planes anyway.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    n: int
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"grid size must be an even integer >= 8, got {self.n}")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError(f"dealias_fraction must lie in (0, 1], got {self.dealias_fraction}")

    # -- lattice -----------------------------------------------------------
    @property
    def domain_length(self) -> float:
        return TWO_PI

    @property
    def phys_shape(self):
        return (self.n, self.n, self.n)

    @property
    def spec_shape(self):
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def n_modes(self) -> int:
        return self.n * self.n * (self.n // 2 + 1)

    @cached_property
    def k_int(self) -> np.ndarray:
        """Integer lattice wavenumbers, shape (3, n, n, n//2+1)."""
        n = self.n
        k1 = np.fft.fftfreq(n, 1.0 / n)
        k3 = np.fft.rfftfreq(n, 1.0 / n)
        kx, ky, kz = np.meshgrid(k1, k1, k3, indexing="ij")
        return np.stack([kx, ky, kz])

    @cached_property
    def k(self) -> np.ndarray:
        """Derivative wavenumbers (Nyquist entries set to zero)."""
        kd = self.k_int.copy()
        kd[np.abs(kd) == self.n // 2] = 0.0
        return kd

    @cached_property
    def k2(self) -> np.ndarray:
        return np.sum(self.k ** 2, axis=0)

    @cached_property
    def zero_mode(self) -> np.ndarray:
        """Modes on which every derivative vanishes (k = 0 and the pure Nyquist corners)."""
        return self.k2 == 0.0

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = self.dealias_fraction * self.n / 2.0
        return np.all(np.abs(self.k_int) <= cut + 1e-12, axis=0)

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each stored half-spectrum coefficient in the full spectrum."""
        w = np.full(self.spec_shape, 2.0)
        w[..., 0] = 1.0
        w[..., -1] = 1.0
        return w

    @cached_property
    def x(self) -> np.ndarray:
        """Physical coordinates, shape (3, n, n, n)."""
        s = np.arange(self.n) * (TWO_PI / self.n)
        return np.stack(np.meshgrid(s, s, s, indexing="ij"))

    # -- checks ------------------------------------------------------------
    def check_spectral(self, f):
        if f.shape[-3:] != self.spec_shape:
            raise GridMismatchError(f"spectral array shape {f.shape} does not match grid n={self.n}")

    def check_physical(self, f):
        if f.shape[-3:] != self.phys_shape:
            raise GridMismatchError(f"physical array shape {f.shape} does not match grid n={self.n}")

    # -- transforms --------------------------------------------------------
    def forward(self, f):
        f = np.asarray(f, dtype=float)
        self.check_physical(f)
        return np.fft.rfftn(f, axes=(-3, -2, -1)) / self.n ** 3

    def inverse(self, fh):
        self.check_spectral(fh)
        return np.fft.irfftn(fh * self.n ** 3, s=self.phys_shape, axes=(-3, -2, -1))

    # -- multipliers -------------------------------------------------------
    def grad(self, fh):
        self.check_spectral(fh)
        return 1j * self.k * fh[..., None, :, :, :]

    def div(self, vh):
        self.check_spectral(vh)
        return 1j * np.sum(self.k * vh, axis=-4)

    def curl(self, vh):
        self.check_spectral(vh)
        k = self.k
        v1, v2, v3 = vh[..., 0, :, :, :], vh[..., 1, :, :, :], vh[..., 2, :, :, :]
        return 1j * np.stack(
            [k[1] * v3 - k[2] * v2, k[2] * v1 - k[0] * v3, k[0] * v2 - k[1] * v1], axis=-4
        )

    def laplacian(self, fh):
        self.check_spectral(fh)
        return -self.k2 * fh

    def inv_laplacian(self, fh):
        """Delta^{-1}, defined as 0 on the zero mode."""
        self.check_spectral(fh)
        with np.errstate(divide="ignore", invalid="ignore"):
            m = np.where(self.zero_mode, 0.0, -1.0 / self.k2)
        return m * fh

    def leray(self, vh):
        """Projection onto divergence-free fields; identity on the zero mode."""
        self.check_spectral(vh)
        k = self.k
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(self.zero_mode, 0.0, 1.0 / self.k2)
        kv = np.sum(k * vh, axis=-4)
        return vh - k * (kv * inv)[..., None, :, :, :]

    def helmholtz_inverse(self, fh, b):
        """(Id - b Delta)^{-1}."""
        if b <= 0:
            raise ValueError(f"Helmholtz coefficient must be positive, got {b}")
        self.check_spectral(fh)
        return fh / (1.0 + b * self.k2)

    def helmholtz(self, fh, b):
        """(Id - b Delta)."""
        if b <= 0:
            raise ValueError(f"Helmholtz coefficient must be positive, got {b}")
        self.check_spectral(fh)
        return fh * (1.0 + b * self.k2)

    def helmholtz_ratio(self, fh, b):
        """b Delta (Id - b Delta)^{-1}."""
        if b <= 0:
            raise ValueError(f"Helmholtz coefficient must be positive, got {b}")
        self.check_spectral(fh)
        return fh * (-b * self.k2 / (1.0 + b * self.k2))

    def dealias(self, fh):
        self.check_spectral(fh)
        return fh * self.dealias_mask

    def mean(self, fh):
        """Keep only the zero-mode part (the spatial mean when derivatives vanish)."""
        return fh * self.zero_mode

    # -- products ----------------------------------------------------------
    def product(self, ah, bh):
        """Dealiased pointwise product of two spectral fields (same shape)."""
        return self.dealias(self.forward(self.inverse(ah) * self.inverse(bh)))

    # -- norms -------------------------------------------------------------
    def inner(self, ah, bh) -> float:
        """Real part of sum_k conj(a_k) b_k over the full spectrum and all components."""
        return float(np.sum(self.weights * np.real(np.conj(ah) * bh)))

    def norm(self, fh, sigma: float = 0.0) -> float:
        """Discrete H^sigma norm (sum_k (1+|k|^2)^sigma |f_k|^2)^{1/2}."""
        self.check_spectral(fh)
        w = self.weights if sigma == 0 else self.weights * (1.0 + self.k2) ** sigma
        return float(np.sqrt(np.sum(w * np.abs(fh) ** 2)))

    def integral_sq(self, fh) -> float:
        """Integral over the torus of |f|^2 (summed over components)."""
        return TWO_PI ** 3 * self.norm(fh) ** 2

    def physical_rms(self, f) -> float:
        """sqrt(mean(|f|^2)) over grid points, summed over components."""
        return float(np.sqrt(np.sum(f ** 2) / self.n ** 3))
