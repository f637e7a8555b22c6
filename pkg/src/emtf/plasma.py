"""Plasma parameters, gamma-law closures and the symmetrised 14-component state."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .spectral import GridSpec

VACUUM_FRACTION = 1e-6

RHO_E, RHO_I = 0, 1
U_E, U_I, E_F, B_F = slice(2, 5), slice(5, 8), slice(8, 11), slice(11, 14)

COMPONENTS = {
    "sym": ["rho_e", "rho_i", "u_e_1", "u_e_2", "u_e_3", "u_i_1", "u_i_2", "u_i_3",
            "E_1", "E_2", "E_3", "B_1", "B_2", "B_3"],
    "U": ["q_e", "q_i", "v_e_1", "v_e_2", "v_e_3", "v_i_1", "v_i_2", "v_i_3",
          "E_1", "E_2", "E_3", "B_1", "B_2", "B_3"],
}


class VacuumError(RuntimeError):
    """A density evaluation fell below the vacuum guard n_bar * 1e-6."""


class BasisMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class PressureLaw:
    """p(n) = K n^gamma."""
    K: float = 1.0
    gamma: float = 2.0

    def __post_init__(self):
        if self.K <= 0:
            raise ValueError("pressure coefficient K must be positive")
        if self.gamma < 1:
            raise ValueError("pressure exponent gamma must be >= 1")

    def p(self, n):
        return self.K * np.asarray(n, dtype=float) ** self.gamma

    def dp(self, n):
        return self.K * self.gamma * np.asarray(n, dtype=float) ** (self.gamma - 1.0)


@dataclass(frozen=True)
class Species:
    """Density change of variables q = g(n) for one fluid.

    g'(n) = sqrt(p'(n)/m)/n, g(n_bar) = 0, and a(q) = sqrt(p'(g^{-1}(q))/m).
    """
    law: PressureLaw
    m: float
    n_bar: float

    @property
    def _c(self):
        return np.sqrt(self.law.K * self.law.gamma / self.m)

    @property
    def _beta(self):
        return 0.5 * (self.law.gamma - 1.0)

    @property
    def a_bar(self) -> float:
        return float(np.sqrt(self.law.dp(self.n_bar) / self.m))

    def _guard(self, n):
        if np.any(np.asarray(n) <= VACUUM_FRACTION * self.n_bar):
            raise VacuumError(f"density fell to {np.min(n):.3e} (vacuum guard {VACUUM_FRACTION * self.n_bar:.1e})")

    def g(self, n):
        n = np.asarray(n, dtype=float)
        if np.any(n <= 0):
            raise ValueError("g requires positive densities")
        b = self._beta
        if b == 0:
            return self._c * np.log(n / self.n_bar)
        return self._c / b * (n ** b - self.n_bar ** b)

    def g_inv(self, q):
        q = np.asarray(q, dtype=float)
        b = self._beta
        if b == 0:
            n = self.n_bar * np.exp(q / self._c)
        else:
            base = self.n_bar ** b + b * q / self._c
            if np.any(base <= 0):
                raise VacuumError("g_inv argument outside the range of g")
            n = base ** (1.0 / b)
        self._guard(n)
        return n

    def a(self, q):
        q = np.asarray(q, dtype=float)
        return self.a_bar + self._beta * q

    def dginv0(self) -> float:
        """(g^{-1})'(0) = 1 / g'(n_bar)."""
        return float(self.n_bar ** (1.0 - self._beta) / self._c)

    def R_a(self, eps, q):
        """(a(eps q) - a(0)) / eps; exact for the affine gamma-law a."""
        return self._beta * np.asarray(q, dtype=float)

    def R_ginv(self, eps, q):
        """(g^{-1}(eps q) - n_bar) / eps, with limit (g^{-1})'(0) q at eps = 0."""
        q = np.asarray(q, dtype=float)
        if eps == 0:
            return self.dginv0() * q
        b = self._beta
        if b == 0:
            z = eps * q / self._c
            out = self.n_bar * np.expm1(z) / eps
        else:
            z = eps * q * b / (self._c * self.n_bar ** b)
            if np.any(z <= -1):
                raise VacuumError("density remainder evaluated past vacuum")
            out = self.n_bar * np.expm1(np.log1p(z) / b) / eps
        self._guard(self.n_bar + eps * out)
        return out


def remainder_R(h, eps, q, dh0):
    """Generic difference quotient (h(eps q) - h(0)) / eps with limit dh0 * q."""
    q = np.asarray(q, dtype=float)
    if eps == 0:
        return dh0 * q
    return (h(eps * q) - h(0.0)) / eps


@dataclass(frozen=True)
class PlasmaParams:
    m_e: float = 0.1
    m_i: float = 1.0
    n_bar: float = 1.0
    pressure_e: PressureLaw = field(default_factory=lambda: PressureLaw(0.05, 2.0))
    pressure_i: PressureLaw = field(default_factory=lambda: PressureLaw(0.5, 2.0))

    Z = 1

    def __post_init__(self):
        if self.m_e <= 0 or self.m_i <= 0:
            raise ValueError("masses must be positive")
        if self.n_bar <= 0:
            raise ValueError("background density n_bar must be positive")

    @property
    def electron(self) -> Species:
        return Species(self.pressure_e, self.m_e, self.n_bar)

    @property
    def ion(self) -> Species:
        return Species(self.pressure_i, self.m_i, self.n_bar)

    @property
    def dp_e(self) -> float:
        return float(self.pressure_e.dp(self.n_bar))

    @property
    def dp_i(self) -> float:
        return float(self.pressure_i.dp(self.n_bar))

    @property
    def delta(self) -> float:
        return self.Z * self.m_e / self.m_i

    @property
    def rho(self) -> float:
        return self.n_bar * (self.m_e + self.m_i)

    @property
    def d_e(self) -> float:
        return np.sqrt(self.delta) * self.m_i / self.Z

    @property
    def d_i(self) -> float:
        return (1.0 - self.delta) * self.m_i / self.Z

    @property
    def b(self) -> float:
        return 1.0 / (self.n_bar / self.m_e + self.n_bar / self.m_i)

    @property
    def c(self) -> float:
        r = np.sqrt(self.dp_e / self.dp_i)
        return 1.0 / (r + 1.0 / r)

    @property
    def a_e(self) -> float:
        return self.electron.a_bar

    @property
    def a_i(self) -> float:
        return self.ion.a_bar

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PlasmaParams":
        d = dict(d)
        for key in ("pressure_e", "pressure_i"):
            if key in d and isinstance(d[key], dict):
                d[key] = PressureLaw(**d[key])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def derived_constants(params: PlasmaParams) -> dict:
    out = {
        "delta": params.delta,
        "rho": params.rho,
        "d_e": params.d_e,
        "d_i": params.d_i,
        "b": params.b,
        "c": params.c,
        "a_e": params.a_e,
        "a_i": params.a_i,
    }
    ref = params.d_e ** 2 / params.rho
    assert abs(out["b"] - ref) <= 1e-14 * abs(ref), "b = d_e^2 / rho violated"
    return out


def sym_scales(params: PlasmaParams) -> np.ndarray:
    """Diagonal of A_0^{1/2}."""
    se = np.sqrt(params.n_bar * params.m_e)
    si = np.sqrt(params.n_bar * params.m_i)
    return np.array([se, si, se, se, se, si, si, si] + [1.0] * 6)


@dataclass(frozen=True, eq=False)
class FieldState14:
    """14 spectral component fields with a basis tag ("U" or "sym")."""
    data: np.ndarray
    grid: GridSpec
    basis: str = "sym"

    def __post_init__(self):
        if self.basis not in COMPONENTS:
            raise ValueError(f"unknown basis {self.basis!r}")
        if self.data.shape != (14,) + self.grid.spec_shape:
            raise ValueError(f"state data shape {self.data.shape} inconsistent with grid n={self.grid.n}")

    @classmethod
    def zeros(cls, grid, basis="sym"):
        return cls(np.zeros((14,) + grid.spec_shape, dtype=complex), grid, basis)

    def _check(self, other):
        if not isinstance(other, FieldState14):
            return
        if other.basis != self.basis:
            raise BasisMismatchError(f"cannot combine basis {self.basis} with {other.basis}")
        if other.grid != self.grid:
            raise ValueError("states live on different grids")

    def __add__(self, other):
        self._check(other)
        return self.with_data(self.data + other.data)

    def __sub__(self, other):
        self._check(other)
        return self.with_data(self.data - other.data)

    def __mul__(self, s):
        return self.with_data(self.data * s)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_data(-self.data)

    def with_data(self, data):
        return FieldState14(data, self.grid, self.basis)

    def copy(self):
        return self.with_data(self.data.copy())

    @property
    def component_names(self):
        return COMPONENTS[self.basis]

    # component views
    rho_e = property(lambda s: s.data[RHO_E])
    rho_i = property(lambda s: s.data[RHO_I])
    u_e = property(lambda s: s.data[U_E])
    u_i = property(lambda s: s.data[U_I])
    E = property(lambda s: s.data[E_F])
    B = property(lambda s: s.data[B_F])

    def norm(self, sigma=0.0) -> float:
        return self.grid.norm(self.data, sigma)

    def physical(self) -> np.ndarray:
        return self.grid.inverse(self.data)


def symmetrize(state: FieldState14, params: PlasmaParams) -> FieldState14:
    if state.basis != "U":
        raise BasisMismatchError("symmetrize expects a state in the U basis")
    s = sym_scales(params)[:, None, None, None]
    return FieldState14(state.data * s, state.grid, "sym")


def desymmetrize(state: FieldState14, params: PlasmaParams) -> FieldState14:
    if state.basis != "sym":
        raise BasisMismatchError("desymmetrize expects a state in the symmetrised basis")
    s = sym_scales(params)[:, None, None, None]
    return FieldState14(state.data / s, state.grid, "U")
