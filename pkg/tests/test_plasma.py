import math

import numpy as np
import pytest

from emtf.plasma import (BasisMismatchError, FieldState14, PlasmaParams, PressureLaw, Species, VacuumError,
                         derived_constants, desymmetrize, remainder_R, symmetrize)


def test_pressure_law_validation():
    with pytest.raises(ValueError):
        PressureLaw(K=0.0)
    with pytest.raises(ValueError):
        PressureLaw(gamma=0.5)


def test_defaults_give_unit_sound_speeds(params):
    assert math.isclose(params.a_e, 1.0) and math.isclose(params.a_i, 1.0)


def test_derived_constants(params):
    d = derived_constants(params)
    assert math.isclose(d["b"], params.d_e ** 2 / params.rho)
    assert math.isclose(d["delta"], 0.1)
    assert math.isclose(d["d_i"], 0.9)


def test_equal_masses_degenerate_hall():
    p = PlasmaParams(m_e=1.0, m_i=1.0)
    assert p.d_i == 0.0 and p.delta == 1.0
    derived_constants(p)


@pytest.mark.parametrize("gamma", [1.0, 5.0 / 3.0, 2.0])
def test_g_and_inverse(gamma):
    sp = Species(PressureLaw(0.7, gamma), 0.3, 1.2)
    n = np.linspace(0.5, 2.0, 7)
    q = sp.g(n)
    assert np.allclose(sp.g_inv(q), n, rtol=1e-13)
    assert sp.g(sp.n_bar) == 0
    # g'(n) = sqrt(p'(n)/m) / n
    h = 1e-6
    dg = (sp.g(n + h) - sp.g(n - h)) / (2 * h)
    assert np.allclose(dg, np.sqrt(sp.law.dp(n) / sp.m) / n, rtol=1e-8)


@pytest.mark.parametrize("gamma", [1.0, 2.0, 3.0])
def test_sound_speed_composition(gamma):
    sp = Species(PressureLaw(0.4, gamma), 0.5, 1.0)
    q = np.linspace(-0.3, 0.3, 5)
    assert np.allclose(sp.a(q), np.sqrt(sp.law.dp(sp.g_inv(q)) / sp.m), rtol=1e-12)


@pytest.mark.parametrize("gamma", [1.0, 2.0])
def test_remainders_match_difference_quotient(gamma):
    sp = Species(PressureLaw(0.4, gamma), 0.5, 1.0)
    q = np.linspace(-1.0, 1.0, 9)
    for eps in (0.3, 0.01):
        ref = remainder_R(sp.g_inv, eps, q, sp.dginv0())
        assert np.allclose(sp.R_ginv(eps, q), ref, rtol=1e-9, atol=1e-12)
        assert np.allclose(sp.R_a(eps, q), (sp.a(eps * q) - sp.a(0.0)) / eps, rtol=1e-10)
    assert np.allclose(sp.R_ginv(0.0, q), sp.dginv0() * q)
    assert np.allclose(sp.R_ginv(1e-9, q), sp.dginv0() * q, rtol=1e-7)


def test_vacuum_guard():
    sp = Species(PressureLaw(1.0, 2.0), 1.0, 1.0)
    with pytest.raises(VacuumError):
        sp.g_inv(sp.g(1e-8))
    with pytest.raises(VacuumError):
        sp.R_ginv(1.0, np.array([-1e6]))


def test_symmetrize_roundtrip(grid8, params, rng):
    d = rng.standard_normal((14,) + grid8.spec_shape) + 0j
    U = FieldState14(d, grid8, "U")
    S = symmetrize(U, params)
    assert S.basis == "sym"
    assert np.allclose(desymmetrize(S, params).data, d)
    assert math.isclose(S.data[2, 1, 1, 1].real, math.sqrt(params.n_bar * params.m_e) * d[2, 1, 1, 1].real)
    with pytest.raises(BasisMismatchError):
        symmetrize(S, params)
    with pytest.raises(BasisMismatchError):
        S + U


def test_state_shape_check(grid8, grid16):
    with pytest.raises(ValueError):
        FieldState14(np.zeros((14,) + grid16.spec_shape, dtype=complex), grid8)
    z = FieldState14.zeros(grid8)
    assert z.norm() == 0 and z.component_names[0] == "rho_e"


def test_params_roundtrip(params):
    p2 = PlasmaParams.from_dict(params.to_dict())
    assert p2 == params and p2.digest() == params.digest()
    with pytest.raises(ValueError):
        PlasmaParams(m_e=-1.0)
