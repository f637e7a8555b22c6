import numpy as np
import pytest

from emtf.spectral import TWO_PI, GridMismatchError, GridSpec


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(15)
    with pytest.raises(ValueError):
        GridSpec(6)
    with pytest.raises(ValueError):
        GridSpec(16, dealias_fraction=0.0)


def test_normalisation(grid8):
    g = grid8
    x1 = g.x[0]
    assert np.isclose(g.forward(np.ones(g.phys_shape))[0, 0, 0], 1.0)
    c = g.forward(np.cos(x1))
    assert np.isclose(c[1, 0, 0], 0.5) and np.isclose(c[-1, 0, 0], 0.5)


def test_roundtrip(grid16, rng):
    f = rng.standard_normal((3,) + grid16.phys_shape)
    assert np.allclose(grid16.inverse(grid16.forward(f)), f, atol=1e-13)


def test_shape_mismatch(grid16):
    with pytest.raises(GridMismatchError):
        grid16.inverse(np.zeros((8, 8, 5)))
    with pytest.raises(GridMismatchError):
        grid16.forward(np.zeros((8, 8, 8)))


def test_derivatives_of_trig(grid16):
    g = grid16
    x, y, z = g.x
    f = np.sin(2 * x) * np.cos(y) + np.cos(3 * z)
    gr = g.inverse(g.grad(g.forward(f)))
    assert np.allclose(gr[0], 2 * np.cos(2 * x) * np.cos(y), atol=1e-12)
    assert np.allclose(gr[1], -np.sin(2 * x) * np.sin(y), atol=1e-12)
    assert np.allclose(gr[2], -3 * np.sin(3 * z), atol=1e-12)
    lap = g.inverse(g.laplacian(g.forward(f)))
    assert np.allclose(lap, -5 * np.sin(2 * x) * np.cos(y) - 9 * np.cos(3 * z), atol=1e-11)


def test_vector_identities(grid16, rng):
    g = grid16
    v = g.dealias(g.forward(rng.standard_normal((3,) + g.phys_shape)))
    assert g.norm(g.div(g.curl(v))) < 1e-12
    assert g.norm(g.curl(g.grad(v[0]))) < 1e-12
    lhs = g.curl(g.curl(v))
    rhs = g.grad(g.div(v)) - g.laplacian(v)
    assert g.norm(lhs - rhs) < 1e-11
    w = g.leray(v)
    assert g.norm(g.div(w)) < 1e-12
    assert g.norm(g.leray(w) - w) < 1e-14


def test_leray_identity_on_zero_mode(grid8):
    g = grid8
    v = np.zeros((3,) + g.spec_shape, dtype=complex)
    v[:, 0, 0, 0] = [1.0, 2.0, 3.0]
    assert np.allclose(g.leray(v), v)


def test_helmholtz_multipliers(grid16, rng):
    g = grid16
    f = g.forward(rng.standard_normal(g.phys_shape))
    b = 0.3
    assert g.norm(g.helmholtz_inverse(g.helmholtz(f, b), b) - f) < 1e-13
    # b Delta (1 - b Delta)^-1 = (1 - b Delta)^-1 - Id
    assert g.norm(g.helmholtz_ratio(f, b) - (g.helmholtz_inverse(f, b) - f)) < 1e-13
    with pytest.raises(ValueError):
        g.helmholtz(f, 0.0)


def test_inv_laplacian(grid16, rng):
    g = grid16
    f = g.forward(rng.standard_normal(g.phys_shape))
    f = f - g.mean(f)
    assert g.norm(g.laplacian(g.inv_laplacian(f)) - f) < 1e-12
    assert g.inv_laplacian(np.ones(g.spec_shape))[0, 0, 0] == 0


def test_parseval(grid16, rng):
    g = grid16
    f = rng.standard_normal((2,) + g.phys_shape)
    fh = g.forward(f)
    assert np.isclose(g.integral_sq(fh), TWO_PI ** 3 * np.mean(np.sum(f ** 2, axis=0)), rtol=1e-12)
    assert np.isclose(g.physical_rms(f), g.norm(fh), rtol=1e-12)


def test_sobolev_norm_single_mode(grid8):
    g = grid8
    fh = g.forward(np.cos(g.x[0] + g.x[1]))
    # two coefficients 1/2 with |k|^2 = 2
    assert np.isclose(g.norm(fh, 1.0), np.sqrt(2 * 0.25 * 3.0))
    assert g.norm(fh, 1.0) > g.norm(fh)


def test_dealias_mask(grid16):
    g = grid16
    m = g.dealias_mask
    assert m[5, 0, 0] and not m[6, 0, 0] and not m[0, 0, 8]


def test_product_is_dealiased(grid16):
    g = grid16
    a = g.forward(np.cos(4 * g.x[0]))
    p = g.product(a, a)              # cos^2 = (1 + cos 8x)/2 ; the 8 mode is cut
    assert np.isclose(p[0, 0, 0], 0.5) and abs(p[8, 0, 0]) == 0
