import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dendrite import Grid
from dendrite.spectral import GridMismatchError

from conftest import TWO_PI, smooth_random


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid((63, 64), (TWO_PI, TWO_PI))
    with pytest.raises(ValueError):
        Grid((2, 64), (TWO_PI, TWO_PI))
    with pytest.raises(ValueError):
        Grid((64, 64), (TWO_PI, -1.0))
    with pytest.raises(ValueError):
        Grid((64,), (TWO_PI,))


def test_layout_is_x_fastest():
    g = Grid((8, 6, 4), (1.0, 2.0, 3.0))
    assert g.shape == (4, 6, 8)
    assert g.mesh()[0][0, 0, 1] == pytest.approx(1.0 / 8)
    assert g.mesh()[1][0, 1, 0] == pytest.approx(2.0 / 6)


def test_wavenumbers_signed_frequencies():
    g = Grid((8, 8), (TWO_PI, 4 * math.pi))
    ky = np.ravel(g.k[1])
    assert list(ky) == pytest.approx([0, 0.5, 1, 1.5, -2, -1.5, -1, -0.5])


def test_gradient_of_sin(grid64):
    x = grid64.coords(0)
    f = np.broadcast_to(np.sin(x), grid64.shape)
    g = grid64.gradient(f)
    assert np.max(np.abs(g[0] - np.cos(x))) <= 1e-12
    assert np.max(np.abs(g[1])) <= 1e-12


def test_gradient_of_constant(grid64):
    g = grid64.gradient(np.full(grid64.shape, 3.5))
    assert np.max(np.abs(g)) == 0.0


def test_gradient_mixed_mode(grid64):
    x, y = grid64.coords(0), grid64.coords(1)
    dy = grid64.gradient(np.sin(2 * x) * np.cos(3 * y))[1]
    assert np.max(np.abs(dy + 3 * np.sin(2 * x) * np.sin(3 * y))) <= 1e-12


def test_divergence_examples(grid64):
    x, y = grid64.coords(0), grid64.coords(1)
    v = np.stack(np.broadcast_arrays(np.cos(x), 0 * y))
    assert np.max(np.abs(grid64.divergence(v) + np.sin(x))) <= 1e-12
    v = grid64.gradient(np.sin(x) * np.sin(y))
    assert np.max(np.abs(grid64.divergence(v) + 2 * np.sin(x) * np.sin(y))) <= 1e-12
    c = np.stack([np.full(grid64.shape, 1.3), np.full(grid64.shape, -0.4)])
    assert np.max(np.abs(grid64.divergence(c))) <= 1e-13


def test_divergence_grid_mismatch(grid64):
    with pytest.raises(GridMismatchError):
        grid64.divergence(np.zeros((3,) + grid64.shape))
    with pytest.raises(GridMismatchError):
        grid64.divergence(np.zeros((2, 32, 32)))


def test_laplacian_examples(grid64):
    x, y = grid64.coords(0), grid64.coords(1)
    f = np.broadcast_to(np.sin(x), grid64.shape)
    assert np.max(np.abs(grid64.laplacian(f) + f)) <= 1e-12
    assert np.max(np.abs(grid64.laplacian(np.full(grid64.shape, 2.0)))) == 0.0
    f = np.sin(2 * x) * np.cos(y)
    assert np.max(np.abs(grid64.laplacian(f) + 5 * f)) <= 1e-11


def test_helmholtz_examples(grid64, rng):
    x, y = grid64.coords(0), grid64.coords(1)
    rhs = np.broadcast_to(np.sin(x), grid64.shape)
    assert np.max(np.abs(grid64.solve_helmholtz(2, 3, rhs) - rhs / 5)) <= 1e-14
    r = rng.normal(size=grid64.shape)
    assert np.max(np.abs(grid64.solve_helmholtz(1, 0, r) - r)) <= 1e-14
    rhs = np.sin(x) + np.sin(2 * y)
    expected = np.sin(x) / 2 + np.sin(2 * y) / 5
    assert np.max(np.abs(grid64.solve_helmholtz(1, 1, rhs) - expected)) <= 1e-14


def test_helmholtz_residual(grid64, rng):
    rhs = smooth_random(grid64, rng, modes=8)
    f = grid64.solve_helmholtz(0.7, 2.5, rhs)
    res = 0.7 * f - 2.5 * grid64.laplacian(f) - rhs
    assert np.linalg.norm(res) <= 1e-11 * np.linalg.norm(rhs)


@pytest.mark.parametrize("a,b", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.5)])
def test_helmholtz_rejects_bad_coefficients(grid64, a, b):
    with pytest.raises(ValueError):
        grid64.solve_helmholtz(a, b, np.zeros(grid64.shape))


def test_round_trip_and_parseval(grid64, rng):
    f = rng.normal(size=grid64.shape)
    back = grid64.ifft(grid64.fft(f))
    assert np.linalg.norm(back - f) <= 1e-13 * np.linalg.norm(f)
    fh = np.fft.fftn(f)
    spectral = np.sum(np.abs(fh) ** 2) / f.size * grid64.volume / f.size
    assert grid64.inner(f, f) == pytest.approx(spectral, rel=1e-11)


def test_gradient_divergence_adjoint(grid64, rng):
    v = np.stack([rng.normal(size=grid64.shape), rng.normal(size=grid64.shape)])
    w = rng.normal(size=grid64.shape)
    lhs = grid64.inner(grid64.divergence(v), w)
    grad = grid64.gradient(w)
    rhs = -sum(grid64.inner(v[a], grad[a]) for a in range(2))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_operators_commute_with_transpose(grid64, rng):
    f = rng.normal(size=grid64.shape)

    def close(a, b):
        return np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(b))

    assert close(grid64.laplacian(f.T), grid64.laplacian(f).T)
    g, gt = grid64.gradient(f), grid64.gradient(f.T)
    assert close(gt[0], g[1].T) and close(gt[1], g[0].T)
    v = np.stack([f, rng.normal(size=f.shape)])
    vt = np.stack([v[1].T, v[0].T])
    assert close(grid64.divergence(vt), grid64.divergence(v).T)


def test_even_extension_round_trip(noflux_grid, rng):
    f = rng.normal(size=noflux_grid.shape)
    ext = noflux_grid.even_extend(f, 1)
    assert ext.shape == (2 * 24 - 2, 32)
    assert np.array_equal(noflux_grid.restrict(ext, 1), f)
    c = noflux_grid.even_extend(np.full(noflux_grid.shape, 0.25), 1)
    assert np.all(c == 0.25)


def test_even_extension_rejects_periodic_axis(noflux_grid):
    with pytest.raises(ValueError):
        noflux_grid.even_extend(np.zeros(noflux_grid.shape), 0)
    with pytest.raises(ValueError):
        noflux_grid.restrict(np.zeros(noflux_grid.shape), 0)


def test_noflux_cosine_laplacian(noflux_grid):
    L = noflux_grid.length[1]
    y = noflux_grid.coords(1)
    f = np.broadcast_to(np.cos(math.pi * y / L), noflux_grid.shape)
    ext = noflux_grid.even_extend(f, 1)
    ye = np.arange(ext.shape[0]) * noflux_grid.spacing(1)
    assert np.max(np.abs(ext[:, 0] - np.cos(math.pi * ye / L))) <= 1e-13
    assert np.max(np.abs(noflux_grid.laplacian(f) + (math.pi / L) ** 2 * f)) <= 1e-12


def test_noflux_normal_derivative_vanishes(noflux_grid, rng):
    f = smooth_random(noflux_grid, rng)
    dy = noflux_grid.gradient(f)[1]
    assert np.max(np.abs(dy[0])) <= 1e-10
    assert np.max(np.abs(dy[-1])) <= 1e-10


def test_noflux_trapezoid_volume(noflux_grid):
    assert noflux_grid.integrate(np.ones(noflux_grid.shape)) == pytest.approx(noflux_grid.volume)


def test_dealias_mask_removes_high_modes():
    g = Grid((32, 32), (TWO_PI, TWO_PI), dealias=True)
    x = g.coords(0)
    flux = np.stack(np.broadcast_arrays(np.sin(14 * x), 0 * g.coords(1)))
    assert np.max(np.abs(g.divergence(flux))) <= 1e-12
    assert np.max(np.abs(g.divergence(flux, dealias=False))) > 1


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5).map(lambda k: 2 * k), st.integers(2, 5).map(lambda k: 2 * k),
       st.floats(0.5, 20.0), st.integers(0, 2**32 - 1))
def test_property_round_trip(nx, ny, lx, seed):
    g = Grid((nx, ny), (lx, 1.0))
    f = np.random.default_rng(seed).normal(size=g.shape)
    assert np.allclose(g.ifft(g.fft(f)), f, rtol=0, atol=1e-13 * max(1.0, np.abs(f).max()))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["periodic", "noflux"]))
def test_property_laplacian_negative_semidefinite(seed, bc):
    g = Grid((16, 12), (TWO_PI, 3.0), ("periodic", bc))
    f = np.random.default_rng(seed).normal(size=g.shape)
    assert g.h1_seminorm2(f) >= -1e-12 * g.inner(f, f)
