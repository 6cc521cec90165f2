import math
import warnings

import numpy as np
import pytest

from dendrite import Grid, Params, SchemeKind, State
from dendrite.model import energy_modified, latent_derivative, z_of
from dendrite.schemes import (
    DivergenceError, SolverError, _CoupledSystem, _solve_coupled, apply_coupled_operator, extrapolate,
    scheme_params, startup, step, step_scheme1, step_scheme2,
)

from conftest import TWO_PI, smooth_random, tanh_circle


def test_scheme_kind_flags():
    assert SchemeKind("sieq").quadratized and SchemeKind("sieq").stabilized
    assert not SchemeKind.LS.quadratized and not SchemeKind.LS.stabilized
    assert SchemeKind.IEQ.quadratized and not SchemeKind.IEQ.stabilized


def test_scheme_params_drop_stabilizers():
    p = Params(s1=4, s2=4)
    for kind in ("ls", "ieq"):
        q = scheme_params(kind, p)
        assert q.s1 == 0 and q.s2 == 0
    assert scheme_params("sls", p) is p


def test_stabilized_kind_without_stabilizers_warns():
    with pytest.warns(UserWarning):
        scheme_params("sieq", Params(s1=0, s2=0))


def _constant_state(grid, phi, phi_prev, u=0.0):
    c = np.full(grid.shape, float(phi))
    cp = np.full(grid.shape, float(phi_prev))
    z = np.full(grid.shape, float(u))
    return State(c, cp, z, z.copy())


def test_extrapolate_examples(grid64):
    s = _constant_state(grid64, 1.0, 1.0)
    phi_s, _ = extrapolate(s)
    assert np.array_equal(phi_s, s.phi)
    phi_s, _ = extrapolate(_constant_state(grid64, 2.0, 1.0))
    assert np.all(phi_s == 3.0)


def test_extrapolation_is_second_order():
    dts = np.array([0.1, 0.05, 0.025, 0.0125])
    t = 1.0
    errs = [abs(2 * math.cos(t) - math.cos(t - dt) - math.cos(t + dt)) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope >= 1.9


def test_startup_duplicates_levels(grid64, rng):
    phi0, u0 = smooth_random(grid64, rng), smooth_random(grid64, rng)
    s = startup(grid64, phi0, u0, Params(), "sieq")
    phi_s, u_s = extrapolate(s)
    assert np.array_equal(phi_s, phi0) and np.array_equal(u_s, u0)
    assert np.array_equal(s.U, s.U_prev)
    s1 = startup(grid64, np.ones(grid64.shape), u0, Params(), "sieq")
    assert np.allclose(s1.U, math.sqrt(5e4), rtol=1e-15)
    assert startup(grid64, phi0, u0, Params(), "sls").U is None


@pytest.mark.parametrize("kind", list(SchemeKind))
@pytest.mark.parametrize("value", [1.0, -1.0])
def test_constant_equilibria_are_fixed_points(grid64, kind, value):
    p = scheme_params(kind, Params(dt=0.1))
    s = startup(grid64, np.full(grid64.shape, value), np.zeros(grid64.shape), p, kind)
    for _ in range(3):
        s, _ = step(kind, grid64, s, p)
    assert np.max(np.abs(s.phi - value)) <= 1e-12
    assert np.max(np.abs(s.u)) <= 1e-12
    if kind.quadratized:
        assert np.allclose(s.U, math.sqrt(p.B), rtol=1e-12)


def test_scheme1_heat_recurrence(grid64):
    p = Params(dt=0.05, D=1.3)
    x = grid64.coords(0)
    u1 = np.broadcast_to(np.sin(x), grid64.shape).copy()
    ones = np.ones(grid64.shape)
    s = State(ones, ones.copy(), u1, 0.4 * u1)
    a, b = 1.0, 0.4
    for _ in range(4):
        s, _ = step_scheme1(grid64, s, p)
        a, b = (4 * a - b) / (3 + 2 * p.dt * p.D), a
        assert np.max(np.abs(s.u - a * u1)) <= 1e-13


def test_sls_at_zero_stabilizers_equals_ls(grid64, rng):
    p = Params(dt=1e-2, s1=0.0, s2=0.0)
    phi = tanh_circle(grid64, eps0=0.3)
    u = smooth_random(grid64, rng, amplitude=0.1)
    s = State(phi, 0.99 * phi, u, u.copy())
    a, _ = step("ls", grid64, s, scheme_params("ls", Params(dt=1e-2)))
    b, _ = step_scheme1(grid64, s, p)
    assert np.array_equal(a.phi, b.phi) and np.array_equal(a.u, b.u)


def test_sieq_at_zero_stabilizers_equals_ieq(grid64, rng):
    phi = tanh_circle(grid64, eps0=0.3)
    s = startup(grid64, phi, np.full(grid64.shape, -0.1), Params(), "ieq")
    a, _ = step("ieq", grid64, s, scheme_params("ieq", Params()))
    b, _ = step_scheme2(grid64, s, Params(s1=0.0, s2=0.0))
    assert np.array_equal(a.phi, b.phi) and np.array_equal(a.U, b.U)


def test_sieq_step_decreases_modified_energy():
    grid = Grid((64, 64), (TWO_PI, TWO_PI))
    p = Params(eps4=0.25, dt=1e-2)
    s = startup(grid, tanh_circle(grid), np.full(grid.shape, -0.55), p, "sieq")
    e0 = energy_modified(grid, s, p)
    s, stats = step_scheme2(grid, s, p)
    assert stats.converged and stats.final_residual <= 1e-9
    assert energy_modified(grid, s, p) <= e0


def test_sieq_solution_satisfies_assembled_system(grid64, rng):
    """Rebuild the coupled equations from model pieces and substitute the solution."""
    p = Params(eps4=0.2, dt=5e-2, K=0.7, lam=2.0)
    phi0 = tanh_circle(grid64, eps0=0.3)
    s = startup(grid64, phi0, smooth_random(grid64, rng, amplitude=0.2), p, "sieq")
    s, _ = step_scheme2(grid64, s, p)
    new, _ = step_scheme2(grid64, s, p, check=True)

    phi_s, _ = extrapolate(s)
    Z = z_of(grid64, phi_s, p)
    pp = latent_derivative(phi_s, p)
    hist = 4 * s.phi - s.phi_prev
    A1 = (4 * s.U - s.U_prev) / 3 - 0.5 * Z * hist / 3
    f1 = (p.tau * hist / (2 * p.dt) + p.s1 / p.eps**2 * phi_s - p.s2 * grid64.laplacian(phi_s) - Z * A1)
    f2 = p.lam / (p.eps * p.K) * (4 * s.u - s.u_prev) / 3 - p.lam / p.eps * pp * hist / 3
    r1, r2 = apply_coupled_operator(grid64, new.phi, new.u, (Z, pp), p)
    assert np.linalg.norm(r1 - f1) <= 1e-8 * np.linalg.norm(f1)
    assert np.linalg.norm(r2 - f2) <= 1e-8 * np.linalg.norm(f2)
    assert np.allclose(new.U, 0.5 * Z * new.phi + A1, rtol=0, atol=1e-12 * np.abs(new.U).max())


def _frozen(grid, rng):
    phi_s = tanh_circle(grid, eps0=0.2) + 0.05 * smooth_random(grid, rng)
    p = Params(eps4=0.25, dt=0.1)
    return phi_s, p, (z_of(grid, phi_s, p), latent_derivative(phi_s, p))


def test_Q_is_self_adjoint(grid64, rng):
    _, p, frozen = _frozen(grid64, rng)
    zero = np.zeros(grid64.shape)
    for _ in range(5):
        a, b = rng.normal(size=grid64.shape), rng.normal(size=grid64.shape)
        Qa, _ = apply_coupled_operator(grid64, a, zero, frozen, p)
        Qb, _ = apply_coupled_operator(grid64, b, zero, frozen, p)
        lhs, rhs = grid64.inner(Qa, b), grid64.inner(a, Qb)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_coupled_operator_is_coercive(grid64, rng):
    _, p, frozen = _frozen(grid64, rng)
    for _ in range(100):
        phi, u = rng.normal(size=grid64.shape), rng.normal(size=grid64.shape)
        r1, r2 = apply_coupled_operator(grid64, phi, u, frozen, p)
        assert grid64.inner(r1, phi) + grid64.inner(r2, u) > 0


def test_decoupled_limit_solved_in_one_iteration(grid64, rng):
    p = Params(dt=0.1)
    zero = np.zeros(grid64.shape)
    system = _CoupledSystem(grid64, zero, zero, zero, p)
    b = np.stack([rng.normal(size=grid64.shape), rng.normal(size=grid64.shape)])
    x, stats = _solve_coupled(system, b, np.zeros_like(b), 1e-12, 50, 30)
    assert stats.iterations <= 1 and stats.converged
    assert np.linalg.norm(system.apply(x) - b) <= 1e-11 * np.linalg.norm(b)


def test_split_operator_matches_direct_application(grid64, rng):
    phi_s, p, (Z, pp) = _frozen(grid64, rng)
    system = _CoupledSystem(grid64, Z, pp, pp, p)
    y = np.stack([rng.normal(size=grid64.shape), rng.normal(size=grid64.shape)])
    Ay, x = system.apply_preconditioned(y)
    direct = system.apply(x)
    assert np.linalg.norm(Ay - direct) <= 1e-12 * np.linalg.norm(direct)


def test_nonfinite_input_is_divergence(grid64):
    p = Params()
    bad = np.full(grid64.shape, np.nan)
    s = State(bad, bad, np.zeros(grid64.shape), np.zeros(grid64.shape))
    with pytest.raises(DivergenceError) as info:
        step_scheme1(grid64, s, p)
    assert info.value.step == 1


def test_large_phase_field_is_divergence(grid64):
    p = scheme_params("ls", Params(dt=1.0))
    s = _constant_state(grid64, 11.0, 11.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with pytest.raises(DivergenceError):
            step_scheme1(grid64, s, p)


def test_solver_iteration_budget(grid64, rng):
    p = Params(eps4=0.25, dt=1.0, s1=0.0, s2=0.0)
    phi = tanh_circle(grid64, eps0=0.08) + 0.3 * smooth_random(grid64, rng)
    s = startup(grid64, phi, smooth_random(grid64, rng), p, "ieq")
    with pytest.raises(SolverError) as info:
        step_scheme2(grid64, s, p, tol=1e-14, max_iters=1, restart=1)
    assert not info.value.stats.converged


def test_scheme2_requires_auxiliary_levels(grid64):
    s = _constant_state(grid64, 1.0, 1.0)
    with pytest.raises(ValueError):
        step_scheme2(grid64, s, Params())
