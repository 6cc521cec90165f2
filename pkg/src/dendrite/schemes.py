"""Linear second-order BDF2 time integrators.

Scheme 1 (``LS``/``SLS``) treats every nonlinear term explicitly and needs
two decoupled Helmholtz solves per step. Scheme 2 (``IEQ``/``SIEQ``) works
on the quadratized system and solves one coupled, linear, positive-definite
system for ``(phi, u)`` per step. The unstabilized kinds are the same code
with ``s1 = s2 = 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .model import (
    Params, State, _z_and_U, aniso_divergence, double_well, heat_coupling, latent_derivative,
    quadratize_U,
)
from .spectral import Grid

__all__ = [
    "SchemeKind",
    "SolverStats",
    "DivergenceError",
    "SolverError",
    "scheme_params",
    "extrapolate",
    "startup",
    "step_scheme1",
    "step_scheme2",
    "apply_coupled_operator",
    "step",
]

Forcing = Callable[[float], "tuple[np.ndarray, np.ndarray]"]

BLOWUP_LIMIT = 10.0


class SchemeKind(str, Enum):
    LS = "ls"
    SLS = "sls"
    IEQ = "ieq"
    SIEQ = "sieq"

    @property
    def quadratized(self) -> bool:
        return self in (SchemeKind.IEQ, SchemeKind.SIEQ)

    @property
    def stabilized(self) -> bool:
        return self in (SchemeKind.SLS, SchemeKind.SIEQ)


@dataclass
class SolverStats:
    iterations: int = 0
    final_residual: float = 0.0
    converged: bool = True


class DivergenceError(RuntimeError):
    def __init__(self, step: int, t: float, reason: str):
        super().__init__(f"solution diverged at step {step} (t = {t:g}): {reason}")
        self.step = step
        self.t = t
        self.reason = reason


class SolverError(RuntimeError):
    def __init__(self, message: str, stats: SolverStats):
        super().__init__(message)
        self.stats = stats


def scheme_params(kind: SchemeKind, params: Params) -> Params:
    """Parameters actually used by ``kind``: unstabilized kinds drop s1, s2."""
    kind = SchemeKind(kind)
    if not kind.stabilized:
        return params.replace(s1=0.0, s2=0.0)
    if params.s1 == 0 and params.s2 == 0:
        warnings.warn(f"{kind.name} run with s1 = s2 = 0 is unstabilized", stacklevel=2)
    return params


def extrapolate(state: State):
    """Second-order extrapolation ``2 psi^n - psi^(n-1)`` of ``phi`` and ``u``."""
    return 2.0 * state.phi - state.phi_prev, 2.0 * state.u - state.u_prev


def startup(grid: Grid, phi0, u0, params: Params, kind: SchemeKind) -> State:
    """Initial state with the history level duplicated."""
    phi0 = np.array(phi0, dtype=float)
    u0 = np.array(u0, dtype=float)
    grid.check(phi0, "phi0")
    grid.check(u0, "u0")
    U0 = quadratize_U(grid, phi0, params) if SchemeKind(kind).quadratized else None
    return State(
        phi=phi0, phi_prev=phi0.copy(), u=u0, u_prev=u0.copy(),
        U=U0, U_prev=None if U0 is None else U0.copy(), t=0.0, step=0,
    )


def _finite(step: int, t: float, *fields):
    for a in fields:
        if not np.all(np.isfinite(a)):
            raise DivergenceError(step, t, "non-finite values")


def _guard(step: int, t: float, *fields):
    """Divergence check; the first field is the phase field."""
    _finite(step, t, *fields)
    peak = float(np.max(np.abs(fields[0])))
    if peak > BLOWUP_LIMIT:
        raise DivergenceError(step, t, f"max |phi| = {peak:.3g} exceeds {BLOWUP_LIMIT:g}")


def step_scheme1(grid: Grid, state: State, params: Params, forcing: Forcing | None = None):
    """One stabilized-explicit BDF2 step (two decoupled Helmholtz solves)."""
    p = params
    dt = p.dt
    t_new = state.t + dt
    step_no = state.step + 1
    phi_s, u_s = extrapolate(state)
    _, f_s = double_well(phi_s)
    pp_s = latent_derivative(phi_s, p)
    inv_eps2 = 1.0 / p.eps**2

    rhs = (
        p.tau * (4.0 * state.phi - state.phi_prev) / (2.0 * dt)
        + aniso_divergence(grid, phi_s, p)
        - inv_eps2 * f_s
        - p.lam / p.eps * pp_s * u_s
    )
    if p.s1:
        rhs = rhs + p.s1 * inv_eps2 * phi_s
    if p.s2:
        rhs = rhs - p.s2 * grid.laplacian(phi_s)
    g_phi = g_u = None
    if forcing is not None:
        g_phi, g_u = forcing(t_new)
        rhs = rhs + g_phi
    _finite(step_no, t_new, rhs)
    phi_new = grid.solve_helmholtz(1.5 * p.tau / dt + p.s1 * inv_eps2, p.s2, rhs)

    q = heat_coupling(phi_new, p)
    rhs_u = (4.0 * state.u - state.u_prev) / (2.0 * dt) + p.K * q * (
        3.0 * phi_new - 4.0 * state.phi + state.phi_prev
    ) / (2.0 * dt)
    if g_u is not None:
        rhs_u = rhs_u + g_u
    u_new = grid.solve_helmholtz(1.5 / dt, p.D, rhs_u)
    _guard(step_no, t_new, phi_new, u_new)

    new = State(phi=np.ascontiguousarray(phi_new), phi_prev=state.phi,
                u=np.ascontiguousarray(u_new), u_prev=state.u, t=t_new, step=step_no)
    return new, SolverStats()


class _CoupledSystem:
    """Frozen-coefficient operator of the SIEQ step and its preconditioner.

    Unknowns are stacked as an array of shape ``(2, *grid.shape)``.
    """

    def __init__(self, grid: Grid, Z, pp, q, params: Params):
        p = params
        self.grid = grid
        self.shape = (2,) + grid.shape
        self.half_z2 = 0.5 * Z * Z
        self.c_phi = p.lam / p.eps * pp
        self.c_u = p.lam / p.eps * q
        self.cu = p.lam / (p.eps * p.K)
        self.a_phi = 1.5 * p.tau / p.dt + p.s1 / p.eps**2
        self.s2 = p.s2
        self.b_u = self.cu * 2.0 * p.dt / 3.0 * p.D
        self.zbar = zbar = float(np.mean(self.half_z2))
        k2 = grid.k2
        self.symbol = np.stack(
            np.broadcast_arrays(self.a_phi + zbar + self.s2 * k2, self.cu + self.b_u * k2)
        )
        # the two rows differ by orders of magnitude; equilibrate them for the residual norm
        self.row_scale = np.array([1.0 / (self.a_phi + zbar), 1.0 / self.cu]).reshape(
            (2,) + (1,) * grid.dims
        )

    def apply(self, x, lap=None):
        phi, u = x[0], x[1]
        if lap is None:
            lap = self.grid.ifft(-self.grid.k2 * self.grid.fft(x))
        r1 = self.a_phi * phi + self.half_z2 * phi + self.c_phi * u
        if self.s2:
            r1 = r1 - self.s2 * lap[0]
        r2 = self.cu * u - self.b_u * lap[1] - self.c_u * phi
        return np.stack([r1, r2])

    def precond(self, y):
        """Apply the inverse of the constant-coefficient part."""
        return self.grid.ifft(self.grid.fft(y) / self.symbol)

    def precond_forward(self, x):
        return self.grid.ifft(self.grid.fft(x) * self.symbol)

    def variable_part(self, x):
        """``(A - M) x``: the pointwise remainder once ``M`` is split off."""
        phi, u = x[0], x[1]
        return np.stack([(self.half_z2 - self.zbar) * phi + self.c_phi * u, -self.c_u * phi])

    def apply_preconditioned(self, y):
        """``A M^-1 y = y + (A - M) M^-1 y``; returns it together with ``M^-1 y``."""
        x = self.precond(y)
        return y + self.variable_part(x), x


def apply_coupled_operator(grid: Grid, phi, u, frozen, params: Params):
    """Apply the linear operator of the coupled SIEQ system.

    ``frozen`` is ``(Z*, p'(phi*))`` evaluated at the extrapolated phase
    field; returns ``(r1, r2)`` with ``r1 = Q(phi) + (lam/eps) p'* u`` and
    ``r2 = (lam/(eps K)) (u - (2 dt/3) D Lap u) - (lam/eps) q* phi``.
    """
    Z, pp = frozen
    q = np.ones_like(pp) if params.latent_variant == "unit_derivative" else pp
    system = _CoupledSystem(grid, Z, pp, q, params)
    r = system.apply(np.stack([phi, u]))
    return r[0], r[1]


def _solve_coupled(system: _CoupledSystem, b, x_guess, tol, max_iters, restart):
    """Right-preconditioned GMRES on the row-equilibrated system.

    With ``S`` the row scaling and ``M`` the constant-coefficient part, GMRES
    runs on ``S A M^-1 S^-1`` in the unknown ``z = S M x``, so the decoupled
    limit is the identity. The reported residual is ``||S (A x - b)|| / ||S b||``.
    """
    size = b.size
    shape = system.shape
    S = system.row_scale
    b = S * b
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(shape), SolverStats(0, 0.0, True)

    op = LinearOperator(
        (size, size),
        matvec=lambda z: (S * system.apply_preconditioned(z.reshape(shape) / S)[0]).ravel(),
        dtype=float,
    )
    z0 = (S * system.precond_forward(x_guess)).ravel()
    count = [0]

    def tick(_):
        count[0] += 1

    restart = min(restart, max_iters)
    # GMRES monitors its own recurrence residual; re-enter until the true one also meets tol
    while True:
        budget = max_iters - count[0]
        z0, info = gmres(
            op, b.ravel(), x0=z0, rtol=tol, atol=0.0, restart=restart,
            maxiter=max(1, math.ceil(budget / restart)), callback=tick, callback_type="pr_norm",
        )
        ax, x = system.apply_preconditioned(z0.reshape(shape) / S)
        res = float(np.linalg.norm(S * ax - b)) / b_norm
        if res <= tol or info != 0 or count[0] >= max_iters:
            break
    return x, SolverStats(count[0], res, res <= tol)


def step_scheme2(
    grid: Grid,
    state: State,
    params: Params,
    forcing: Forcing | None = None,
    *,
    tol: float = 1e-9,
    max_iters: int = 500,
    restart: int = 30,
    check: bool = False,
):
    """One (stabilized) IEQ BDF2 step.

    The auxiliary variable is eliminated, the coupled ``(phi, u)`` system is
    solved by right-preconditioned restarted GMRES, and ``U`` is recovered
    from its update formula. ``check`` substitutes the solution back into the
    assembled equations and raises if the residual exceeds ``10 * tol``.
    """
    if state.U is None or state.U_prev is None:
        raise ValueError("IEQ-type step needs the auxiliary levels U and U_prev")
    p = params
    dt = p.dt
    t_new = state.t + dt
    step_no = state.step + 1
    phi_s, u_s = extrapolate(state)
    Z, _ = _z_and_U(grid, phi_s, p)
    pp = latent_derivative(phi_s, p)
    q = heat_coupling(phi_s, p)
    _guard(step_no, t_new, phi_s, Z)

    hist_phi = 4.0 * state.phi - state.phi_prev
    A1 = (4.0 * state.U - state.U_prev) / 3.0 - 0.5 * Z * hist_phi / 3.0
    f1 = p.tau * hist_phi / (2.0 * dt) - Z * A1
    if p.s1:
        f1 = f1 + p.s1 / p.eps**2 * phi_s
    if p.s2:
        f1 = f1 - p.s2 * grid.laplacian(phi_s)
    cu = p.lam / (p.eps * p.K)
    f2 = cu * (4.0 * state.u - state.u_prev) / 3.0 - p.lam / p.eps * q * hist_phi / 3.0
    if forcing is not None:
        g_phi, g_u = forcing(t_new)
        f1 = f1 + g_phi
        f2 = f2 + 2.0 * dt / 3.0 * cu * g_u
    b = np.stack([f1, f2])
    _finite(step_no, t_new, b)

    system = _CoupledSystem(grid, Z, pp, q, p)
    x, stats = _solve_coupled(system, b, np.stack([phi_s, u_s]), tol, max_iters, restart)
    if not stats.converged:
        raise SolverError(
            f"GMRES did not reach rtol {tol:g} within {max_iters} iterations "
            f"(residual {stats.final_residual:.3g}) at step {step_no}",
            stats,
        )
    if check and stats.final_residual > 10 * tol:
        raise SolverError(f"substitution residual {stats.final_residual:.3g} too large", stats)
    phi_new, u_new = np.ascontiguousarray(x[0]), np.ascontiguousarray(x[1])
    U_new = 0.5 * Z * phi_new + A1
    _guard(step_no, t_new, phi_new, u_new, U_new)

    new = State(phi=phi_new, phi_prev=state.phi, u=u_new, u_prev=state.u,
                U=U_new, U_prev=state.U, t=t_new, step=step_no)
    return new, stats


def step(kind: SchemeKind, grid: Grid, state: State, params: Params,
         forcing: Forcing | None = None, **solver_options):
    """Advance ``state`` by one step of ``kind``; ``params`` must already be scheme-adjusted."""
    if SchemeKind(kind).quadratized:
        return step_scheme2(grid, state, params, forcing, **solver_options)
    return step_scheme1(grid, state, params, forcing)
