"""Time-stepping driver shared by the CLI, the estimator and the sweeps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diagnostics import crystal_radius
from .model import EnergyRecord, Params, State, energy_modified, energy_original
from .schemes import DivergenceError, SchemeKind, SolverError, SolverStats, scheme_params, startup, step
from .spectral import Grid

__all__ = ["RunResult", "make_record", "n_steps_for", "run_simulation"]

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    grid: Grid
    params: Params
    kind: SchemeKind
    state: State
    records: list[EnergyRecord] = field(default_factory=list)
    diverged_at: int | None = None
    divergence_reason: str | None = None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def make_record(grid: Grid, state: State, params: Params, stats: SolverStats | None = None) -> EnergyRecord:
    e_mod = energy_modified(grid, state, params) if state.U is not None else None
    stats = stats or SolverStats()
    return EnergyRecord(
        step=state.step,
        time=state.t,
        e_original=energy_original(grid, state.phi, state.u, params),
        e_modified=e_mod,
        radius=crystal_radius(grid, state.phi),
        phi_min=float(state.phi.min()),
        phi_max=float(state.phi.max()),
        solver_iters=stats.iterations,
        solver_residual=stats.final_residual,
    )


def n_steps_for(t_final: float, dt: float) -> int:
    n = int(round(t_final / dt))
    if n < 1:
        raise ValueError(f"t_final = {t_final} is shorter than one step of {dt}")
    return n


def run_simulation(
    grid: Grid,
    params: Params,
    kind,
    phi0,
    u0,
    t_final: float,
    *,
    sample_every: int = 1,
    forcing: Callable | None = None,
    callback: Callable[[State, SolverStats], None] | None = None,
    solver_options: dict | None = None,
) -> RunResult:
    """Integrate from ``(phi0, u0)`` to ``t_final`` with scheme ``kind``.

    Divergence, or a linear solve that fails to converge, ends the run
    early and is reported through ``RunResult.diverged_at`` rather than
    raised. ``callback`` is invoked
    after every step.
    """
    kind = SchemeKind(kind)
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    params = scheme_params(kind, params)
    solver_options = dict(solver_options or {})
    state = startup(grid, phi0, u0, params, kind)
    result = RunResult(grid, params, kind, state, [make_record(grid, state, params)])
    n_steps = n_steps_for(t_final, params.dt)
    for i in range(1, n_steps + 1):
        try:
            state, stats = step(kind, grid, state, params, forcing, **solver_options)
        except DivergenceError as exc:
            log.warning("%s", exc)
            result.diverged_at = exc.step
            result.divergence_reason = exc.reason
            break
        except SolverError as exc:
            # a Krylov breakdown on a blowing-up field is a failed step, not a crash
            log.warning("%s", exc)
            result.diverged_at = i
            result.divergence_reason = "linear solver did not converge"
            break
        result.state = state
        if i % sample_every == 0 or i == n_steps:
            result.records.append(make_record(grid, state, params, stats))
        if callback is not None:
            callback(state, stats)
    return result
