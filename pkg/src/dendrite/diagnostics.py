"""Run-time and post-hoc analysis.

Crystal size, manufactured solutions, convergence orders, energy ledgers
and stability sweeps.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import EnergyRecord, Params, residual
from .schemes import SchemeKind
from .spectral import Grid

__all__ = [
    "crystal_radius",
    "RadiusSeries",
    "radius_series",
    "mms_exact",
    "mms_forcing",
    "MMSForcing",
    "l2_error",
    "ConvergenceReport",
    "convergence_order",
    "Scenario",
    "SweepOutcome",
    "stability_sweep",
    "energy_ledger",
    "is_non_increasing",
    "worker_count",
]


def crystal_radius(grid: Grid, phi) -> float:
    """Radius of the disc (2D) or ball (3D) with the same solid volume."""
    area = float(grid.integrate(0.5 * (phi + 1.0)))
    if area < 0:
        warnings.warn(f"negative solid volume {area:.3g} clamped to 0", stacklevel=2)
        area = 0.0
    if grid.dims == 2:
        return math.sqrt(area / math.pi)
    return (3.0 * area / (4.0 * math.pi)) ** (1.0 / 3.0)


@dataclass
class RadiusSeries:
    times: np.ndarray
    radii: np.ndarray


def radius_series(records: Sequence[EnergyRecord]) -> RadiusSeries:
    return RadiusSeries(np.array([r.time for r in records]), np.array([r.radius for r in records]))


# ----------------------------------------------------------------------
# manufactured solutions
# ----------------------------------------------------------------------
def mms_exact(grid: Grid, t: float):
    """Exact fields and time derivatives ``(phi, u, phi_t, u_t)`` at time ``t``.

    ``phi = sin x cos y cos t`` and ``u = cos x sin y cos t``.
    """
    if grid.dims != 2:
        raise ValueError("the manufactured solution is defined in 2D only")
    x, y = grid.coords(0), grid.coords(1)
    a = np.sin(x) * np.cos(y)
    b = np.cos(x) * np.sin(y)
    return a * math.cos(t), b * math.cos(t), -a * math.sin(t), -b * math.sin(t)


def mms_forcing(grid: Grid, t: float, params: Params):
    """Source terms ``(g_phi, g_u)`` that make the manufactured solution exact."""
    phi, u, phi_t, u_t = mms_exact(grid, t)
    return residual(grid, phi, u, phi_t, u_t, params)


@dataclass
class MMSForcing:
    """Picklable ``t -> (g_phi, g_u)`` callable for the integrators."""

    grid: Grid
    params: Params

    def __call__(self, t: float):
        return mms_forcing(self.grid, t, self.params)


def l2_error(grid: Grid, approx, exact) -> float:
    return grid.norm(approx - exact)


@dataclass
class ConvergenceReport:
    dts: np.ndarray
    errors_phi: np.ndarray
    errors_u: np.ndarray
    slopes_phi: np.ndarray
    slopes_u: np.ndarray
    order_phi: float
    order_u: float

    @property
    def fitted_order(self) -> tuple[float, float]:
        return self.order_phi, self.order_u

    def rows(self):
        for i, dt in enumerate(self.dts):
            yield float(dt), float(self.errors_phi[i]), float(self.errors_u[i])


def _orders(dts, errors):
    dts = np.asarray(dts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    slopes = np.log(errors[:-1] / errors[1:]) / np.log(dts[:-1] / dts[1:])
    fitted = np.polyfit(np.log(dts), np.log(errors), 1)[0]
    return slopes, float(fitted)


def convergence_order(dts, errors_phi, errors_u=None) -> ConvergenceReport:
    """Pairwise and least-squares temporal orders of an error sequence."""
    dts = np.asarray(dts, dtype=float)
    errors_phi = np.asarray(errors_phi, dtype=float)
    errors_u = errors_phi if errors_u is None else np.asarray(errors_u, dtype=float)
    if dts.size < 3:
        raise ValueError(f"need at least 3 time steps, got {dts.size}")
    if not errors_phi.size == errors_u.size == dts.size:
        raise ValueError("errors and dts must have the same length")
    if np.any(np.diff(dts) >= 0):
        raise ValueError("dts must be strictly decreasing")
    sp, op = _orders(dts, errors_phi)
    su, ou = _orders(dts, errors_u)
    return ConvergenceReport(dts, errors_phi, errors_u, sp, su, op, ou)


# ----------------------------------------------------------------------
# ledgers and sweeps
# ----------------------------------------------------------------------
def energy_ledger(run) -> list[EnergyRecord]:
    """Diagnostic records of a finished run (see :class:`dendrite.simulation.RunResult`)."""
    return list(run.records)


def is_non_increasing(values, rel_slack: float) -> bool:
    """True if no step increases by more than ``rel_slack * (1 + |previous|)``."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return True
    return bool(np.all(np.diff(v) <= rel_slack * (1.0 + np.abs(v[:-1]))))


@dataclass
class Scenario:
    """Everything needed to start a run except the scheme and time step."""

    name: str
    grid: Grid
    params: Params
    phi0: np.ndarray
    u0: np.ndarray
    t_final: float
    forcing: Callable | None = None
    t_final_by_dt: dict = field(default_factory=dict)

    def final_time(self, dt: float) -> float:
        return self.t_final_by_dt.get(dt, self.t_final)


@dataclass
class SweepOutcome:
    kind: SchemeKind
    dt: float
    diverged_at: int | None
    n_steps: int
    final_energy: float
    energy_monotone: bool

    @property
    def converged(self) -> bool:
        return self.diverged_at is None


def worker_count() -> int:
    """Worker pool size, capped by ``DENDRITE_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("DENDRITE_THREADS", "1")))
    except ValueError:
        return 1


def _sweep_one(scenario: Scenario, kind: SchemeKind, dt: float) -> SweepOutcome:
    from .simulation import run_simulation

    params = scenario.params.replace(dt=dt)
    result = run_simulation(
        scenario.grid, params, kind, scenario.phi0, scenario.u0,
        scenario.final_time(dt), forcing=scenario.forcing,
    )
    key = "e_modified" if SchemeKind(kind).quadratized else "e_original"
    series = [getattr(r, key) for r in result.records]
    final = series[-1] if series else math.nan
    return SweepOutcome(SchemeKind(kind), dt, result.diverged_at, result.state.step, final,
                        is_non_increasing(series, 1e-8))


def stability_sweep(scenario: Scenario, kinds: Sequence, dts: Sequence[float],
                    workers: int | None = None) -> list[SweepOutcome]:
    """Run every (scheme, dt) pair; divergence is recorded, never raised."""
    jobs = [(SchemeKind(k), float(dt)) for k in kinds for dt in dts]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) == 1:
        return [_sweep_one(scenario, k, dt) for k, dt in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        futures = [pool.submit(_sweep_one, scenario, k, dt) for k, dt in jobs]
        return [f.result() for f in futures]
