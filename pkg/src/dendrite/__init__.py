"""Pseudo-spectral simulator for anisotropic phase-field dendritic growth."""

from .config import RunConfig, load_config, preset, preset_names
from .estimator import PhaseFieldSimulator
from .model import EnergyRecord, Params, State
from .schemes import SchemeKind, SolverStats
from .simulation import RunResult, run_simulation
from .spectral import BC, Grid

__version__ = "0.1.0"

__all__ = [
    "BC", "Grid", "Params", "State", "EnergyRecord", "SchemeKind", "SolverStats",
    "RunConfig", "RunResult", "load_config", "preset", "preset_names",
    "PhaseFieldSimulator", "run_simulation",
]
