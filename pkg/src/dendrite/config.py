"""Run configuration, initial conditions and benchmark presets.

A configuration is a JSON object::

    {
      "grid": {"n": [256, 256], "length": [6.283185307179586, 6.283185307179586],
               "bc": ["periodic", "periodic"]},
      "params": {"eps": 0.0112, "eps4": 0.05, "lambda": 380, "K": 0.5, ...},
      "scheme": "sieq",
      "t_final": 100.0,
      "sample_every": 10,
      "initial_condition": {"type": "nucleus", "center": [3.14159, 3.14159],
                            "r0": 0.02, "eps0": 0.072, "u0": -0.55},
      "outputs": {"csv": true, "fields": false, "images": true, "render_every": 1000},
      "output_dir": "out",
      "seed": 0,
      "solver": {"tol": 1e-9, "max_iters": 500, "restart": 30}
    }

Unknown keys anywhere are rejected; every validation error names the
offending field path.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .diagnostics import MMSForcing, mms_exact
from .model import Params
from .schemes import SchemeKind
from .spectral import BC, Grid

__all__ = [
    "ConfigError",
    "GridSpec",
    "CircleIC",
    "NucleusIC",
    "MMSIC",
    "ConstantIC",
    "Outputs",
    "RunConfig",
    "initial_fields",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "PRESETS",
    "preset",
    "preset_names",
]

TWO_PI = 2.0 * math.pi

# alternative spellings accepted in the "params" block
PARAM_ALIASES = {"lambda": "lam", "bigK": "K", "diffD": "D", "bigB": "B"}
SOLVER_KEYS = ("tol", "max_iters", "restart", "check")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


# ----------------------------------------------------------------------
# schema
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class GridSpec:
    n: tuple[int, ...]
    length: tuple[float, ...]
    bc: tuple[str, ...] | None = None
    dealias: bool = False

    def build(self) -> Grid:
        return Grid(self.n, self.length, self.bc, self.dealias)


@dataclass(frozen=True)
class CircleIC:
    """``phi = tanh((r0 - |x - center|) / eps0)`` and a uniform ``u = u0``."""

    center: tuple[float, ...]
    r0: float
    eps0: float
    u0: float
    type: str = field(default="circle", init=False)


@dataclass(frozen=True)
class NucleusIC:
    """Same profile as :class:`CircleIC`; ``u = 0`` inside the solid, ``u0`` elsewhere."""

    center: tuple[float, ...]
    r0: float
    eps0: float
    u0: float
    type: str = field(default="nucleus", init=False)


@dataclass(frozen=True)
class MMSIC:
    """The manufactured solution at ``t = 0``; also switches on its forcing."""

    type: str = field(default="mms", init=False)


@dataclass(frozen=True)
class ConstantIC:
    phi: float = 1.0
    u: float = 0.0
    type: str = field(default="constant", init=False)


IC_TYPES = {"circle": CircleIC, "nucleus": NucleusIC, "mms": MMSIC, "constant": ConstantIC}


@dataclass(frozen=True)
class Outputs:
    csv: bool = True
    fields: bool = False
    images: bool = False
    render_every: int | None = None


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    params: Params
    scheme: SchemeKind
    t_final: float
    initial_condition: Any
    sample_every: int = 1
    outputs: Outputs = Outputs()
    output_dir: str = "out"
    seed: int = 0
    solver: dict = field(default_factory=dict)
    name: str = "run"

    def build_grid(self) -> Grid:
        return self.grid.build()

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def forcing(self, grid: Grid) -> Callable | None:
        if isinstance(self.initial_condition, MMSIC):
            return MMSForcing(grid, self.params)
        return None


def _tanh_disc(grid: Grid, center, r0: float, eps0: float):
    r2 = 0
    for a, c in enumerate(center):
        r2 = r2 + (grid.coords(a) - c) ** 2
    return np.broadcast_to(np.tanh((r0 - np.sqrt(r2)) / eps0), grid.shape).copy()


def initial_fields(grid: Grid, ic) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate ``(phi0, u0)`` of an initial-condition record on ``grid``."""
    if isinstance(ic, (CircleIC, NucleusIC)):
        if len(ic.center) != grid.dims:
            raise ConfigError("initial_condition.center", f"needs {grid.dims} coordinates")
        phi = _tanh_disc(grid, ic.center, ic.r0, ic.eps0)
        if isinstance(ic, CircleIC):
            u = np.full(grid.shape, float(ic.u0))
        else:
            u = np.where(phi > 0, 0.0, float(ic.u0))
        return phi, u
    if isinstance(ic, MMSIC):
        phi, u, _, _ = mms_exact(grid, 0.0)
        return np.broadcast_to(phi, grid.shape).copy(), np.broadcast_to(u, grid.shape).copy()
    if isinstance(ic, ConstantIC):
        return np.full(grid.shape, float(ic.phi)), np.full(grid.shape, float(ic.u))
    raise TypeError(f"unknown initial condition {ic!r}")


# ----------------------------------------------------------------------
# parsing
# ----------------------------------------------------------------------
def _expect_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected an object, got {type(obj).__name__}")
    return obj


def _reject_unknown(obj: dict, allowed, path: str):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], "unknown key")


def _number(value, path: str, *, positive=False, integer=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    return int(value) if integer else float(value)


def _vector(value, path: str, **kw) -> tuple:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(path, "expected a non-empty list")
    return tuple(_number(v, f"{path}[{i}]", **kw) for i, v in enumerate(value))


def _parse_grid(obj, path="grid") -> GridSpec:
    obj = _expect_mapping(obj, path)
    _reject_unknown(obj, ("n", "length", "bc", "dealias"), path)
    for key in ("n", "length"):
        if key not in obj:
            raise ConfigError(f"{path}.{key}", "missing")
    n = _vector(obj["n"], f"{path}.n", integer=True)
    length = _vector(obj["length"], f"{path}.length", positive=True)
    bc = obj.get("bc")
    if bc is not None:
        if not isinstance(bc, list):
            raise ConfigError(f"{path}.bc", "expected a list")
        for i, b in enumerate(bc):
            if b not in (BC.PERIODIC.value, BC.NOFLUX.value):
                raise ConfigError(f"{path}.bc[{i}]", f"expected 'periodic' or 'noflux', got {b!r}")
        bc = tuple(bc)
    spec = GridSpec(n, length, bc, bool(obj.get("dealias", False)))
    try:
        spec.build()
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None
    return spec


def _parse_params(obj, path="params") -> Params:
    obj = _expect_mapping(obj or {}, path)
    names = set(Params.field_names())
    kwargs = {}
    for key, value in obj.items():
        name = PARAM_ALIASES.get(key, key)
        if name not in names:
            raise ConfigError(f"{path}.{key}", "unknown key")
        if name in kwargs:
            raise ConfigError(f"{path}.{key}", f"duplicates {name!r}")
        if name not in ("p_choice", "latent_variant"):
            _number(value, f"{path}.{key}", integer=name == "m")
        kwargs[name] = value
    try:
        return Params(**kwargs)
    except ValueError as exc:
        # Params messages start with the field name
        culprit = str(exc).split()[0]
        bad = next((k for k in obj if PARAM_ALIASES.get(k, k) == culprit), None)
        raise ConfigError(f"{path}.{bad}" if bad else path, str(exc)) from None


def _parse_ic(obj, grid: GridSpec, path="initial_condition"):
    obj = _expect_mapping(obj, path)
    kind = obj.get("type")
    if kind not in IC_TYPES:
        raise ConfigError(f"{path}.type", f"expected one of {sorted(IC_TYPES)}, got {kind!r}")
    cls = IC_TYPES[kind]
    allowed = [f.name for f in dataclasses.fields(cls) if f.init]
    _reject_unknown(obj, allowed + ["type"], path)
    if cls is MMSIC:
        return MMSIC()
    if cls is ConstantIC:
        return ConstantIC(**{k: _number(obj[k], f"{path}.{k}") for k in allowed if k in obj})
    for key in allowed:
        if key not in obj:
            raise ConfigError(f"{path}.{key}", "missing")
    center = _vector(obj["center"], f"{path}.center")
    if len(center) != len(grid.n):
        raise ConfigError(f"{path}.center", f"needs {len(grid.n)} coordinates, got {len(center)}")
    for a, (c, length) in enumerate(zip(center, grid.length)):
        if not 0 <= c <= length:
            raise ConfigError(f"{path}.center[{a}]", f"{c} lies outside [0, {length}]")
    return cls(
        center=center,
        r0=_number(obj["r0"], f"{path}.r0", positive=True),
        eps0=_number(obj["eps0"], f"{path}.eps0", positive=True),
        u0=_number(obj["u0"], f"{path}.u0"),
    )


def _parse_outputs(obj, path="outputs") -> Outputs:
    obj = _expect_mapping(obj or {}, path)
    _reject_unknown(obj, [f.name for f in dataclasses.fields(Outputs)], path)
    kw = {}
    for key in ("csv", "fields", "images"):
        if key in obj:
            if not isinstance(obj[key], bool):
                raise ConfigError(f"{path}.{key}", "expected true or false")
            kw[key] = obj[key]
    if obj.get("render_every") is not None:
        kw["render_every"] = _number(obj["render_every"], f"{path}.render_every",
                                     positive=True, integer=True)
    return Outputs(**kw)


def _parse_solver(obj, path="solver") -> dict:
    obj = _expect_mapping(obj or {}, path)
    _reject_unknown(obj, SOLVER_KEYS, path)
    out = {}
    if "tol" in obj:
        out["tol"] = _number(obj["tol"], f"{path}.tol", positive=True)
    for key in ("max_iters", "restart"):
        if key in obj:
            out[key] = _number(obj[key], f"{path}.{key}", positive=True, integer=True)
    if "check" in obj:
        out["check"] = bool(obj["check"])
    return out


TOP_KEYS = ("name", "grid", "params", "scheme", "t_final", "sample_every", "initial_condition",
            "outputs", "output_dir", "seed", "solver")


def config_from_dict(obj: dict) -> RunConfig:
    """Validate a parsed JSON object and build a :class:`RunConfig`."""
    obj = _expect_mapping(obj, "")
    _reject_unknown(obj, TOP_KEYS, "")
    for key in ("grid", "scheme", "t_final", "initial_condition"):
        if key not in obj:
            raise ConfigError(key, "missing")
    grid = _parse_grid(obj["grid"])
    try:
        scheme = SchemeKind(str(obj["scheme"]).lower())
    except ValueError:
        raise ConfigError("scheme", f"expected one of ls, sls, ieq, sieq, got {obj['scheme']!r}") from None
    sample_every = _number(obj.get("sample_every", 1), "sample_every", positive=True, integer=True)
    seed = _number(obj.get("seed", 0), "seed", integer=True)
    output_dir = obj.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir", "expected a string")
    return RunConfig(
        grid=grid,
        params=_parse_params(obj.get("params")),
        scheme=scheme,
        t_final=_number(obj["t_final"], "t_final", positive=True),
        initial_condition=_parse_ic(obj["initial_condition"], grid),
        sample_every=sample_every,
        outputs=_parse_outputs(obj.get("outputs")),
        output_dir=output_dir,
        seed=seed,
        solver=_parse_solver(obj.get("solver")),
        name=str(obj.get("name", "run")),
    )


def load_config(path) -> RunConfig:
    """Read and validate a JSON configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(obj)


def config_to_dict(cfg: RunConfig) -> dict:
    """Inverse of :func:`config_from_dict`, suitable for ``json.dump``."""
    ic = {k: v for k, v in dataclasses.asdict(cfg.initial_condition).items()}
    ic = {"type": ic.pop("type"), **{k: list(v) if isinstance(v, tuple) else v for k, v in ic.items()}}
    grid = {"n": list(cfg.grid.n), "length": list(cfg.grid.length)}
    if cfg.grid.bc is not None:
        grid["bc"] = [BC(b).value for b in cfg.grid.bc]
    if cfg.grid.dealias:
        grid["dealias"] = True
    return {
        "name": cfg.name,
        "grid": grid,
        "params": dataclasses.asdict(cfg.params),
        "scheme": cfg.scheme.value,
        "t_final": cfg.t_final,
        "sample_every": cfg.sample_every,
        "initial_condition": ic,
        "outputs": dataclasses.asdict(cfg.outputs),
        "output_dir": cfg.output_dir,
        "seed": cfg.seed,
        "solver": dict(cfg.solver),
    }


# ----------------------------------------------------------------------
# presets
# ----------------------------------------------------------------------
ACCURACY = Params(eps=0.06, eps4=0.05, lam=1.0, K=1.0, D=1.0, tau=100.0, s1=4.0, s2=4.0, dt=1e-2)
DENDRITE_2D = Params(eps=1.12e-2, eps4=0.05, lam=380.0, K=0.5, D=2.25e-4, tau=4.4e3,
                     s1=4.0, s2=4.0, dt=1e-2)
DENDRITE_3D = Params(eps=3e-2, eps4=0.05, lam=260.0, K=0.5, D=2e-4, tau=2.5e4,
                     s1=4.0, s2=4.0, dt=1e-1)


def _square(n: int, dims: int = 2) -> GridSpec:
    return GridSpec((n,) * dims, (TWO_PI,) * dims)


def _accuracy(full_scale: bool) -> RunConfig:
    return RunConfig(_square(128), ACCURACY, SchemeKind.SIEQ, 1.0, MMSIC(), name="accuracy-2d")


def _circle(kind: SchemeKind) -> Callable[[bool], RunConfig]:
    def build(full_scale: bool) -> RunConfig:
        return RunConfig(
            _square(128), ACCURACY.replace(eps4=0.25), kind, 20.0,
            CircleIC((math.pi, math.pi), 1.5, 0.072, -0.55), name=f"circle-{kind.value}",
        )
    return build


def _dendrite_2d(m: int, K: float, t_final: float, name: str) -> Callable[[bool], RunConfig]:
    def build(full_scale: bool) -> RunConfig:
        return RunConfig(
            _square(512 if full_scale else 256), DENDRITE_2D.replace(m=m, K=K), SchemeKind.SIEQ,
            t_final, NucleusIC((math.pi, math.pi), 0.02, 0.072, -0.55),
            sample_every=10, outputs=Outputs(images=True, render_every=1000), name=name,
        )
    return build


def _halfplane(full_scale: bool) -> RunConfig:
    nx = 512 if full_scale else 256
    # match the periodic spacing 2 pi / nx on the no-flux axis of height 3 (vertex grid, even count)
    ny = 2 * math.ceil((3.0 / (TWO_PI / nx) + 1) / 2)
    grid = GridSpec((nx, ny), (TWO_PI, 3.0), ("periodic", "noflux"))
    return RunConfig(
        grid, DENDRITE_2D.replace(K=0.75), SchemeKind.SIEQ, 150.0,
        NucleusIC((math.pi, 0.0), 0.02, 0.072, -0.55),
        sample_every=10, outputs=Outputs(images=True, render_every=1000), name="dendrite-halfplane",
    )


def _dendrite_3d(K: float, t_final: float, name: str) -> Callable[[bool], RunConfig]:
    def build(full_scale: bool) -> RunConfig:
        return RunConfig(
            _square(128 if full_scale else 64, 3), DENDRITE_3D.replace(K=K), SchemeKind.SIEQ,
            t_final, NucleusIC((math.pi,) * 3, 0.02, 0.072, -0.55),
            sample_every=10, outputs=Outputs(images=True, render_every=1000), name=name,
        )
    return build


PRESETS: dict[str, Callable[[bool], RunConfig]] = {
    "accuracy-2d": _accuracy,
    "mms": _accuracy,
    **{f"circle-{k.value}": _circle(k) for k in SchemeKind},
    "dendrite-2d-k05": _dendrite_2d(4, 0.5, 100.0, "dendrite-2d-k05"),
    "dendrite-2d-k06": _dendrite_2d(4, 0.6, 120.0, "dendrite-2d-k06"),
    "dendrite-2d-k07": _dendrite_2d(4, 0.7, 160.0, "dendrite-2d-k07"),
    "dendrite-2d-k08": _dendrite_2d(4, 0.8, 200.0, "dendrite-2d-k08"),
    "dendrite-halfplane": _halfplane,
    "dendrite-6fold-k06": _dendrite_2d(6, 0.6, 130.0, "dendrite-6fold-k06"),
    "dendrite-6fold-k07": _dendrite_2d(6, 0.7, 140.0, "dendrite-6fold-k07"),
    "dendrite-6fold-k075": _dendrite_2d(6, 0.75, 180.0, "dendrite-6fold-k075"),
    "dendrite-6fold-k08": _dendrite_2d(6, 0.8, 180.0, "dendrite-6fold-k08"),
    "dendrite-5fold": _dendrite_2d(5, 0.5, 170.0, "dendrite-5fold"),
    "dendrite-7fold": _dendrite_2d(7, 0.5, 200.0, "dendrite-7fold"),
    "dendrite-3d-k05": _dendrite_3d(0.5, 900.0, "dendrite-3d-k05"),
    "dendrite-3d-k1": _dendrite_3d(1.0, 1500.0, "dendrite-3d-k1"),
    "dendrite-3d-k15": _dendrite_3d(1.5, 2100.0, "dendrite-3d-k15"),
    "dendrite-3d-k2": _dendrite_3d(2.0, 2700.0, "dendrite-3d-k2"),
}


def preset_names() -> list[str]:
    return sorted(PRESETS)


def preset(name: str, full_scale: bool = False) -> RunConfig:
    """Fully populated configuration of a named benchmark."""
    try:
        build = PRESETS[name]
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(preset_names())}") from None
    return build(full_scale)
