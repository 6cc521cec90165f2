"""Command-line driver.

Exit status is 0 on success, 3 when a run diverges and 2 for configuration
or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .config import (
    ACCURACY, CircleIC, ConfigError, GridSpec, MMSIC, RunConfig, config_to_dict, initial_fields,
    load_config, preset, preset_names,
)
from .diagnostics import Scenario, convergence_order, l2_error, mms_exact, stability_sweep
from .io import dump_field, field_meta, render_image, write_energy_csv
from .schemes import SchemeKind, startup
from .simulation import RunResult, run_simulation

__all__ = ["main", "build_parser", "execute", "EXIT_OK", "EXIT_CONFIG", "EXIT_DIVERGED"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

log = logging.getLogger("dendrite")


def execute(cfg: RunConfig, out_dir: Path | None = None) -> RunResult:
    """Run ``cfg`` and write its outputs under ``out_dir`` (default ``cfg.output_dir``)."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config_to_dict(cfg), indent=1) + "\n")
    grid = cfg.build_grid()
    phi0, u0 = initial_fields(grid, cfg.initial_condition)
    every = cfg.outputs.render_every

    def snapshot(state):
        tag = f"{state.step:07d}"
        if cfg.outputs.fields:
            for name, f in (("phi", state.phi), ("u", state.u)):
                dump_field(f, out / f"{name}_{tag}.f64", field_meta(grid, state.t, name))
        if cfg.outputs.images:
            render_image(state.phi, out / f"phi_{tag}.pgm")

    def on_step(state, _stats):
        if every and state.step % every == 0:
            snapshot(state)

    if cfg.outputs.fields or cfg.outputs.images:
        snapshot(startup(grid, phi0, u0, cfg.params, cfg.scheme))
    result = run_simulation(
        grid, cfg.params, cfg.scheme, phi0, u0, cfg.t_final,
        sample_every=cfg.sample_every, forcing=cfg.forcing(grid), callback=on_step,
        solver_options=cfg.solver,
    )
    if (cfg.outputs.fields or cfg.outputs.images) and not (every and result.state.step % every == 0):
        snapshot(result.state)
    if cfg.outputs.csv:
        write_energy_csv(out / "energy.csv", result.records, cfg.scheme.quadratized,
                         result.diverged_at, result.divergence_reason)
    return result


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    params = cfg.params
    changes = {}
    if args.dt is not None:
        changes["dt"] = args.dt
    if args.m is not None:
        changes["m"] = args.m
    if args.K is not None:
        changes["K"] = args.K
    try:
        params = params.replace(**changes)
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from None
    update = {"params": params}
    if args.scheme is not None:
        update["scheme"] = SchemeKind(args.scheme)
    if args.t_final is not None:
        if not args.t_final > 0:
            raise ConfigError("t_final", "must be positive")
        update["t_final"] = args.t_final
    if args.out is not None:
        update["output_dir"] = args.out
    if args.render_every is not None:
        if args.render_every < 1:
            raise ConfigError("outputs.render_every", "must be >= 1")
        update["outputs"] = type(cfg.outputs)(
            csv=cfg.outputs.csv, fields=cfg.outputs.fields, images=True, render_every=args.render_every
        )
    return cfg.replace(**update)


def _report(result: RunResult) -> int:
    last = result.records[-1]
    if result.diverged:
        print(f"diverged at step {result.diverged_at}: {result.divergence_reason}")
        return EXIT_DIVERGED
    print(f"finished step {last.step} t={last.time:g} e_original={last.e_original:.10g} "
          f"radius={last.radius:.6g}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.full_scale:
        print("--full-scale applies to presets only; using the grid from the file", file=sys.stderr)
    return _report(execute(_apply_overrides(cfg, args)))


def _cmd_preset(args) -> int:
    if args.list:
        print("\n".join(preset_names()))
        return EXIT_OK
    if not args.name:
        raise ConfigError("preset", "a preset name is required (see --list)")
    cfg = preset(args.name, full_scale=args.full_scale)
    if args.out is None:
        cfg = cfg.replace(output_dir=str(Path("out") / cfg.name))
    return _report(execute(_apply_overrides(cfg, args)))


def _study_params(base, args):
    changes = {k: v for k, v in (("m", args.m), ("K", args.K)) if v is not None}
    try:
        return base.replace(**changes)
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from None


def _cmd_mms(args) -> int:
    grid = GridSpec((args.n, args.n), (2 * math.pi,) * 2).build()
    params = _study_params(ACCURACY, args)
    dts = sorted(args.dts, reverse=True)
    kinds = [SchemeKind(s) for s in args.schemes]
    t_final = args.t_final or 1.0
    phi_e, u_e, _, _ = mms_exact(grid, t_final)
    rows = []
    for kind in kinds:
        ep, eu = [], []
        for dt in dts:
            cfg = RunConfig(GridSpec(grid.n, grid.length), params.replace(dt=dt), kind, t_final, MMSIC())
            phi0, u0 = initial_fields(grid, cfg.initial_condition)
            res = run_simulation(grid, cfg.params, kind, phi0, u0, t_final, sample_every=10**9,
                                 forcing=cfg.forcing(grid))
            ep.append(l2_error(grid, res.state.phi, phi_e) if not res.diverged else math.inf)
            eu.append(l2_error(grid, res.state.u, u_e) if not res.diverged else math.inf)
            rows.append((kind.value, dt, ep[-1], eu[-1], res.diverged_at))
            print(f"{kind.value:5s} dt={dt:<10g} err_phi={ep[-1]:.6e} err_u={eu[-1]:.6e}"
                  + (f" diverged at step {res.diverged_at}" if res.diverged else ""))
        if all(map(math.isfinite, ep + eu)) and len(dts) >= 3:
            rep = convergence_order(dts, ep, eu)
            print(f"{kind.value:5s} fitted order phi={rep.order_phi:.3f} u={rep.order_u:.3f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "mms_convergence.csv").open("w") as fh:
            fh.write("scheme,dt,error_phi,error_u,diverged_at\n")
            for kind, dt, a, b, d in rows:
                fh.write(f"{kind},{dt!r},{a!r},{b!r},{'' if d is None else d}\n")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    kinds = [SchemeKind(s) for s in args.schemes]
    grid = GridSpec((args.n, args.n), (2 * math.pi,) * 2).build()
    if args.scenario == "circle":
        ic = CircleIC((math.pi, math.pi), 1.5, 0.072, -0.55)
        params, forcing = _study_params(ACCURACY.replace(eps4=0.25), args), None
        t_final = args.t_final or 20.0
    else:
        ic = MMSIC()
        params = _study_params(ACCURACY, args)
        forcing = RunConfig(GridSpec(grid.n, grid.length), params, kinds[0], 1.0, ic).forcing(grid)
        t_final = args.t_final or 1.0
    phi0, u0 = initial_fields(grid, ic)
    scenario = Scenario(args.scenario, grid, params, phi0, u0, t_final, forcing)
    outcomes = stability_sweep(scenario, kinds, args.dts)
    for o in outcomes:
        status = "converged" if o.converged else f"diverged at step {o.diverged_at}"
        print(f"{o.kind.value:5s} dt={o.dt:<8g} {status:24s} final_energy={o.final_energy:.10g} "
              f"monotone={o.energy_monotone}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "stability_sweep.csv").open("w") as fh:
            fh.write("scheme,dt,diverged_at,n_steps,final_energy,energy_monotone\n")
            for o in outcomes:
                fh.write(f"{o.kind.value},{o.dt!r},{'' if o.converged else o.diverged_at},"
                         f"{o.n_steps},{o.final_energy!r},{int(o.energy_monotone)}\n")
    return EXIT_OK


def _add_study_options(p: argparse.ArgumentParser):
    p.add_argument("--t-final", type=float, dest="t_final", help="final time")
    p.add_argument("--out", help="output directory")
    p.add_argument("--m", type=int, help="fold count of the anisotropy")
    p.add_argument("--K", type=float, help="latent-heat coefficient")


def _add_overrides(p: argparse.ArgumentParser):
    _add_study_options(p)
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--scheme", choices=[k.value for k in SchemeKind], help="time integrator")
    p.add_argument("--full-scale", action="store_true", help="use the full-resolution grid")
    p.add_argument("--render-every", type=int, dest="render_every", metavar="STEPS",
                   help="write a PGM snapshot every STEPS steps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dendrite", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a JSON configuration")
    p.add_argument("config")
    _add_overrides(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("preset", help="run a named benchmark")
    p.add_argument("name", nargs="?")
    p.add_argument("--list", action="store_true", help="list preset names")
    _add_overrides(p)
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("mms-convergence", help="temporal convergence against the manufactured solution")
    p.add_argument("--schemes", nargs="+", default=["sls", "sieq"], choices=[k.value for k in SchemeKind])
    p.add_argument("--dts", nargs="+", type=float, default=[1e-2, 5e-3, 2.5e-3, 1.25e-3])
    p.add_argument("--n", type=int, default=128, help="points per axis")
    _add_study_options(p)
    p.set_defaults(func=_cmd_mms)

    p = sub.add_parser("stability-sweep", help="run every (scheme, dt) pair and report divergence")
    p.add_argument("--scenario", choices=["circle", "mms"], default="circle")
    p.add_argument("--schemes", nargs="+", default=[k.value for k in SchemeKind],
                   choices=[k.value for k in SchemeKind])
    p.add_argument("--dts", nargs="+", type=float, default=[1.0, 1e-1, 1e-2, 1e-3])
    p.add_argument("--n", type=int, default=128, help="points per axis")
    _add_study_options(p)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
