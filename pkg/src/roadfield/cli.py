"""Command line driver and the CSV emitters behind it.

Subcommands: wave (2D travelling wave through the eps continuation),
wave1d (the 1D speed oracle), simulate (time-dependent invasion),
front-fit (contact asymptotics of the free boundary), verify (check
report on a solved wave, by default the bundled fixture), and sweep
(one wave pipeline per parameter value on a worker pool).

Exit codes: 0 success, 2 configuration error, 3 solver or analysis
failure, 4 verification check failure, 5 I/O failure.  Outputs are
CSV and SVG only; every output directory receives a copy of the
resolved configuration, and identical configurations produce byte
identical CSV files.
"""

from __future__ import annotations

import argparse
import importlib.resources
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .assembly import WaveSolution
from .diagnostics import default_checks, reports_to_csv, reports_to_text
from .errors import ConfigError, DomainError, NonFiniteDataError, RoadFieldError
from .front import (
    FitKind,
    default_fit_window,
    extract_front,
    fit_contact,
    front_to_csv,
    richardson,
)
from .grid import Grid
from .model import CutoffProfile, ModelKind, Parameters
from .svgplot import SvgStyle, field_svg, report_svg
from .timesim import edge_to_csv, leading_edge, run_invasion, state_to_csv
from .wavesolver import continue_in_eps, solve_wave_1d

__all__ = [
    "main",
    "console_main",
    "solution_to_csv",
    "solution_from_csv",
]

_FMT = "%.17g"


def solution_to_csv(solution: WaveSolution, params: Parameters) -> str:
    """Wave solution with enough header context to re-run the checks."""
    g = solution.grid
    kind = "two" if solution.u is not None else "single"
    lines = [
        "# travelling wave solution",
        f"# kind={kind} eps={_FMT % params.eps} c={_FMT % solution.c} "
        f"converged={int(solution.converged)}",
        f"# d={_FMT % params.d} D={_FMT % params.D} mu={_FMT % params.mu} "
        f"nu={_FMT % params.nu} L={_FMT % params.L} "
        f"pin_x={_FMT % params.pin_x}",
        "# x," + ",".join(_FMT % q for q in g.x_nodes),
        "# y," + ",".join(_FMT % q for q in g.y_nodes),
    ]
    if solution.u is not None:
        lines.append("# u," + ",".join(_FMT % q for q in solution.u))
    for j in range(g.ny):
        lines.append(",".join(_FMT % q for q in solution.v[j]))
    return "\n".join(lines) + "\n"


def solution_from_csv(text: str) -> tuple[WaveSolution, Parameters]:
    """Inverse of solution_to_csv."""
    meta = {}
    axes = {}
    u = None
    rows = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith(("x,", "y,", "u,")):
                name, _, rest = body.partition(",")
                arr = np.array([float(q) for q in rest.split(",")])
                if name == "u":
                    u = arr
                else:
                    axes[name] = arr
            else:
                for token in body.split():
                    if "=" in token:
                        key, _, val = token.partition("=")
                        meta[key] = val
            continue
        rows.append([float(q) for q in line.split(",")])
    if "x" not in axes or "y" not in axes or "eps" not in meta:
        raise ConfigError("not a travelling wave solution file")
    v = np.array(rows)
    grid = Grid(x_nodes=axes["x"], y_nodes=axes["y"])
    if v.shape != (grid.ny, grid.nx):
        raise ConfigError(
            f"field block {v.shape} does not match the axes "
            f"({grid.ny}, {grid.nx})"
        )
    kind = ModelKind.TWO if meta.get("kind") == "two" else ModelKind.SINGLE
    params = Parameters(
        d=float(meta["d"]), D=float(meta["D"]), mu=float(meta["mu"]),
        nu=float(meta["nu"]), L=float(meta["L"]), eps=float(meta["eps"]),
        x_min=float(grid.x_nodes[0]), x_max=float(grid.x_nodes[-1]),
        pin_x=float(meta.get("pin_x", "0")), model_kind=kind,
    )
    solution = WaveSolution(grid=grid, v=v, u=u, c=float(meta["c"]),
                            converged=meta.get("converged") == "1")
    return solution, params


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _emit_config(cfg, out: Path):
    _write(out / "config.txt", cfgmod.serialize_config(cfg))


def _solve_chain(cfg):
    params = cfgmod.model_parameters(cfg)
    profile = cfgmod.cutoff_profile(cfg)
    stages = continue_in_eps(cfgmod.schedule(cfg), params, profile,
                             config=cfgmod.newton_config(cfg))
    return params, profile, stages


def _stages_csv(cfg, stages) -> str:
    lines = ["eps,c,iterations,converged"]
    for eps, sol in zip(cfg.eps_schedule, stages):
        lines.append(f"{eps:.17g},{sol.c:.17g},{len(sol.newton_history)},"
                     f"{int(sol.converged)}")
    return "\n".join(lines) + "\n"


def _fit_stage(cfg, params, solution, eps):
    """Front, window, and contact fit of one continuation stage."""
    level = cfg.front_level if cfg.front_level is not None else eps
    front = extract_front(solution, level)
    window = default_fit_window(front, solution.grid)
    if params.model_kind is ModelKind.SINGLE:
        fit = fit_contact(front, FitKind.QUADRATIC, window, solution=solution)
    else:
        fit = fit_contact(front, FitKind.LINEAR, window, solution=solution,
                          mu=params.mu)
    return front, fit


def _extrapolate(cfg, params, stages):
    """Richardson estimate over the last two stages plus its reference."""
    e0, e1 = cfg.eps_schedule[-2], cfg.eps_schedule[-1]
    _, fit0 = _fit_stage(cfg, params, stages[-2], e0)
    front1, fit1 = _fit_stage(cfg, params, stages[-1], e1)
    if params.model_kind is ModelKind.SINGLE:
        # the curvature converges at order one half in eps
        est = richardson(fit0.coefficient, fit1.coefficient, e0, e1,
                         exponent=0.5)
        ref = 1.0 / (2.0 * params.D)
    else:
        est = richardson(fit0.coefficient, fit1.coefficient, e0, e1)
        lam = fit1.lambda_hat
        ref = np.sqrt(1.0 - lam * lam) / lam
    rel = abs(est - ref) / abs(ref)
    return front1, (fit0, fit1), est, ref, rel


def _fit_csv(cfg, params, stages) -> str:
    front1, fits, est, ref, rel = _extrapolate(cfg, params, stages)
    lines = [
        f"# richardson={est:.17g} reference={ref:.17g} rel_err={rel:.17g}",
        "eps,kind,coefficient,residual,n_points,r_min,r_max,lambda_hat",
    ]
    for eps, fit in zip(cfg.eps_schedule[-2:], fits):
        lam = "" if fit.lambda_hat is None else f"{fit.lambda_hat:.17g}"
        lines.append(
            f"{eps:.17g},{fit.kind.value},{fit.coefficient:.17g},"
            f"{fit.residual:.17g},{fit.n_points},{fit.window[0]:.17g},"
            f"{fit.window[1]:.17g},{lam}"
        )
    return "\n".join(lines) + "\n"


def _cmd_wave(cfg, out: Path) -> int:
    params, _, stages = _solve_chain(cfg)
    final = stages[-1]
    eps = cfg.eps_schedule[-1]
    level = cfg.front_level if cfg.front_level is not None else eps
    front = extract_front(final, level)
    _write(out / "solution.csv",
           solution_to_csv(final, replace(params, eps=eps)))
    _write(out / "front.csv", front_to_csv(front, eps))
    _write(out / "stages.csv", _stages_csv(cfg, stages))
    g = final.grid
    style = SvgStyle(levels=(level,), title=f"travelling wave, eps = {eps:g}",
                     vmin=0.0)
    _write(out / "contour.svg", field_svg(g.x_nodes, g.y_nodes, final.v, style))
    _emit_config(cfg, out)
    print(f"wave: c = {final.c:.6f} at eps = {eps:g} "
          f"({len(stages)} stages) -> {out}")
    return 0


def _cmd_wave1d(cfg, out: Path) -> int:
    eps = cfg.eps_schedule[-1]
    params = cfgmod.model_parameters(cfg, eps=eps)
    sol = solve_wave_1d(params, cfgmod.cutoff_profile(cfg), eps,
                        n=max(cfg.nx, 17), config=cfgmod.newton_config(cfg))
    lines = [
        f"# c={sol.c:.17g} eps={eps:.17g} d={params.d:.17g} "
        f"converged={int(sol.converged)}",
        "x,u",
    ]
    for xq, uq in zip(sol.x_nodes, sol.u):
        lines.append(f"{xq:.17g},{uq:.17g}")
    _write(out / "profile1d.csv", "\n".join(lines) + "\n")
    _emit_config(cfg, out)
    print(f"wave1d: c = {sol.c:.9f} at eps = {eps:g} -> {out}")
    return 0


def _cmd_simulate(cfg, out: Path) -> int:
    params = cfgmod.sim_params(cfg)
    times = cfg.sim_snapshots or (cfg.sim_T,)
    snaps = run_invasion(params, cfg.sim_T, times, dt=cfg.sim_dt)
    for state in snaps:
        tag = f"t{state.t:g}"
        _write(out / f"snapshot_{tag}.csv", state_to_csv(state))
        g = state.grid
        style = SvgStyle(levels=(params.level,),
                         title=f"invasion, t = {state.t:g}",
                         vmin=0.0, vmax=1.0)
        _write(out / f"snapshot_{tag}.svg",
               field_svg(g.x_nodes, g.y_nodes, state.v, style))
        edge = leading_edge(state, params.level)
        _write(out / f"edge_{tag}.csv", edge_to_csv(edge))
        m = "none" if edge.margin is None else f"{edge.margin:.4f}"
        print(f"simulate t={state.t:g}: y* = {edge.y_star:.4f}, "
              f"margin = {m}")
    _emit_config(cfg, out)
    return 0


def _cmd_front_fit(cfg, out: Path) -> int:
    if len(cfg.eps_schedule) < 2:
        raise ConfigError("front-fit needs at least two eps stages "
                          "for the extrapolation")
    params, _, stages = _solve_chain(cfg)
    _write(out / "contact_fit.csv", _fit_csv(cfg, params, stages))
    front1, _, est, ref, rel = _extrapolate(cfg, params, stages)
    _write(out / "front.csv", front_to_csv(front1, cfg.eps_schedule[-1]))
    _emit_config(cfg, out)
    print(f"front-fit: estimate = {est:.6f}, reference = {ref:.6f}, "
          f"relative error = {rel:.3f} -> {out}")
    return 0


def _bundled_fixture() -> str:
    root = importlib.resources.files("roadfield")
    return (root / "fixtures" / "single_eps0.1" / "solution.csv").read_text()


def _cmd_verify(cfg, out: Path) -> int:
    if cfg.input:
        text = Path(cfg.input).read_text()
    else:
        text = _bundled_fixture()
    solution, params = solution_from_csv(text)
    profile = CutoffProfile.for_diffusivity(params.d)
    reports = default_checks(solution, params, profile, seed=cfg.seed)
    _write(out / "checks.csv", reports_to_csv(reports))
    _write(out / "checks.svg", report_svg(reports))
    _emit_config(cfg, out)
    print(reports_to_text(reports), end="")
    return 0 if all(r.passed for r in reports) else 4


def _derive_sweep_case(cfg, value: float):
    if cfg.sweep_parameter == "eps_final":
        kept = tuple(e for e in cfg.eps_schedule if e > value)
        return replace(cfg, eps_schedule=kept + (value,))
    return replace(cfg, **{cfg.sweep_parameter: value})


def _sweep_one(cfg, value, out: Path):
    sub = _derive_sweep_case(cfg, value)
    params, _, stages = _solve_chain(sub)
    final = stages[-1]
    eps = sub.eps_schedule[-1]
    _write(out / "solution.csv",
           solution_to_csv(final, replace(params, eps=eps)))
    _write(out / "stages.csv", _stages_csv(sub, stages))
    _emit_config(sub, out)
    if len(sub.eps_schedule) >= 2:
        _, _, est, ref, rel = _extrapolate(sub, params, stages)
    else:
        est = ref = rel = float("nan")
    return {"value": value, "c": final.c, "estimate": est,
            "reference": ref, "rel_err": rel}


def _cmd_sweep(cfg, out: Path, threads: int) -> int:
    if not cfg.sweep_parameter:
        raise ConfigError("sweep needs sweep_parameter (and sweep_values)")
    dirs = [out / f"{cfg.sweep_parameter}={v:g}" for v in cfg.sweep_values]
    workers = threads if threads > 0 else None
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_sweep_one, cfg, v, d)
                   for v, d in zip(cfg.sweep_values, dirs)]
        results = []
        failures = 0
        for v, fut in zip(cfg.sweep_values, futures):
            try:
                results.append(fut.result())
            except RoadFieldError as exc:
                failures += 1
                results.append({"value": v, "c": float("nan"),
                                "estimate": float("nan"),
                                "reference": float("nan"),
                                "rel_err": float("nan"),
                                "error": f"{type(exc).__name__}: {exc}"})
    lines = ["parameter,value,c,estimate,reference,rel_err,error"]
    for row in results:
        lines.append(
            f"{cfg.sweep_parameter},{row['value']:.17g},{row['c']:.17g},"
            f"{row['estimate']:.17g},{row['reference']:.17g},"
            f"{row['rel_err']:.17g},{row.get('error', '')}"
        )
    _write(out / "summary.csv", "\n".join(lines) + "\n")
    _emit_config(cfg, out)
    for row in results:
        note = row.get("error", f"c = {row['c']:.6f}")
        print(f"sweep {cfg.sweep_parameter} = {row['value']:g}: {note}")
    print(f"sweep summary -> {out / 'summary.csv'}")
    return 3 if failures else 0


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="key = value configuration file")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (default from config)")
    common.add_argument("--threads", type=int, metavar="N",
                        help="worker pool size for sweep (0 = all cores)")
    common.add_argument("--seed", type=int, metavar="N",
                        help="seed for randomized checks")
    common.add_argument("--set", action="append", default=[],
                        metavar="KEY=VALUE", dest="overrides",
                        help="override one configuration key (repeatable)")

    parser = argparse.ArgumentParser(
        prog="roadfield",
        description="Travelling waves and invasions for reaction-diffusion "
                    "fields coupled to a line of fast diffusion.",
        epilog="configuration keys and defaults:\n"
               + cfgmod.document_defaults()
               + "\n\nexit codes: 0 ok, 2 config error, 3 solver failure, "
                 "4 check failure, 5 I/O error",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("wave", "solve the 2D travelling wave through the eps schedule"),
        ("wave1d", "solve the 1D wave, the unit-speed oracle"),
        ("simulate", "run the time-dependent invasion"),
        ("front-fit", "fit the free-boundary contact asymptotics"),
        ("verify", "run the check suite on a solved wave"),
        ("sweep", "repeat the wave pipeline over a parameter list"),
    ):
        sub.add_parser(name, parents=[common], help=text)
    return parser


def _resolve_config(args):
    if args.config is not None:
        cfg = cfgmod.parse_config(Path(args.config).read_text())
    else:
        cfg = cfgmod.RunConfig()
    if args.overrides:
        cfg = cfgmod.apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.threads is not None:
        cfg = replace(cfg, threads=args.threads)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        out = Path(cfg.out)
        if args.command == "wave":
            return _cmd_wave(cfg, out)
        if args.command == "wave1d":
            return _cmd_wave1d(cfg, out)
        if args.command == "simulate":
            return _cmd_simulate(cfg, out)
        if args.command == "front-fit":
            return _cmd_front_fit(cfg, out)
        if args.command == "verify":
            return _cmd_verify(cfg, out)
        return _cmd_sweep(cfg, out, cfg.threads)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NonFiniteDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except RoadFieldError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 5


def console_main():
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
