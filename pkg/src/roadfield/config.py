"""Flat `key = value` run configuration.

One assignment per line, `#` starts a comment, blank lines are ignored.
Unknown keys are hard errors, every value is range-checked at parse
time, and each error names the offending line.  Later assignments of
the same key win, which is also how `--set key=value` overrides work.
serialize_config writes every key explicitly, so a parsed copy of a
serialized config compares equal to the original.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError, ConfigRangeError, ConfigTypeError, UnknownKeyError
from .grid import Grading
from .model import CutoffProfile, ModelKind, Parameters
from .timesim import SimParams
from .wavesolver import ContinuationSchedule, NewtonConfig

__all__ = [
    "RunConfig",
    "parse_config",
    "serialize_config",
    "apply_overrides",
    "document_defaults",
    "model_parameters",
    "cutoff_profile",
    "schedule",
    "newton_config",
    "sim_params",
]

SWEEPABLE = ("D", "d", "mu", "nu", "L", "eps_final")


@dataclass(frozen=True)
class RunConfig:
    """Every run-time knob of the command line, flat and diffable."""

    model: str = "single"
    d: float = 1.0
    D: float = 2.0
    mu: float = 1.0
    nu: float = 1.0
    L: float = 2.0
    x_min: float = -16.0
    x_max: float = 16.0
    pin_x: float = 0.0
    eps_schedule: tuple = (0.2, 0.1, 0.05, 0.02)
    nx: int = 512
    ny: int = 128
    grading_x: float | None = None
    grading_y: float | None = None
    regrid_each_stage: bool = True
    newton_tol: float = 1e-9
    newton_max_iterations: int = 40
    newton_linear_solver: str = "direct"
    front_level: float | None = None
    sim_T: float = 40.0
    sim_snapshots: tuple = (10.0, 20.0, 30.0, 40.0)
    sim_depth: float = 40.0
    sim_half_width: float = 120.0
    sim_delta: float = 0.25
    sim_dt: float | None = None
    sim_level: float = 0.5
    sim_wentzell: bool = False
    sim_reaction: bool = True
    seed: int = 12345
    threads: int = 0
    out: str = "out"
    input: str = ""
    sweep_parameter: str = ""
    sweep_values: tuple = ()


def _float(raw):
    try:
        val = float(raw)
    except ValueError:
        raise _Bad("a number")
    if not math.isfinite(val):
        raise _Bad("a finite number")
    return val


def _int(raw):
    try:
        return int(raw)
    except ValueError:
        raise _Bad("an integer")


def _bool(raw):
    if raw.lower() in ("true", "1", "yes"):
        return True
    if raw.lower() in ("false", "0", "no"):
        return False
    raise _Bad("true or false")


def _floats(raw):
    if raw.strip() == "":
        return ()
    return tuple(_float(part.strip()) for part in raw.split(","))


def _opt_float(raw):
    if raw.strip().lower() == "auto":
        return None
    return _float(raw)


def _str(raw):
    return raw


class _Bad(Exception):
    """Internal: carries the expected-type phrase to the reporting site."""


def _positive(v):
    return v is None or v > 0.0


def _decreasing(v):
    return len(v) > 0 and all(a > b for a, b in zip(v, v[1:])) and v[-1] > 0.0


def _sorted_nonneg(v):
    return all(q >= 0.0 for q in v) and list(v) == sorted(v)


# key -> (parser, validity predicate, range-requirement text)
_SCHEMA = {
    "model": (_str, lambda v: v in ("single", "two"), "single or two"),
    "d": (_float, _positive, "> 0"),
    "D": (_float, _positive, "> 0"),
    "mu": (_float, _positive, "> 0"),
    "nu": (_float, _positive, "> 0"),
    "L": (_float, _positive, "> 0"),
    "x_min": (_float, lambda v: v < 0.0, "< 0"),
    "x_max": (_float, _positive, "> 0"),
    "pin_x": (_float, math.isfinite, "finite"),
    "eps_schedule": (_floats, _decreasing, "strictly decreasing, all > 0"),
    "nx": (_int, lambda v: v >= 16, ">= 16"),
    "ny": (_int, lambda v: v >= 16, ">= 16"),
    "grading_x": (_opt_float, lambda v: v is None or v >= 1.0, "auto or >= 1"),
    "grading_y": (_opt_float, lambda v: v is None or v >= 1.0, "auto or >= 1"),
    "regrid_each_stage": (_bool, lambda v: True, ""),
    "newton_tol": (_float, _positive, "> 0"),
    "newton_max_iterations": (_int, lambda v: v >= 1, ">= 1"),
    "newton_linear_solver": (_str, lambda v: v in ("direct", "krylov"),
                             "direct or krylov"),
    "front_level": (_opt_float, lambda v: v is None or 0.0 < v < 1.0,
                    "auto or in (0, 1)"),
    "sim_T": (_float, lambda v: v >= 0.0, ">= 0"),
    "sim_snapshots": (_floats, _sorted_nonneg, "sorted, all >= 0"),
    "sim_depth": (_float, _positive, "> 0"),
    "sim_half_width": (_float, _positive, "> 0"),
    "sim_delta": (_float, _positive, "> 0"),
    "sim_dt": (_opt_float, _positive, "auto or > 0"),
    "sim_level": (_float, lambda v: 0.0 < v < 1.0, "in (0, 1)"),
    "sim_wentzell": (_bool, lambda v: True, ""),
    "sim_reaction": (_bool, lambda v: True, ""),
    "seed": (_int, lambda v: v >= 0, ">= 0"),
    "threads": (_int, lambda v: v >= 0, ">= 0 (0 = auto)"),
    "out": (_str, lambda v: v != "", "nonempty"),
    "input": (_str, lambda v: True, ""),
    "sweep_parameter": (_str, lambda v: v == "" or v in SWEEPABLE,
                        "one of " + ", ".join(SWEEPABLE)),
    "sweep_values": (_floats, lambda v: True, ""),
}


def _parse_assignment(line, where):
    if "=" not in line:
        raise ConfigError(f"{where}: expected 'key = value', got {line!r}")
    key, _, raw = line.partition("=")
    key = key.strip()
    raw = raw.strip()
    if key not in _SCHEMA:
        raise UnknownKeyError(f"{where}: unknown key {key!r}")
    parser, check, requirement = _SCHEMA[key]
    try:
        val = parser(raw)
    except _Bad as bad:
        raise ConfigTypeError(
            f"{where}: {key} expects {bad.args[0]}, got {raw!r}"
        ) from None
    if not check(val):
        raise ConfigRangeError(f"{where}: {key} must be {requirement}, got {raw!r}")
    return key, val


def parse_config(text: str) -> RunConfig:
    values = {}
    for n, full_line in enumerate(text.splitlines(), start=1):
        line = full_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, val = _parse_assignment(line, f"line {n}")
        values[key] = val
    cfg = RunConfig(**values)
    _cross_checks(cfg)
    return cfg


def apply_overrides(cfg: RunConfig, assignments) -> RunConfig:
    """Apply `key=value` strings (the --set flag) on top of cfg."""
    values = {}
    for text in assignments:
        key, val = _parse_assignment(text, f"override {text!r}")
        values[key] = val
    out = replace(cfg, **values)
    _cross_checks(out)
    return out


def _cross_checks(cfg):
    if not cfg.x_min < cfg.pin_x < cfg.x_max:
        raise ConfigRangeError(
            f"pin_x = {cfg.pin_x} outside the window "
            f"[{cfg.x_min}, {cfg.x_max}]"
        )
    if cfg.sweep_parameter and not cfg.sweep_values:
        raise ConfigRangeError("sweep_parameter set but sweep_values is empty")
    if cfg.sim_snapshots and cfg.sim_snapshots[-1] > cfg.sim_T:
        raise ConfigRangeError(
            f"sim_snapshots reach {cfg.sim_snapshots[-1]} beyond sim_T = {cfg.sim_T}"
        )


def _show(val):
    if val is None:
        return "auto"
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, tuple):
        return ", ".join(repr(q) for q in val)
    if isinstance(val, float):
        return repr(val)
    return str(val)


def serialize_config(cfg: RunConfig) -> str:
    lines = [f"{key} = {_show(getattr(cfg, key))}" for key in _SCHEMA]
    return "\n".join(lines) + "\n"


def document_defaults() -> str:
    """Key table with defaults and ranges, for --help and the docs."""
    cfg = RunConfig()
    width = max(len(k) for k in _SCHEMA)
    lines = []
    for key, (_, _, requirement) in _SCHEMA.items():
        req = f"  ({requirement})" if requirement else ""
        lines.append(f"  {key:<{width}} = {_show(getattr(cfg, key))}{req}")
    return "\n".join(lines)


def model_parameters(cfg: RunConfig, eps: float | None = None) -> Parameters:
    kind = ModelKind.SINGLE if cfg.model == "single" else ModelKind.TWO
    return Parameters(
        d=cfg.d, D=cfg.D, mu=cfg.mu, nu=cfg.nu, L=cfg.L,
        eps=cfg.eps_schedule[0] if eps is None else eps,
        x_min=cfg.x_min, x_max=cfg.x_max, pin_x=cfg.pin_x, model_kind=kind,
    )


def cutoff_profile(cfg: RunConfig) -> CutoffProfile:
    return CutoffProfile.for_diffusivity(cfg.d)


def schedule(cfg: RunConfig) -> ContinuationSchedule:
    grading = None
    if cfg.grading_x is not None or cfg.grading_y is not None:
        grading = Grading(x_factor=cfg.grading_x, y_factor=cfg.grading_y)
    return ContinuationSchedule(
        eps_values=cfg.eps_schedule, nx=cfg.nx, ny=cfg.ny,
        grading=grading, regrid_each_stage=cfg.regrid_each_stage,
    )


def newton_config(cfg: RunConfig) -> NewtonConfig:
    return NewtonConfig(
        tol=cfg.newton_tol,
        max_iterations=cfg.newton_max_iterations,
        linear_solver=cfg.newton_linear_solver,
    )


def sim_params(cfg: RunConfig) -> SimParams:
    return SimParams(
        D=cfg.D, d=cfg.d, mu=cfg.mu, nu=cfg.nu,
        L_sim=cfg.sim_depth, half_width=cfg.sim_half_width,
        delta=cfg.sim_delta, level=cfg.sim_level,
        wentzell=cfg.sim_wentzell, reaction=cfg.sim_reaction,
    )
