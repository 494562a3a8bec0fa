"""Damped-Newton and continuation drivers for the travelling-wave systems.

The assembled systems are square bordered sparse matrices (field nodes,
optional road nodes, then the speed; the last row pins the front), so a
single Newton loop serves the 2D systems and the 1D speed oracle alike.
Damping is Armijo backtracking on the residual max-norm; the reaction
term has Lipschitz constant of order 1/eps^2, which is what the damping
is there for.
"""

from dataclasses import dataclass, field as dfield, replace
import inspect
import math
import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator

from .assembly import SparseSystem, WaveSolution, assemble_1d, assemble_single, assemble_two
from .errors import (
    DomainError,
    GridResolutionWarning,
    NegativeSpeedError,
    NonConvergenceError,
    SingularLinearSystemError,
)
from .grid import Grading, build_grid, build_grid_1d
from .model import CutoffProfile, ModelKind, Parameters

__all__ = [
    "NewtonConfig",
    "ContinuationSchedule",
    "Wave1DSolution",
    "newton_solve",
    "continue_in_eps",
    "solve_wave_1d",
    "krylov_solve",
    "initial_from_1d",
    "interpolate_state",
]

# scipy renamed the gmres tolerance keyword; pick whichever this one has
_GMRES_TOL_KW = "rtol" if "rtol" in inspect.signature(spla.gmres).parameters else "tol"


@dataclass(frozen=True)
class NewtonConfig:
    """Damping, stopping, and linear-solver knobs for the Newton driver."""

    tol: float = 1e-9
    # the contraction tail flattens near D ~ 4 with eps at the fine end of
    # the usual schedules; the budget covers that regime with headroom
    max_iterations: int = 120
    armijo_c1: float = 1e-4
    armijo_factor: float = 0.5
    min_step: float = 2.0**-10
    max_relaxed_steps: int = 8
    fp_band: float = 0.25  # kink mollification width for fallback directions
    linear_solver: str = "direct"  # "direct" (sparse LU) or "krylov"
    krylov_tol: float = 1e-9
    gmres_restart: int = 100
    gmres_maxiter: int = 400
    ilu_drop_tol: float = 1e-4
    ilu_fill_factor: float = 10.0
    use_preconditioner: bool = True

    def __post_init__(self):
        if not (self.tol > 0.0 and self.krylov_tol > 0.0):
            raise DomainError("tolerances must be positive")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be at least 1")
        if self.linear_solver not in ("direct", "krylov"):
            raise DomainError(f"unknown linear solver {self.linear_solver!r}")
        if not (0.0 < self.armijo_factor < 1.0) or self.armijo_c1 <= 0.0:
            raise DomainError("Armijo parameters out of range")
        if not (0.0 < self.min_step <= 1.0):
            raise DomainError("min_step must lie in (0, 1]")
        if self.max_relaxed_steps < 0:
            raise DomainError("max_relaxed_steps must be nonnegative")
        if not (0.0 <= self.fp_band < 1.0):
            raise DomainError("fp_band must lie in [0, 1)")


@dataclass(frozen=True)
class ContinuationSchedule:
    """Strictly decreasing eps stages plus the grid they are solved on.

    With regrid_each_stage the grid is rebuilt per stage so the top cell
    tracks eps/4; otherwise one grid resolving the final stage is used
    throughout.
    """

    eps_values: tuple
    nx: int
    ny: int
    grading: Grading | None = None
    regrid_each_stage: bool = True

    def __post_init__(self):
        vals = tuple(float(e) for e in self.eps_values)
        object.__setattr__(self, "eps_values", vals)
        arr = np.asarray(vals)
        if arr.size == 0:
            raise DomainError("empty eps schedule")
        if np.any(arr <= 0.0) or (arr.size > 1 and np.any(np.diff(arr) >= 0.0)):
            raise DomainError("eps schedule must be positive and strictly decreasing")


@dataclass(eq=False)
class Wave1DSolution:
    x_nodes: np.ndarray
    u: np.ndarray
    c: float
    converged: bool = False
    newton_history: list = dfield(default_factory=list)


def _direct_solve(matrix, rhs):
    try:
        lu = spla.splu(sp.csc_matrix(matrix))
        out = lu.solve(rhs)
    except RuntimeError as exc:
        raise SingularLinearSystemError(f"sparse LU failed: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise SingularLinearSystemError("sparse LU produced non-finite entries")
    return out


def _gmres_solve(matrix, rhs, config: NewtonConfig, stats=None):
    A = sp.csc_matrix(matrix)
    M = None
    if config.use_preconditioner:
        try:
            ilu = spla.spilu(
                A, drop_tol=config.ilu_drop_tol, fill_factor=config.ilu_fill_factor
            )
            M = spla.LinearOperator(A.shape, ilu.solve)
        except RuntimeError as exc:
            raise SingularLinearSystemError(f"incomplete factorization failed: {exc}") from exc
    count = [0]

    def cb(_):
        count[0] += 1

    kwargs = {_GMRES_TOL_KW: config.krylov_tol, "atol": 0.0}
    out, info = spla.gmres(
        A,
        rhs,
        M=M,
        restart=config.gmres_restart,
        maxiter=config.gmres_maxiter,
        callback=cb,
        callback_type="pr_norm",
        **kwargs,
    )
    if stats is not None:
        stats["iterations"] = count[0]
    if info != 0 or not np.all(np.isfinite(out)):
        raise SingularLinearSystemError(
            f"restarted GMRES stagnated (info={info}) after {count[0]} inner iterations"
        )
    return out


def krylov_solve(system: SparseSystem, rhs, config: NewtonConfig | None = None, stats=None):
    """Preconditioned restarted GMRES on an assembled system.

    Deterministic for a fixed configuration.  stats, if given a dict, is
    filled with the inner iteration count.
    """
    config = config or NewtonConfig(linear_solver="krylov")
    rhs = np.asarray(rhs, dtype=float)
    return _gmres_solve(system.matrix, rhs, config, stats=stats)


def _linear_solve(matrix, rhs, config: NewtonConfig):
    if config.linear_solver == "direct":
        return _direct_solve(matrix, rhs)
    return _gmres_solve(matrix, rhs, config)


def _row_scale(system):
    # dual-cell measures; constraint rows (Dirichlet, pinning) are O(1)
    # already and keep weight one
    return np.where(system.row_weight > 0.0, system.row_weight, 1.0)


def _newton_loop(x0, eval_system, config: NewtonConfig, step_cap=None):
    """Shared damped-Newton iteration on a packed unknown vector.

    The residual is measured in integrated (dual-cell-weighted) form;
    the pointwise rows near the road scale like 1/(hx*wx*wy) and their
    floating-point floor would otherwise dominate the stopping test on
    fine grids.  Termination is on the weighted max-norm; the line
    search accepts on the weighted 2-norm.

    The reaction term is only piecewise smooth (slope jump ~ A/eps^2 at
    v = 0), so a full Newton step that drags nodes across the whole
    regularization range invalidates the local model and the search
    direction can fail to descend.  step_cap limits the trial step so
    that no single iteration moves a field value by more than a
    fraction of eps; the cap is inactive near the solution and the
    quadratic tail is untouched.
    """
    x = np.asarray(x0, dtype=float).copy()
    history = []
    relaxed = 0

    def search(delta, merit, scale):
        step = 1.0 if step_cap is None else min(1.0, step_cap(delta))
        floor = step * config.min_step
        best_mt, best_xt = np.inf, None
        while step >= floor:
            xt = x + step * delta
            mt = float(np.linalg.norm(scale * eval_system(xt).residual))
            if np.isfinite(mt) and mt <= (1.0 - config.armijo_c1 * step) * merit:
                return xt, best_mt, best_xt
            if np.isfinite(mt) and mt < best_mt:
                best_mt, best_xt = mt, xt
            step *= config.armijo_factor
        return None, best_mt, best_xt

    for _ in range(config.max_iterations):
        sysm = eval_system(x)
        scale = _row_scale(sysm)
        rw = scale * sysm.residual
        norm = float(np.abs(rw).max())
        merit = float(np.linalg.norm(rw))
        history.append(norm)
        if not np.isfinite(norm):
            raise NonConvergenceError("residual became non-finite", history=history)
        if norm <= config.tol:
            return x, history
        delta = _linear_solve(sysm.matrix, -sysm.residual, config)
        xt, best_mt, best_xt = search(delta, merit, scale)
        if xt is None and config.fp_band > 0.0:
            # The exact local model is discontinuous across the reaction
            # kinks; when whole node columns straddle v = 0 or v = eps
            # its direction can cycle without descending.  Retry with the
            # direction of the mollified model (exact residual, ramped
            # slope), which is continuous in v.  Keeping the exact model
            # on the first try preserves the quadratic tail.
            sys2 = eval_system(x, fp_band=config.fp_band)
            delta2 = _linear_solve(sys2.matrix, -sys2.residual, config)
            xt, mt2, bx2 = search(delta2, merit, scale)
            if xt is None and mt2 < best_mt:
                best_mt, best_xt = mt2, bx2
        if xt is not None:
            x = xt
            relaxed = 0
            continue
        # last resort: accept the least-bad trial a bounded number of
        # times so the active set can keep updating instead of aborting
        if (
            best_xt is not None
            and relaxed < config.max_relaxed_steps
            and best_mt <= 4.0 * merit
        ):
            x = best_xt
            relaxed += 1
            continue
        raise NonConvergenceError(
            f"line search stalled at residual {norm:.3e}", history=history
        )
    sysm = eval_system(x)
    norm = float(np.abs(_row_scale(sysm) * sysm.residual).max())
    history.append(norm)
    if norm <= config.tol:
        return x, history
    raise NonConvergenceError(
        f"residual {norm:.3e} after {config.max_iterations} iterations",
        history=history,
    )


def _pack(state: WaveSolution):
    parts = [state.v.ravel()]
    if state.u is not None:
        parts.append(state.u)
    parts.append(np.array([state.c]))
    return np.concatenate(parts)


def newton_solve(
    initial: WaveSolution,
    params: Parameters,
    profile: CutoffProfile,
    config: NewtonConfig | None = None,
) -> WaveSolution:
    """Solve the bordered travelling-wave system from the given state."""
    config = config or NewtonConfig()
    kind = initial.model_kind
    g = initial.grid
    if g.dy_top > params.eps * (1.0 + 1e-12):
        warnings.warn(
            f"top cell {g.dy_top:.3g} does not resolve the regularization width "
            f"{params.eps:.3g}; expect poor convergence",
            GridResolutionWarning,
        )
    assemble = assemble_single if kind is ModelKind.SINGLE else assemble_two
    n_field = g.nx * g.ny

    def split(x):
        v = x[:n_field].reshape(g.ny, g.nx)
        u = x[n_field:-1] if kind is ModelKind.TWO else None
        return WaveSolution(grid=g, v=v, u=u, c=float(x[-1]))

    x, history = _newton_loop(
        _pack(initial),
        lambda x, fp_band=0.0: assemble(split(x), params, profile, fp_band=fp_band),
        config,
        step_cap=_field_step_cap(params, n_field),
    )
    out = split(x.copy())
    out.converged = True
    out.newton_history = history
    if out.c <= 0.0:
        raise NegativeSpeedError(
            f"converged speed {out.c:.6g} is nonpositive; wrong branch or truncation"
        )
    return out


def _field_step_cap(params: Parameters, n_field: int):
    # keep any single update of v (and mu u) within half the reaction range
    lim = 0.5 * params.eps

    def cap(delta):
        dv = float(np.abs(delta[:n_field]).max())
        m = lim / dv if dv > lim else 1.0
        if delta.shape[0] > n_field + 1:
            du = float(np.abs(delta[n_field:-1]).max()) * params.mu
            if du * m > lim:
                m = lim / du
        return m

    return cap


def _enforce_boundary(state: WaveSolution, params: Parameters):
    state.v[:, 0] = 1.0
    state.v[:, -1] = 0.0
    if state.u is not None:
        state.u[0] = 1.0 / params.mu
        state.u[-1] = 0.0


def _guess_1d(x, params: Parameters):
    # outer exponential behind the front, linearized decay ahead of it
    eps, d = params.eps, params.d
    xc = x - params.pin_x
    amp = 3.0 / d
    k = (-1.0 + np.sqrt(1.0 + 4.0 * d * amp / eps**2)) / (2.0 * d)
    left = 1.0 - (1.0 - eps) * np.exp(np.minimum(xc, 0.0) / d)
    right = eps * np.exp(-k * np.maximum(xc, 0.0))
    return np.where(xc <= 0.0, left, right)


def solve_wave_1d(
    params: Parameters,
    profile: CutoffProfile,
    eps: float,
    *,
    n: int = 4097,
    config: NewtonConfig | None = None,
) -> Wave1DSolution:
    """The 1D pinned travelling wave on [x_min, x_max]; speed oracle.

    As eps decreases the speed approaches 1 for every diffusivity d: the
    outer slope and the layer-profile slope match only at c = 1.
    """
    config = config or NewtonConfig()
    p = replace(params, eps=float(eps))
    x = build_grid_1d(p, n)
    u0 = _guess_1d(x, p)
    u0[0], u0[-1] = 1.0, 0.0
    x0 = np.concatenate([u0, [1.0]])

    def eval_system(z, fp_band=0.0):
        return assemble_1d(x, z[:-1], float(z[-1]), p, profile, fp_band=fp_band)

    z, history = _newton_loop(x0, eval_system, config,
                              step_cap=_field_step_cap(p, x.shape[0]))
    sol = Wave1DSolution(x_nodes=x, u=z[:-1].copy(), c=float(z[-1]),
                         converged=True, newton_history=history)
    if sol.c <= 0.0:
        raise NegativeSpeedError(f"1D wave speed {sol.c:.6g} is nonpositive")
    return sol


def initial_from_1d(
    params: Parameters,
    profile: CutoffProfile,
    grid,
    config: NewtonConfig | None = None,
    n_1d: int = 2049,
) -> WaveSolution:
    """Constant-in-depth extension of the 1D wave; continuation seed."""
    one_d = solve_wave_1d(params, profile, params.eps, n=n_1d, config=config)
    trace = np.interp(grid.x_nodes, one_d.x_nodes, one_d.u)
    v = np.tile(trace, (grid.ny, 1))
    u = trace / params.mu if params.model_kind is ModelKind.TWO else None
    st = WaveSolution(grid=grid, v=v, u=u, c=one_d.c)
    _enforce_boundary(st, params)
    return st


def interpolate_state(prev: WaveSolution, grid, shift: float = 0.0) -> WaveSolution:
    """Carry a solved state onto a regenerated grid (bilinear).

    A positive shift samples the old state at x + shift, translating the
    wave left; used to land the warm start near the new pinning level.
    """
    itp = RegularGridInterpolator(
        (prev.grid.y_nodes, prev.grid.x_nodes), prev.v,
        bounds_error=False, fill_value=None,
    )
    xq = np.clip(grid.x_nodes + shift, prev.grid.x_nodes[0], prev.grid.x_nodes[-1])
    YY, XX = np.meshgrid(grid.y_nodes, xq, indexing="ij")
    v = itp(np.stack([YY.ravel(), XX.ravel()], axis=1)).reshape(grid.ny, grid.nx)
    u = None
    if prev.u is not None:
        u = np.interp(xq, prev.grid.x_nodes, prev.u)
    return WaveSolution(grid=grid, v=v, u=u, c=prev.c)


def _pinning_shift(prev: WaveSolution, eps_new: float, params: Parameters) -> float:
    """Abscissa offset at which the old state crosses the new pin level."""
    itp = RegularGridInterpolator(
        (prev.grid.y_nodes, prev.grid.x_nodes), prev.v,
        bounds_error=False, fill_value=None,
    )
    x = prev.grid.x_nodes
    row = itp(np.stack([np.full(x.size, -params.L / 4.0), x], axis=1))
    s = row - eps_new
    hits = np.nonzero((s[:-1] > 0.0) & (s[1:] <= 0.0))[0]
    if hits.size == 0:
        return 0.0
    i = hits[-1]
    frac = s[i] / (s[i] - s[i + 1])
    return float(x[i] + frac * (x[i + 1] - x[i]) - params.pin_x)


def continue_in_eps(
    schedule: ContinuationSchedule,
    params: Parameters,
    profile: CutoffProfile,
    config: NewtonConfig | None = None,
) -> list:
    """March the wave through the eps stages, warm-starting each one.

    Returns one converged WaveSolution per stage, in schedule order.
    """
    config = config or NewtonConfig()
    eps_values = schedule.eps_values
    if eps_values[-1] < 1e-4 * params.L:
        raise DomainError(
            f"final eps {eps_values[-1]:g} below the resolvable floor "
            f"{1e-4 * params.L:g} for domain depth {params.L:g}"
        )
    fixed_grid = None
    if not schedule.regrid_each_stage:
        fixed_grid = build_grid(
            replace(params, eps=eps_values[-1]), schedule.nx, schedule.ny,
            schedule.grading or Grading(),
        )
    def solve_stage(prev, eps, p_k, g_k):
        if prev is None:
            init = initial_from_1d(p_k, profile, g_k, config=config)
        else:
            init = interpolate_state(prev, g_k, shift=_pinning_shift(prev, eps, p_k))
            _enforce_boundary(init, p_k)
        return newton_solve(init, p_k, profile, config)

    def advance(prev, eps_from, eps, depth):
        # bisect the eps step (geometrically) when a stage refuses to
        # converge from the warm start it was handed
        p_k = replace(params, eps=eps)
        if fixed_grid is not None:
            g_k = fixed_grid
        else:
            g_k = build_grid(p_k, schedule.nx, schedule.ny,
                             schedule.grading or Grading())
        try:
            return solve_stage(prev, eps, p_k, g_k)
        except NonConvergenceError:
            if prev is None or depth >= 3:
                raise
            mid = math.sqrt(eps_from * eps)
            half = advance(prev, eps_from, mid, depth + 1)
            return advance(half, mid, eps, depth + 1)

    stages = []
    prev = None
    eps_from = None
    for k, eps in enumerate(eps_values):
        try:
            sol = advance(prev, eps_from, eps, 0)
        except (NonConvergenceError, SingularLinearSystemError, NegativeSpeedError) as exc:
            exc.args = (f"stage {k} (eps={eps:g}): {exc.args[0]}",) + exc.args[1:]
            raise
        stages.append(sol)
        prev = sol
        eps_from = eps
    return stages
