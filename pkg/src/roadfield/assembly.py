"""Residuals and exact sparse Jacobians for the travelling-wave systems.

Discretization: finite volumes on the dual cells of the graded tensor
grid, with exponentially fitted (Scharfetter-Gummel) fluxes for the
advection-diffusion part.  The fitted flux across a face with Peclet
number z = c*h/kappa is

    F = (kappa/h) * (B(-z) v_left - B(z) v_right),   B(z) = z/(e^z - 1).

Three structural consequences carry the whole verification story:
  * the scheme is an M-matrix for every c, so discrete comparison holds;
  * summing the rows weighted by cell measures telescopes to boundary
    fluxes plus the reaction quadrature, an exact identity at any state;
  * the rows are the exact gradient of a discrete weighted energy, so a
    converged wave is a genuine critical point of that functional.

Road coupling.  The top row of the field is a half-cell balance whose
boundary flux is substituted from the road equation: the tangential-
diffusion form for the single-species system, the exchange flux
mu*u - v for the two-species one (the wave system is normalized so the
second exchange rate is one).  That substitution is what makes the
telescoped identity exact including the road.
"""

from dataclasses import dataclass, field as dfield

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatchError, DomainError
from .grid import Grid
from .model import CutoffProfile, ModelKind, f_eps_with_derivative


def bernoulli(z):
    """B(z) = z/(e^z - 1), the flux fitting function."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-5
    pos_big = z > 690.0
    neg_big = z < -690.0
    mid = ~(small | pos_big | neg_big)
    zm = z[mid]
    out[mid] = zm / np.expm1(zm)
    zs = z[small]
    out[small] = 1.0 - 0.5 * zs + zs * zs / 12.0
    out[pos_big] = 0.0
    out[neg_big] = -z[neg_big]
    return out


def bernoulli_prime(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-4
    pos_big = z > 690.0
    neg_big = z < -690.0
    mid = ~(small | pos_big | neg_big)
    zm = z[mid]
    em = np.expm1(zm)
    out[mid] = (em - zm * (em + 1.0)) / em**2
    zs = z[small]
    out[small] = -0.5 + zs / 6.0 - zs**3 / 180.0
    out[pos_big] = 0.0
    out[neg_big] = -1.0
    return out


@dataclass(eq=False)
class WaveSolution:
    """Discrete travelling wave: field v on the grid, road u, speed c.

    For the single-species system u is None and the road density is the
    trace v(., 0).
    """

    grid: Grid
    v: np.ndarray
    u: np.ndarray | None
    c: float
    converged: bool = False
    newton_history: list = dfield(default_factory=list)

    @property
    def road_profile(self):
        return self.u if self.u is not None else self.v[-1]

    @property
    def model_kind(self):
        return ModelKind.SINGLE if self.u is None else ModelKind.TWO


# row_kind codes
ROW_FIELD = 0
ROW_ROAD = 1
ROW_DIRICHLET = 2
ROW_PINNING = 3


@dataclass(eq=False)
class SparseSystem:
    """Assembled residual and Jacobian in one bordered sparse matrix.

    Unknown ordering: field nodes (row-major, j*nx + i), then road nodes
    for the two-species system, then the speed c as the last unknown.
    The final row is the pinning equation.  row_weight holds the dual
    cell measures that turn a row sum into the discrete flux balance.
    """

    matrix: sp.csr_matrix
    residual: np.ndarray
    ordering: str
    n_field: int
    n_road: int
    row_weight: np.ndarray
    row_kind: np.ndarray


def apply_operator(system: SparseSystem, vec):
    vec = np.asarray(vec, dtype=float)
    n = system.matrix.shape[1]
    if vec.shape != (n,):
        raise DimensionMismatchError(f"expected vector of length {n}, got {vec.shape}")
    return system.matrix @ vec


def interp_weights(grid: Grid, xp, yp):
    """Bilinear weights of (xp, yp) in the grid, as (flat_indices, weights)."""
    x, y = grid.x_nodes, grid.y_nodes
    if not (x[0] <= xp <= x[-1] and y[0] <= yp <= y[-1]):
        raise DomainError(f"point ({xp}, {yp}) outside the grid")
    ix = min(max(int(np.searchsorted(x, xp) - 1), 0), x.shape[0] - 2)
    jy = min(max(int(np.searchsorted(y, yp) - 1), 0), y.shape[0] - 2)
    tx = (xp - x[ix]) / (x[ix + 1] - x[ix])
    ty = (yp - y[jy]) / (y[jy + 1] - y[jy])
    nx = x.shape[0]
    idx = np.array(
        [jy * nx + ix, jy * nx + ix + 1, (jy + 1) * nx + ix, (jy + 1) * nx + ix + 1]
    )
    w = np.array(
        [(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty]
    )
    return idx, w


def _check_state(state: WaveSolution, kind: ModelKind):
    g = state.grid
    if state.v.shape != (g.ny, g.nx):
        raise DimensionMismatchError(
            f"field shape {state.v.shape} does not match grid ({g.ny}, {g.nx})"
        )
    if kind is ModelKind.TWO:
        if state.u is None or state.u.shape != (g.nx,):
            raise DimensionMismatchError("two-species state needs a road array of length nx")


def _sg_face_data(c, h, kappa, left, right):
    """Per-face fitted flux and its c-derivative for a 1D row of values."""
    pe = c * h / kappa
    bp = bernoulli(pe)
    bm = bp + pe  # B(-z) = B(z) + z, exactly, so constant states have exact fluxes
    flux = (kappa / h) * (bm * left - bp * right)
    dflux_dc = -(bernoulli_prime(-pe) * left + bernoulli_prime(pe) * right)
    return flux, dflux_dc, bm, bp


def assemble_single(state: WaveSolution, params, profile: CutoffProfile,
                    reaction: bool = True, fp_band: float = 0.0) -> SparseSystem:
    return _assemble_2d(state, params, profile, ModelKind.SINGLE, reaction, fp_band)


def assemble_two(state: WaveSolution, params, profile: CutoffProfile,
                 reaction: bool = True, fp_band: float = 0.0) -> SparseSystem:
    return _assemble_2d(state, params, profile, ModelKind.TWO, reaction, fp_band)


def _assemble_2d(state, params, profile, kind, reaction, fp_band=0.0):
    _check_state(state, kind)
    g = state.grid
    nx, ny = g.nx, g.ny
    hx, hy = g.hx, g.hy
    wx, wy = g.wx, g.wy
    v, c = state.v, state.c
    d, D, mu = params.d, params.D, params.mu
    # the wave system is normalized so the second exchange rate is 1;
    # the general rate only enters the time-dependent model
    nu = 1.0
    J = ny - 1
    n_field = nx * ny
    n_road = nx if kind is ModelKind.TWO else 0
    n_tot = n_field + n_road + 1
    ic = n_tot - 1

    Fx, dFx, bm, bp = _sg_face_data(c, hx[None, :], d, v[:, :-1], v[:, 1:])
    Gy = (d / hy[:, None]) * (v[:-1, :] - v[1:, :])

    if reaction:
        f, fp = f_eps_with_derivative(profile, v, params.eps, fp_band=fp_band)
    else:
        f = fp = np.zeros_like(v)

    R = np.zeros((ny, nx))
    dRdc = np.zeros((ny, nx))
    ii = np.arange(1, nx - 1)

    R[:, ii] = (Fx[:, ii] - Fx[:, ii - 1]) / wx[ii] + f[:, ii]
    dRdc[:, ii] = (dFx[:, ii] - dFx[:, ii - 1]) / wx[ii]
    R[1:J, ii] += (Gy[1:J, ii] - Gy[0 : J - 1, ii]) / wy[1:J, None]
    R[0, ii] += Gy[0, ii] / wy[0]

    rows, cols, vals = [], [], []

    def put(r, co, va):
        rows.append(np.broadcast_to(r, va.shape).ravel())
        cols.append(np.broadcast_to(co, va.shape).ravel())
        vals.append(np.asarray(va, dtype=float).ravel())

    jj = np.arange(ny)
    node = jj[:, None] * nx + ii[None, :]

    # x-direction stencil, all rows at once
    ax_e = -(d / hx[ii]) * bp[0, ii] / wx[ii]
    ax_w = -(d / hx[ii - 1]) * bm[0, ii - 1] / wx[ii]
    ax_c = ((d / hx[ii]) * bm[0, ii] + (d / hx[ii - 1]) * bp[0, ii - 1]) / wx[ii]
    put(node, node + 1, np.broadcast_to(ax_e, (ny, ii.size)))
    put(node, node - 1, np.broadcast_to(ax_w, (ny, ii.size)))
    put(node, node, np.broadcast_to(ax_c, (ny, ii.size)))
    put(node, node, fp[:, ii])
    put(node, ic, dRdc[:, ii])

    # y-direction stencil, interior depth rows
    jmid = np.arange(1, J)
    nmid = jmid[:, None] * nx + ii[None, :]
    ay_u = -(d / hy[jmid]) / wy[jmid]
    ay_d = -(d / hy[jmid - 1]) / wy[jmid]
    put(nmid, nmid + nx, np.broadcast_to(ay_u[:, None], nmid.shape))
    put(nmid, nmid - nx, np.broadcast_to(ay_d[:, None], nmid.shape))
    put(nmid, nmid, np.broadcast_to((-ay_u - ay_d)[:, None], nmid.shape))

    # bottom half cell, homogeneous outward flux
    nbot = ii
    put(nbot, nbot + nx, np.full(ii.size, -(d / hy[0]) / wy[0]))
    put(nbot, nbot, np.full(ii.size, (d / hy[0]) / wy[0]))

    # top half cell: flux from below plus the substituted road flux
    ntop = J * nx + ii
    put(ntop, ntop - nx, np.full(ii.size, -(d / hy[J - 1]) / wy[J]))
    put(ntop, ntop, np.full(ii.size, (d / hy[J - 1]) / wy[J]))
    R[J, ii] += -Gy[J - 1, ii] / wy[J]

    if kind is ModelKind.SINGLE:
        FD, dFD, bmD, bpD = _sg_face_data(c, hx, D, v[J, :-1], v[J, 1:])
        scale = d * mu / (wx[ii] * wy[J])
        R[J, ii] += scale * (FD[ii] - FD[ii - 1])
        dRdc[J, ii] += scale * (dFD[ii] - dFD[ii - 1])
        put(ntop, ic, scale * (dFD[ii] - dFD[ii - 1]))
        put(ntop, ntop + 1, -scale * (D / hx[ii]) * bpD[ii])
        put(ntop, ntop - 1, -scale * (D / hx[ii - 1]) * bmD[ii - 1])
        put(ntop, ntop, scale * ((D / hx[ii]) * bmD[ii] + (D / hx[ii - 1]) * bpD[ii - 1]))
    else:
        u = state.u
        R[J, ii] += -d * (mu * u[ii] - nu * v[J, ii]) / wy[J]
        put(ntop, n_field + ii, np.full(ii.size, 0.0) - d * mu / wy[J])
        put(ntop, ntop, np.full(ii.size, d * nu / wy[J]))

    # Dirichlet columns: wave limits at the truncation boundary
    jcol = jj * nx
    R[:, 0] = v[:, 0] - 1.0
    R[:, -1] = v[:, -1]
    put(jcol, jcol, np.ones(ny))
    put(jcol + nx - 1, jcol + nx - 1, np.ones(ny))

    res = np.empty(n_tot)
    res[:n_field] = R.ravel()

    row_weight = np.zeros(n_tot)
    row_kind = np.full(n_tot, ROW_DIRICHLET, dtype=np.int8)
    wgrid = np.zeros((ny, nx))
    wgrid[:, ii] = wy[:, None] * wx[ii][None, :]
    row_weight[:n_field] = wgrid.ravel()
    kgrid = np.full((ny, nx), ROW_DIRICHLET, dtype=np.int8)
    kgrid[:, ii] = ROW_FIELD
    row_kind[:n_field] = kgrid.ravel()

    if kind is ModelKind.TWO:
        u = state.u
        FDu, dFDu, bmD, bpD = _sg_face_data(c, hx, D, u[:-1], u[1:])
        Rr = np.zeros(nx)
        Rr[ii] = (FDu[ii] - FDu[ii - 1]) / wx[ii] + mu * u[ii] - nu * v[J, ii]
        Rr[0] = u[0] - 1.0 / mu
        Rr[-1] = u[-1]
        nroad = n_field + ii
        put(nroad, nroad + 1, -(D / hx[ii]) * bpD[ii] / wx[ii])
        put(nroad, nroad - 1, -(D / hx[ii - 1]) * bmD[ii - 1] / wx[ii])
        put(nroad, nroad,
            ((D / hx[ii]) * bmD[ii] + (D / hx[ii - 1]) * bpD[ii - 1]) / wx[ii] + mu)
        put(nroad, J * nx + ii, np.full(ii.size, -nu))
        put(nroad, ic, (dFDu[ii] - dFDu[ii - 1]) / wx[ii])
        put(n_field, n_field, np.ones(1))
        put(n_field + nx - 1, n_field + nx - 1, np.ones(1))
        res[n_field : n_field + nx] = Rr
        row_weight[n_field + 1 : n_field + nx - 1] = d * wx[ii]
        row_kind[n_field + 1 : n_field + nx - 1] = ROW_ROAD

    # pinning row: interpolated field value at (pin_x, -L/4) equals eps
    pin_idx, pin_w = interp_weights(g, params.pin_x, -params.L / 4.0)
    res[ic] = float(pin_w @ state.v.ravel()[pin_idx]) - params.eps
    put(np.full(4, ic), pin_idx, pin_w)
    row_kind[ic] = ROW_PINNING

    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_tot, n_tot),
    ).tocsr()
    ordering = "field row-major, then road, then c" if kind is ModelKind.TWO \
        else "field row-major, then c"
    return SparseSystem(
        matrix=mat,
        residual=res,
        ordering=ordering,
        n_field=n_field,
        n_road=n_road,
        row_weight=row_weight,
        row_kind=row_kind,
    )


def flux_balance(state: WaveSolution, params, profile, reaction: bool = True):
    """Boundary fluxes and reaction quadrature entering the speed identity.

    Returns a dict with the reaction quadrature Q, the telescoped
    boundary flux total, and their sum, which equals the weighted row
    sum of the assembled residual exactly (an algebraic identity of the
    scheme, valid at any state).
    """
    kind = state.model_kind
    _check_state(state, kind)
    g = state.grid
    hx, wx, wy = g.hx, g.wx, g.wy
    v, c = state.v, state.c
    d, D, mu = params.d, params.D, params.mu
    ii = np.arange(1, g.nx - 1)

    Fx, _, _, _ = _sg_face_data(c, hx[None, :], d, v[:, :-1], v[:, 1:])
    boundary = float(np.sum(wy * (Fx[:, -1] - Fx[:, 0])))
    if kind is ModelKind.SINGLE:
        FD, _, _, _ = _sg_face_data(c, hx, D, v[-1, :-1], v[-1, 1:])
        boundary += d * mu * (FD[-1] - FD[0])
    else:
        FDu, _, _, _ = _sg_face_data(c, hx, D, state.u[:-1], state.u[1:])
        boundary += d * (FDu[-1] - FDu[0])

    if reaction:
        f, _ = f_eps_with_derivative(profile, v, params.eps)
    else:
        f = np.zeros_like(v)
    Q = float(np.sum((wy[:, None] * wx[ii][None, :]) * f[:, ii]))
    return {"Q": Q, "boundary": boundary, "total": boundary + Q}


def assemble_1d(x_nodes, u, c, params, profile, reaction: bool = True,
                fp_band: float = 0.0) -> SparseSystem:
    """The one-dimensional travelling wave system on a line grid."""
    x = np.asarray(x_nodes, dtype=float)
    u = np.asarray(u, dtype=float)
    n = x.shape[0]
    if u.shape != (n,):
        raise DimensionMismatchError(f"profile length {u.shape} vs grid {n}")
    hx = np.diff(x)
    wx = _dual(x)
    d = params.d
    ii = np.arange(1, n - 1)
    F, dF, bm, bp = _sg_face_data(c, hx, d, u[:-1], u[1:])
    if reaction:
        f, fp = f_eps_with_derivative(profile, u, params.eps, fp_band=fp_band)
    else:
        f = fp = np.zeros_like(u)

    res = np.empty(n + 1)
    res[ii] = (F[ii] - F[ii - 1]) / wx[ii] + f[ii]
    res[0] = u[0] - 1.0
    res[n - 1] = u[-1]

    rows, cols, vals = [], [], []

    def put(r, co, va):
        rows.append(np.asarray(r).ravel())
        cols.append(np.asarray(co).ravel())
        vals.append(np.asarray(va, dtype=float).ravel())

    put(ii, ii + 1, -(d / hx[ii]) * bp[ii] / wx[ii])
    put(ii, ii - 1, -(d / hx[ii - 1]) * bm[ii - 1] / wx[ii])
    put(ii, ii, ((d / hx[ii]) * bm[ii] + (d / hx[ii - 1]) * bp[ii - 1]) / wx[ii] + fp[ii])
    put(ii, np.full(ii.size, n), (dF[ii] - dF[ii - 1]) / wx[ii])
    put([0, n - 1], [0, n - 1], [1.0, 1.0])

    k = min(max(int(np.searchsorted(x, params.pin_x) - 1), 0), n - 2)
    t = (params.pin_x - x[k]) / hx[k]
    res[n] = (1 - t) * u[k] + t * u[k + 1] - params.eps
    put([n, n], [k, k + 1], [1 - t, t])

    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n + 1, n + 1),
    ).tocsr()
    row_weight = np.zeros(n + 1)
    row_weight[ii] = wx[ii]
    row_kind = np.full(n + 1, ROW_DIRICHLET, dtype=np.int8)
    row_kind[ii] = ROW_FIELD
    row_kind[n] = ROW_PINNING
    return SparseSystem(
        matrix=mat, residual=res, ordering="line nodes, then c",
        n_field=n, n_road=0, row_weight=row_weight, row_kind=row_kind,
    )


def _dual(nodes):
    h = np.diff(nodes)
    w = np.empty(nodes.shape[0])
    w[0] = 0.5 * h[0]
    w[-1] = 0.5 * h[-1]
    w[1:-1] = 0.5 * (h[:-1] + h[1:])
    return w
