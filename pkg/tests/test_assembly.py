"""Discrete operators: exactness, consistency order, Jacobian correctness."""

import numpy as np
import pytest

from roadfield.assembly import (
    ROW_FIELD,
    ROW_ROAD,
    WaveSolution,
    apply_operator,
    assemble_1d,
    assemble_single,
    assemble_two,
    bernoulli,
    bernoulli_prime,
    flux_balance,
    interp_weights,
)
from roadfield.errors import DimensionMismatchError, DomainError
from roadfield.grid import Grading, build_grid
from roadfield.model import (
    AnalyticKind,
    AnalyticProfile,
    CutoffProfile,
    ModelKind,
    Parameters,
    eval_analytic,
    f_eps_with_derivative,
)

PROFILE = CutoffProfile.for_diffusivity(1.0)


def test_bernoulli_identities():
    z = np.linspace(-30.0, 30.0, 1201)
    b = bernoulli(z)
    # B(-z) = B(z) + z makes constant-state fluxes exact
    np.testing.assert_allclose(bernoulli(-z), b + z, rtol=1e-13, atol=1e-13)
    assert bernoulli(np.array([0.0]))[0] == 1.0
    np.testing.assert_allclose(bernoulli(np.array([1e-7]))[0], 1.0 - 5e-8)
    # saturation branches
    assert bernoulli(np.array([800.0]))[0] == 0.0
    assert bernoulli(np.array([-800.0]))[0] == 800.0
    h = 1e-6
    num = (bernoulli(z + h) - bernoulli(z - h)) / (2.0 * h)
    np.testing.assert_allclose(bernoulli_prime(z), num, rtol=1e-6, atol=1e-6)


def _interior(system):
    nf, nr = system.n_field, system.n_road
    out = [np.abs(system.residual[:nf][system.row_kind[:nf] == ROW_FIELD]).max()]
    if nr:
        rk = system.row_kind[nf:nf + nr]
        out.append(np.abs(system.residual[nf:nf + nr][rk == ROW_ROAD]).max())
    return max(out)


def test_constant_states_are_discrete_solutions():
    """v = 1 (and u = 1/mu) zeroes every interior residual row at any speed."""
    p = Parameters(d=1.0, D=2.0, mu=1.5, nu=0.8, L=1.0, eps=0.1,
                   x_min=-4.0, x_max=4.0, model_kind=ModelKind.TWO)
    g = build_grid(p, 48, 24)
    v = np.ones((g.ny, g.nx))
    u = np.full(g.nx, 1.0 / p.mu)
    # exact in exact arithmetic; the bound allows roundoff amplified by
    # the 1/h^2 of the finest graded cells
    for c in (0.0, 0.4, 2.0):
        st = WaveSolution(grid=g, v=v, u=u, c=c)
        assert _interior(assemble_two(st, p, PROFILE)) < 1e-9
    ps = Parameters(d=1.0, D=2.0, mu=1.5, nu=0.8, L=1.0, eps=0.1,
                    x_min=-4.0, x_max=4.0)
    st = WaveSolution(grid=g, v=v, u=None, c=0.7)
    assert _interior(assemble_single(st, ps, PROFILE)) < 1e-9


@pytest.mark.parametrize("kind", [ModelKind.SINGLE, ModelKind.TWO])
def test_jacobian_matches_directional_differences(kind):
    """Central differences of the residual along random directions equal J*delta."""
    p = Parameters(d=0.8, D=3.0, mu=1.3, nu=0.9, L=1.0, eps=0.3,
                   x_min=-3.0, x_max=3.0, model_kind=kind)
    g = build_grid(p, 24, 12)
    rng = np.random.default_rng(2024)
    asmb = assemble_single if kind is ModelKind.SINGLE else assemble_two
    nf = g.ny * g.nx

    def system_at(x):
        v = x[:nf].reshape(g.ny, g.nx)
        u = x[nf:-1] if kind is ModelKind.TWO else None
        return asmb(WaveSolution(grid=g, v=v, u=u, c=float(x[-1])), p, PROFILE)

    n = nf + (g.nx if kind is ModelKind.TWO else 0) + 1
    for _ in range(6):
        # keep all values strictly inside (0, eps), away from both kinks
        x = np.empty(n)
        x[:-1] = p.eps * rng.uniform(0.35, 0.65, n - 1)
        x[-1] = rng.uniform(0.2, 1.5)
        s = system_at(x)
        delta = rng.standard_normal(n)
        delta /= np.abs(delta).max()
        h = 1e-6
        num = (system_at(x + h * delta).residual
               - system_at(x - h * delta).residual) / (2.0 * h)
        jd = apply_operator(s, delta)
        scale = np.abs(jd).max()
        assert np.abs(num - jd).max() < 1e-6 * scale


def test_mollified_band_changes_matrix_not_residual():
    p = Parameters(eps=0.1, x_min=-4.0, x_max=4.0)
    g = build_grid(p, 32, 16)
    rng = np.random.default_rng(3)
    v = rng.uniform(0.0, 1.0, (g.ny, g.nx))
    st = WaveSolution(grid=g, v=v, u=None, c=0.5)
    s0 = assemble_single(st, p, PROFILE, fp_band=0.0)
    s1 = assemble_single(st, p, PROFILE, fp_band=0.25)
    np.testing.assert_array_equal(s0.residual, s1.residual)
    assert (s0.matrix - s1.matrix).nnz > 0


@pytest.mark.parametrize("kind", [ModelKind.SINGLE, ModelKind.TWO])
def test_flux_balance_equals_weighted_row_sum(kind):
    """Algebraic identity at arbitrary states, not only at solutions."""
    p = Parameters(d=1.1, D=2.5, mu=1.4, nu=0.7, L=1.5, eps=0.12,
                   x_min=-5.0, x_max=5.0, model_kind=kind)
    g = build_grid(p, 40, 20)
    rng = np.random.default_rng(11)
    asmb = assemble_single if kind is ModelKind.SINGLE else assemble_two
    for _ in range(8):
        v = rng.uniform(0.0, 1.0, (g.ny, g.nx))
        u = rng.uniform(0.0, 1.0, g.nx) if kind is ModelKind.TWO else None
        st = WaveSolution(grid=g, v=v, u=u, c=float(rng.uniform(0.1, 2.0)))
        s = asmb(st, p, PROFILE)
        fb = flux_balance(st, p, PROFILE)
        row_sum = float(np.sum(s.row_weight * s.residual))
        assert abs(fb["total"] - row_sum) < 1e-10 * max(1.0, abs(row_sum))
        assert fb["Q"] >= 0.0


def test_speed_identity_on_bundled_wave(bundled):
    sol, params, profile = bundled
    fb = flux_balance(sol, params, profile)
    k_discrete = -fb["boundary"] / sol.c
    k_ref = params.L + params.d * params.mu
    assert abs(k_discrete - k_ref) / k_ref < 1e-3
    assert abs(sol.c * k_ref - fb["Q"]) / (sol.c * k_ref) < 1e-3


def _mms_error(nx, ny, kind):
    # manufactured smooth field cos(pi y / 2L) e^{-x}; compare the interior
    # residual rows to the continuous operator they discretize
    p = Parameters(d=1.0, D=2.0, mu=1.2, nu=1.0, L=2.0, eps=0.1,
                   x_min=-3.0, x_max=3.0, model_kind=kind)
    g = build_grid(p, nx, ny, Grading(x_factor=1.0, y_factor=1.0))
    X, Y = np.meshgrid(g.x_nodes, g.y_nodes)
    v = np.cos(np.pi * Y / (2.0 * p.L)) * np.exp(-X)
    c = 0.7
    u = np.exp(-g.x_nodes) if kind is ModelKind.TWO else None
    st = WaveSolution(grid=g, v=v, u=u, c=c)
    asmb = assemble_single if kind is ModelKind.SINGLE else assemble_two
    s = asmb(st, p, PROFILE)
    f, _ = f_eps_with_derivative(PROFILE, v, p.eps)
    target = -p.d * (1.0 - (np.pi / (2.0 * p.L)) ** 2) * v - c * v + f
    R = s.residual[:s.n_field].reshape(g.ny, g.nx)
    E = np.abs(R - target)
    E[g.ny - 1, :] = 0.0
    E[0, :] = 0.0
    E[:, 0] = 0.0
    E[:, -1] = 0.0
    E.ravel()[s.row_kind[:s.n_field] != ROW_FIELD] = 0.0
    return float(E.max())


@pytest.mark.parametrize("kind", [ModelKind.SINGLE, ModelKind.TWO])
def test_interior_scheme_is_second_order(kind):
    e1 = _mms_error(48, 32, kind)
    e2 = _mms_error(96, 64, kind)
    assert np.log2(e1 / e2) > 1.85


def test_plane_profile_reproduced_to_roundoff():
    """Piecewise-linear two-phase profile: zero second differences away from
    the kink, so the discrete operator equals the advection term exactly."""
    p = Parameters(d=1.0, D=2.0, mu=1.0, nu=1.0, L=2.0, eps=0.05,
                   x_min=-2.0, x_max=2.0)
    g = build_grid(p, 64, 48, Grading(x_factor=1.0, y_factor=1.0))
    X, Y = np.meshgrid(g.x_nodes, g.y_nodes)
    ap = AnalyticProfile(kind=AnalyticKind.TWO_PHASE_PLANE, lam=0.6)
    v = eval_analytic(ap, (X, Y))
    c = 0.8
    st = WaveSolution(grid=g, v=v, u=None, c=c)
    s = assemble_single(st, p, PROFILE, reaction=False)
    gx = -np.sqrt(1.0 - ap.lam**2)
    target = np.where(v > 0.0, c * gx, 0.0)
    R = s.residual[:s.n_field].reshape(g.ny, g.nx)
    E = np.abs(R - target)
    pos = v > 0.0
    smooth = np.zeros_like(pos)
    smooth[1:-1, 1:-1] = (pos[1:-1, :-2] & pos[1:-1, 2:]
                          & pos[:-2, 1:-1] & pos[2:, 1:-1] & pos[1:-1, 1:-1])
    zero = ~pos
    flat = np.zeros_like(pos)
    flat[1:-1, 1:-1] = (zero[1:-1, :-2] & zero[1:-1, 2:]
                        & zero[:-2, 1:-1] & zero[2:, 1:-1] & zero[1:-1, 1:-1])
    E[~(smooth | flat)] = 0.0
    E[g.ny - 1, :] = 0.0
    E.ravel()[s.row_kind[:s.n_field] != ROW_FIELD] = 0.0
    assert E.max() < 1e-10


def test_interp_weights():
    p = Parameters(x_min=-2.0, x_max=2.0, L=1.0, eps=0.1)
    g = build_grid(p, 17, 9, Grading(x_factor=1.0, y_factor=1.0))
    idx, w = interp_weights(g, 0.1, -0.3)
    assert abs(w.sum() - 1.0) < 1e-14
    # exact for bilinear functions
    X, Y = np.meshgrid(g.x_nodes, g.y_nodes)
    vals = (2.0 + 3.0 * X - Y + 0.5 * X * Y).ravel()
    assert abs(vals[idx] @ w - (2.0 + 3.0 * 0.1 + 0.3 - 0.5 * 0.1 * 0.3)) < 1e-13
    with pytest.raises(DomainError):
        interp_weights(g, 5.0, 0.0)


def test_shape_errors():
    p = Parameters(eps=0.1, x_min=-2.0, x_max=2.0)
    g = build_grid(p, 16, 8)
    st = WaveSolution(grid=g, v=np.zeros((3, 3)), u=None, c=1.0)
    with pytest.raises(DimensionMismatchError):
        assemble_single(st, p, PROFILE)
    p2 = Parameters(eps=0.1, x_min=-2.0, x_max=2.0, model_kind=ModelKind.TWO)
    st2 = WaveSolution(grid=g, v=np.zeros((g.ny, g.nx)), u=None, c=1.0)
    with pytest.raises(DimensionMismatchError):
        assemble_two(st2, p2, PROFILE)
    ok = WaveSolution(grid=g, v=np.zeros((g.ny, g.nx)), u=None, c=1.0)
    s = assemble_single(ok, p, PROFILE)
    with pytest.raises(DimensionMismatchError):
        apply_operator(s, np.zeros(3))
    with pytest.raises(DimensionMismatchError):
        assemble_1d(g.x_nodes, np.zeros(4), 1.0, p, PROFILE)
