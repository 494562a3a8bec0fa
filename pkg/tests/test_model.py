"""Reaction family and closed-form profiles."""

import numpy as np
import pytest

from roadfield.errors import DomainError, ModelAssumptionWarning
from roadfield.model import (
    AnalyticKind,
    AnalyticProfile,
    CutoffProfile,
    F_eps_extended,
    ModelKind,
    Parameters,
    eval_F_eps,
    eval_analytic,
    eval_f_eps,
    eval_phi,
    f_eps_with_derivative,
    one_dim_inner,
)


def test_phi_ramp_values():
    p = CutoffProfile.for_diffusivity(1.0)
    assert p.amplitude == 3.0
    assert eval_phi(p, 0.0) == 3.0
    assert eval_phi(p, 0.5) == 1.5
    assert eval_phi(p, 1.0) == 0.0
    assert eval_phi(p, 7.3) == 0.0
    with pytest.raises(DomainError):
        eval_phi(p, -0.1)


def test_amplitude_first_moment():
    # int_0^1 s * A(1-s) ds = A/6 must equal 1/(2d)
    for d in (0.5, 1.0, 2.0, 3.7):
        p = CutoffProfile.for_diffusivity(d)
        s = np.linspace(0.0, 1.0, 200001)
        moment = np.trapezoid(s * eval_phi(p, s), s)
        assert abs(moment - 1.0 / (2.0 * d)) < 1e-9
    with pytest.raises(DomainError):
        CutoffProfile.for_diffusivity(0.0)
    with pytest.raises(DomainError):
        CutoffProfile(amplitude=-1.0)


def test_f_eps_support_and_values():
    p = CutoffProfile.for_diffusivity(1.0)
    eps = 0.08
    assert eval_f_eps(p, 0.0, eps) == 0.0
    assert eval_f_eps(p, eps, eps) == 0.0
    assert eval_f_eps(p, 2.0, eps) == 0.0
    # interior: (v/eps^2) * A * (1 - v/eps), at v = eps/2 this is A/(4 eps)
    assert abs(eval_f_eps(p, 0.5 * eps, eps) - 3.0 / (4.0 * eps)) < 1e-13
    v = np.linspace(0.0, eps, 101)
    assert np.all(eval_f_eps(p, v, eps) >= 0.0)
    with pytest.raises(DomainError):
        eval_f_eps(p, -0.01, eps)
    with pytest.raises(DomainError):
        eval_f_eps(p, 0.5, 0.0)


def test_reaction_mass_is_eps_independent():
    """int_0^eps f_eps = A/6 for every eps; the plateau of the antiderivative."""
    for d in (0.5, 1.0, 2.0):
        p = CutoffProfile.for_diffusivity(d)
        for eps in (0.01, 0.05, 0.2, 1.0):
            assert abs(eval_F_eps(p, eps, eps) - p.amplitude / 6.0) < 1e-14
            assert abs(eval_F_eps(p, 5.0, eps) - p.amplitude / 6.0) < 1e-14
            # quadrature cross-check
            v = np.linspace(0.0, eps, 20001)
            q = np.trapezoid(eval_f_eps(p, v, eps), v)
            assert abs(q - p.amplitude / 6.0) < 1e-7 * p.amplitude


def test_f_eps_scaling_property():
    # f_eps(v) = f_1(v/eps) / eps
    rng = np.random.default_rng(42)
    p = CutoffProfile.for_diffusivity(1.3)
    for _ in range(25):
        eps = float(rng.uniform(0.01, 0.5))
        v = rng.uniform(0.0, 1.5 * eps, size=64)
        lhs = eval_f_eps(p, v, eps)
        rhs = eval_f_eps(p, v / eps, 1.0) / eps
        np.testing.assert_allclose(lhs, rhs, rtol=1e-13, atol=1e-13)


def test_antiderivative_matches_reaction():
    # dF/dv = f on the interior, by central differences
    p = CutoffProfile.for_diffusivity(1.0)
    eps = 0.1
    v = np.linspace(0.005, eps - 0.005, 400)
    h = 1e-6
    dF = (eval_F_eps(p, v + h, eps) - eval_F_eps(p, v - h, eps)) / (2.0 * h)
    np.testing.assert_allclose(dF, eval_f_eps(p, v, eps), rtol=1e-7, atol=1e-7)


def test_extended_forms_clip_below_zero():
    p = CutoffProfile.for_diffusivity(1.0)
    eps = 0.05
    f, fp = f_eps_with_derivative(p, np.array([-0.3, -1e-9]), eps)
    assert np.all(f == 0.0)
    assert np.all(fp == 0.0)
    np.testing.assert_allclose(F_eps_extended(p, np.array([-0.3, 2.0]), eps),
                               [0.0, p.amplitude / 6.0], rtol=1e-14, atol=0.0)


def test_derivative_matches_finite_differences():
    p = CutoffProfile.for_diffusivity(2.0)
    eps = 0.07
    v = np.linspace(0.1 * eps, 0.9 * eps, 200)
    h = 1e-7
    f0, fp = f_eps_with_derivative(p, v, eps)
    fm, _ = f_eps_with_derivative(p, v - h, eps)
    fpl, _ = f_eps_with_derivative(p, v + h, eps)
    np.testing.assert_allclose(fp, (fpl - fm) / (2.0 * h), rtol=1e-5, atol=1e-4)
    np.testing.assert_allclose(f0, eval_f_eps(p, v, eps), rtol=1e-13)


def test_mollified_derivative_keeps_f_exact():
    """fp_band changes only the derivative; the residual f must not move."""
    p = CutoffProfile.for_diffusivity(1.0)
    eps = 0.05
    v = np.linspace(-0.5 * eps, 1.5 * eps, 4001)
    f0, fp0 = f_eps_with_derivative(p, v, eps, fp_band=0.0)
    f1, fp1 = f_eps_with_derivative(p, v, eps, fp_band=0.25)
    np.testing.assert_array_equal(f0, f1)
    # the plain derivative jumps by A/eps^2 at v=0; the mollified one is
    # continuous, so consecutive samples differ by at most slope * dv
    dv = v[1] - v[0]
    band = 0.25 * eps
    jump0 = np.abs(np.diff(fp0)).max()
    jump1 = np.abs(np.diff(fp1)).max()
    assert jump0 > 0.5 * p.amplitude / eps**2
    assert jump1 < 3.0 * (p.amplitude / eps**2) * dv / band


def test_inner_layer_glue_and_ode():
    # value 1 and slope -1/d on both sides of the glue point
    for d in (0.5, 1.0, 2.0):
        assert abs(one_dim_inner(0.0, d) - 1.0) < 1e-14
        h = 1e-6
        left = (one_dim_inner(0.0, d) - one_dim_inner(-h, d)) / h
        right = (one_dim_inner(h, d) - one_dim_inner(0.0, d)) / h
        assert abs(left + 1.0 / d) < 1e-5
        assert abs(right + 1.0 / d) < 1e-5
        # -d w'' + f_1(w) = 0 on the smooth side
        p = CutoffProfile.for_diffusivity(d)
        x = np.linspace(0.05, 6.0, 2000)
        w = one_dim_inner(x, d)
        h = x[1] - x[0]
        lap = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / h**2
        res = -d * lap + eval_f_eps(p, w[1:-1], 1.0)
        assert np.abs(res).max() < 5.0 * h**2


def test_inner_layer_limits():
    assert abs(one_dim_inner(-3.0, 1.0) - 4.0) < 1e-14
    assert one_dim_inner(40.0, 1.0) < 1e-14
    w = one_dim_inner(np.linspace(-2, 8, 500), 1.0)
    assert np.all(np.diff(w) < 0.0)


def test_analytic_plane():
    prof = AnalyticProfile(kind=AnalyticKind.TWO_PHASE_PLANE, lam=0.6)
    val = eval_analytic(prof, (np.array([-1.0, 1.0]), np.array([0.0, 0.0])))
    np.testing.assert_allclose(val, [0.8, 0.0])
    assert eval_analytic(prof, (0.0, -1.0)) == 0.0
    with pytest.raises(DomainError):
        AnalyticProfile(kind=AnalyticKind.TWO_PHASE_PLANE, lam=1.0)


def test_analytic_parabola():
    prof = AnalyticProfile(kind=AnalyticKind.PARABOLIC_CONTACT, D=2.0)
    assert eval_analytic(prof, (2.0, 0.0)) == 1.0
    assert eval_analytic(prof, (1.0, -0.25)) == 0.0
    assert eval_analytic(prof, (1.0, -0.2)) == pytest.approx(0.05)
    with pytest.raises(DomainError):
        AnalyticProfile(kind=AnalyticKind.PARABOLIC_CONTACT, D=-2.0)


def test_analytic_inner_broadcasts_flat_in_y():
    prof = AnalyticProfile(kind=AnalyticKind.ONE_DIM_INNER, d=1.0)
    x = np.array([-1.0, 0.0, 1.0])
    y = np.array([-2.0, 0.0, -0.5])
    np.testing.assert_array_equal(eval_analytic(prof, (x, y)), one_dim_inner(x))
    with pytest.raises(DomainError):
        AnalyticProfile(kind=AnalyticKind.ONE_DIM_INNER, d=0.0)


def test_parameters_validation():
    with pytest.raises(DomainError):
        Parameters(eps=0.0)
    with pytest.raises(DomainError):
        Parameters(L=-1.0)
    with pytest.raises(DomainError):
        Parameters(x_min=1.0)
    with pytest.raises(DomainError):
        Parameters(pin_x=20.0)
    with pytest.warns(ModelAssumptionWarning):
        Parameters(D=0.5, d=1.0)
    # the two-density model has no such assumption
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        Parameters(D=0.5, d=1.0, model_kind=ModelKind.TWO)
