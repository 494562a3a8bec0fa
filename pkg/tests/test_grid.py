"""Graded grid construction."""

import warnings

import numpy as np
import pytest

from roadfield.errors import GridConstructionError, GridResolutionWarning
from roadfield.grid import Grading, Grid, build_grid, build_grid_1d
from roadfield.model import Parameters


def test_factor_one_is_uniform():
    p = Parameters(eps=0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridResolutionWarning)
        g = build_grid(p, 33, 17, Grading(x_factor=1.0, y_factor=1.0))
    np.testing.assert_allclose(g.x_nodes, np.linspace(p.x_min, p.x_max, 33))
    np.testing.assert_allclose(g.y_nodes, np.linspace(-p.L, 0.0, 17))
    assert g.nx == 33 and g.ny == 17
    np.testing.assert_allclose(g.hx, (p.x_max - p.x_min) / 32.0)


def test_dual_widths_partition_the_span():
    g = Grid(x_nodes=np.array([0.0, 0.1, 0.4, 1.0]),
             y_nodes=np.array([-2.0, -0.5, 0.0]))
    np.testing.assert_allclose(g.wx, [0.05, 0.2, 0.45, 0.3])
    assert abs(g.wx.sum() - 1.0) < 1e-15
    assert abs(g.wy.sum() - 2.0) < 1e-15
    assert g.dy_top == 0.5


def test_auto_grid_refines_toward_road_and_pin():
    p = Parameters(eps=0.05)
    g = build_grid(p, 256, 64)
    assert np.all(np.diff(g.x_nodes) > 0.0)
    assert np.all(np.diff(g.y_nodes) > 0.0)
    assert g.x_nodes[0] == p.x_min and g.x_nodes[-1] == p.x_max
    assert g.y_nodes[0] == -p.L and g.y_nodes[-1] == 0.0
    # the fine band near the pin is much finer than the uniform spacing
    h_uni = (p.x_max - p.x_min) / 255.0
    assert g.hx.min() < 0.25 * h_uni
    i_pin = np.searchsorted(g.x_nodes, p.pin_x)
    assert g.hx[i_pin] < 0.25 * h_uni
    # the regularization layer below the road is resolved
    assert g.dy_top <= 0.25 * p.eps * (1.0 + 1e-9)


def test_under_resolved_band_warns_but_builds():
    p = Parameters(eps=0.01)
    with pytest.warns(GridResolutionWarning):
        g = build_grid(p, 64, 64)
    assert np.all(np.diff(g.x_nodes) > 0.0)


def test_explicit_coarse_y_grading_warns():
    p = Parameters(eps=0.05)
    with pytest.warns(GridResolutionWarning):
        build_grid(p, 64, 5, Grading(y_factor=1.0))


def test_construction_errors():
    p = Parameters()
    with pytest.raises(GridConstructionError):
        build_grid(p, 1, 16)
    with pytest.raises(GridConstructionError):
        build_grid(p, 16, 1)
    with pytest.raises(GridConstructionError), warnings.catch_warnings():
        warnings.simplefilter("ignore", GridResolutionWarning)
        build_grid(p, 32, 32, Grading(y_factor=-2.0))
    with pytest.raises(GridConstructionError):
        build_grid_1d(p, 1)


def test_grid_1d():
    p = Parameters(eps=0.2)
    x = build_grid_1d(p, 513)
    assert x[0] == p.x_min and x[-1] == p.x_max
    assert np.all(np.diff(x) > 0.0)
    # default central spacing eps*min(d,1)/10
    i = np.searchsorted(x, p.pin_x)
    assert np.diff(x)[i] <= 0.02 * (1.0 + 1e-12)
    # coarse request degrades to uniform
    xu = build_grid_1d(p, 9, h_center=10.0)
    np.testing.assert_allclose(xu, np.linspace(p.x_min, p.x_max, 9))


def test_random_parameters_produce_valid_grids():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = Parameters(
            d=float(rng.uniform(0.3, 2.0)),
            D=float(rng.uniform(2.0, 6.0)),
            L=float(rng.uniform(0.5, 4.0)),
            eps=float(rng.uniform(0.02, 0.3)),
        )
        nx = int(rng.integers(48, 160))
        ny = int(rng.integers(24, 96))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GridResolutionWarning)
            g = build_grid(p, nx, ny)
        assert g.nx == nx and g.ny == ny
        assert np.all(np.diff(g.x_nodes) > 0.0)
        assert np.all(np.diff(g.y_nodes) > 0.0)
        assert abs(g.wx.sum() - (p.x_max - p.x_min)) < 1e-12 * (p.x_max - p.x_min)
        assert abs(g.wy.sum() - p.L) < 1e-12 * max(1.0, p.L)
        assert g.dy_top == pytest.approx(g.y_nodes[-1] - g.y_nodes[-2])
