import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capillary.quadrature import build_grid, convergence_order, gauss_panels, integrate
from capillary.spaceform import SpaceForm, eval_potential
from capillary.surfaces import geodesic_disk, sphere_cap_patch

from conftest import rel_rho, surface


def hemisphere():
    return sphere_cap_patch(SpaceForm(0), np.zeros(3), 1.0, np.pi / 2)


def test_flat_disk_area():
    grid = build_grid(surface("geodesic_disk"), 16, 0)
    assert grid.total_area == pytest.approx(np.pi, abs=1e-10)


def test_hemisphere_area_and_equator():
    grid = build_grid(hemisphere(), 8, 1)
    assert grid.total_area == pytest.approx(2 * np.pi, abs=1e-8)
    assert integrate(grid, np.ones_like(grid.length), "boundary") == pytest.approx(2 * np.pi,
                                                                                   abs=1e-10)


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_hyperbolic_disk_area(R):
    grid = build_grid(geodesic_disk(SpaceForm(-1, R)), 8, 2)
    assert grid.total_area == pytest.approx(2 * np.pi * (np.cosh(R) - 1), abs=1e-8)


def test_odd_integrand_on_disk():
    grid = build_grid(surface("geodesic_disk"), 8, 1)
    x = grid.geo["x"]
    assert abs(integrate(grid, x @ np.array([0.6, 0.8, 0.0]))) < 1e-12


def test_potential_self_convergence_on_hyperbolic_cap():
    K = -1
    p = surface("spherical_cap", K, theta=np.pi / 3, rho=rel_rho(K))
    sf = p.sf
    a = np.array([0.0, 0.0, 1.0])
    vals = []
    for level in (0, 2):
        grid = build_grid(p, 8, level)
        vals.append(integrate(grid, eval_potential(sf, "Va", grid.geo["x"], a)))
    assert vals[0] == pytest.approx(vals[1], abs=1e-8)


def test_convergence_order_examples():
    assert convergence_order([1e-2, 2.5e-3, 6.25e-4], true_value=0.0) == pytest.approx(2.0)
    assert convergence_order([0.0, 0.0, 0.0], true_value=0.0) == math.inf
    with pytest.raises(ValueError):
        convergence_order([1.0, 2.0])


def test_exact_polynomial_gives_infinite_order():
    vals = []
    for level in range(3):
        x, w = gauss_panels(0.0, 1.0, 2 ** level, 4)
        vals.append(np.sum(w * x ** 5))
    assert convergence_order(vals, true_value=1 / 6) == math.inf


def test_hemisphere_area_order():
    # a coarse order-4 chart rule over a cap that is not polynomial in the chart
    p = sphere_cap_patch(SpaceForm(0), np.zeros(3), 1.0, 2.5)
    exact = 2 * np.pi * (1 - np.cos(2.5))
    vals = [build_grid(p, 4, L).total_area for L in range(4)]
    assert convergence_order(vals, true_value=exact) >= 4


def test_bad_inputs():
    grid = build_grid(surface("geodesic_disk"), 8, 0)
    with pytest.raises(ValueError):
        integrate(grid, np.ones(3))
    with pytest.raises(ValueError):
        integrate(grid, np.ones_like(grid.area), region="volume")
    bad = np.ones_like(grid.area)
    bad[4] = np.nan
    with pytest.raises(ValueError, match="node 4"):
        integrate(grid, bad)
    with pytest.raises(ValueError):
        build_grid(surface("geodesic_disk"), 2, 0)
    with pytest.raises(ValueError):
        build_grid(surface("geodesic_disk"), 8, -1)


def test_grid_is_reproducible():
    p = surface("perturbed_cap", theta=1.0, rho=0.6, amplitude=0.05, mode=2)
    g1, g2 = build_grid(p, 8, 1), build_grid(p, 8, 1)
    assert np.array_equal(g1.area, g2.area)
    assert g1.total_area == g2.total_area


@settings(max_examples=30, deadline=None)
@given(c1=st.floats(-3, 3), c2=st.floats(-3, 3))
def test_integrate_is_linear(c1, c2):
    grid = build_grid(hemisphere(), 6, 0)
    f, g = grid.geo["x"][:, 0], grid.geo["x"][:, 2] ** 2
    lhs = integrate(grid, c1 * f + c2 * g)
    rhs = c1 * integrate(grid, f) + c2 * integrate(grid, g)
    assert abs(lhs - rhs) < 1e-14 * (1 + abs(c1) + abs(c2)) * 10


@settings(max_examples=20, deadline=None)
@given(lo=st.floats(-2, 0), width=st.floats(0.1, 3), panels=st.integers(1, 6),
       order=st.integers(2, 10))
def test_gauss_panels_integrate_polynomials_exactly(lo, width, panels, order):
    x, w = gauss_panels(lo, lo + width, panels, order)
    deg = 2 * order - 1
    hi = lo + width
    assert np.sum(w * x ** deg) == pytest.approx((hi ** (deg + 1) - lo ** (deg + 1)) / (deg + 1),
                                                 rel=1e-11, abs=1e-11)
