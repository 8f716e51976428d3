import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from capillary import hkr
from capillary.errors import DomainError, HypothesisError
from capillary.spaceform import SpaceForm
from capillary.surfaces import rotated

from conftest import KS, rel_rho, surface


def cap(K, theta, frac=0.6, family="spherical_cap"):
    return surface(family, K, theta=theta, rho=rel_rho(K, frac))


def test_flat_disk_volume_integral_in_plane():
    p = surface("geodesic_disk")
    assert abs(hkr.volume_potential_integral(p, np.array([1.0, 0.0, 0.0]))) < 1e-12


@pytest.mark.parametrize("K", KS)
@pytest.mark.parametrize("theta", [np.pi / 3, np.pi / 2, 2.2])
@pytest.mark.parametrize("family", ["spherical_cap", "exterior_cap"])
def test_divergence_route_matches_solid_oracle(K, theta, family):
    p = cap(K, theta, family=family)
    a = p.info["axis"]
    div = hkr.volume_potential_integral(p, a)
    solid = hkr.solid_potential_integral(p, a)
    assert div == pytest.approx(solid, rel=1e-5)
    assert abs(div) > 1e-3


def test_volume_integral_is_linear():
    p = cap(-1, 1.0)
    a = p.info["axis"] + np.array([0.3, 0.0, 0.0])
    v1 = hkr.volume_potential_integral(p, a)
    assert hkr.volume_potential_integral(p, 2 * a) == pytest.approx(2 * v1, abs=1e-14)


def test_solid_oracle_needs_a_cap():
    with pytest.raises(DomainError):
        hkr.solid_potential_integral(surface("unduloid_piece", neck=0.4), np.array([0, 0, 1.0]))


@pytest.mark.parametrize("K", KS)
def test_hkr_equality_on_orthogonal_caps(K):
    p = cap(K, np.pi / 2)
    rep = hkr.hkr_check(p, p.info["axis"])
    assert rep.hypotheses_hold and rep.equality
    assert abs(rep.relative_margin) < 1e-6


@pytest.mark.parametrize("K", KS)
def test_hkr_strict_on_non_orthogonal_cap(K):
    p = cap(K, np.pi / 3)
    rep = hkr.hkr_check(p, p.info["axis"])
    assert rep.inequality_holds and not rep.equality
    assert rep.relative_margin > 10 * rep.tol


def test_hkr_strict_on_perturbed_cap():
    p = surface("perturbed_cap", theta=np.pi / 2, rho=0.8, amplitude=0.05, mode=2)
    rep = hkr.hkr_check(p, p.info["axis"])
    assert rep.min_H > 0 and rep.min_Va >= 0
    assert rep.relative_margin > 10 * rep.tol


def test_hkr_refusal():
    # the axis-centred unduloid crosses the plane V_a = 0
    p = surface("unduloid_piece", neck=0.4)
    rep = hkr.hkr_check(p, p.info["axis"])
    assert not rep.hypotheses_hold
    assert rep.inequality_holds is None and rep.equality is None
    assert "half ball" in rep.refusal
    assert np.isnan(rep.margin)
    with pytest.raises(HypothesisError):
        hkr.hkr_check(p, p.info["axis"], strict=True)
    # a minimal surface violates H > 0
    disk = surface("geodesic_disk")
    rep = hkr.hkr_check(disk, disk.info["axis"])
    assert "mean curvature" in rep.refusal


def test_hkr_needs_declared_region():
    from capillary.spaceform import SpaceForm
    from capillary.surfaces import sphere_cap_patch
    p = sphere_cap_patch(SpaceForm(0), np.zeros(3), 0.5, 1.0)
    with pytest.raises(DomainError):
        hkr.hkr_check(p, np.array([0, 0, 1.0]))


def test_alexandrov_on_free_boundary_caps():
    for K in KS:
        p = cap(K, np.pi / 2)
        assert hkr.alexandrov_consistency(p, p.info["axis"]).relative < 1e-7


def test_alexandrov_flat_disk_branch():
    p = surface("geodesic_disk")
    rep = hkr.alexandrov_consistency(p, np.array([1.0, 0.0, 0.2]))
    assert rep.identity == "alexandrov:H=0"
    assert abs(rep.lhs) < 1e-10 and abs(rep.rhs) < 1e-10


@pytest.mark.parametrize("k", [1, 2])
def test_alexandrov_higher_order_on_caps(k):
    for K in KS:
        p = cap(K, np.pi / 2)
        assert hkr.alexandrov_consistency(p, p.info["axis"], k=k).relative < 1e-7


@pytest.mark.parametrize("family,params", [("spherical_cap", dict(theta=np.pi / 3, rho=0.5)),
                                           ("unduloid_piece", dict(neck=0.3))])
def test_alexandrov_residual_is_n_times_hkr_margin(family, params):
    p = surface(family, **params)
    a = p.info["axis"] + np.array([0.0, 0.2, 0.0])
    rep = hkr.alexandrov_consistency(p, a, levels=(2,))
    g_margin = hkr.hkr_check(p, a)
    if not g_margin.hypotheses_hold:
        # recompute the margin without the hypothesis screen
        from capillary.geometry import scalar_batch
        from capillary.quadrature import build_grid, integrate
        g = build_grid(p, 8, 2)
        sc = scalar_batch(p, g.nodes, a)
        margin = integrate(g, sc["Va"]) / p.cmc - integrate(g, sc["g_Xa_nu"]) / p.n
    else:
        margin = g_margin.margin
    diff = rep.lhs - rep.rhs
    assert diff == pytest.approx(-p.n * margin, rel=1e-8, abs=1e-13)


@pytest.mark.parametrize("K", KS)
def test_radial_solution(K):
    sf = SpaceForm(K, 1.0)
    rep = hkr.radial_solution_residual(sf, np.zeros(3), 1.0, 500, seed=4)
    assert rep.residual < (1e-12 if K == 0 else 1e-9)
    assert rep.meta["routes_gap"] < 1e-9


def test_radial_solution_off_centre_and_other_amplitudes():
    for K in KS:
        sf = SpaceForm(K, 1.2 if K else 1.0)
        p = np.array([0.2, -0.1, 0.05]) * sf.r_model
        for A in (-0.5, 2.0):
            assert hkr.radial_solution_residual(sf, p, A, 200, seed=1).passed


def test_radial_solution_bad_centre():
    with pytest.raises(DomainError):
        hkr.radial_solution_residual(SpaceForm(0), np.zeros(2))


@settings(max_examples=5, deadline=None)
@given(seed=st.integers(0, 2 ** 31), K=st.sampled_from(KS))
def test_hkr_margin_invariant_under_rotations_fixing_a(seed, K):
    p = cap(K, np.pi / 3)
    a = p.info["axis"]
    base = hkr.hkr_check(p, a, level=1)
    angle = np.random.default_rng(seed).uniform(0, 2 * np.pi)
    Q = Rotation.from_rotvec(angle * a).as_matrix()
    rep = hkr.hkr_check(rotated(p, Q), a, level=1)
    assert rep.margin == pytest.approx(base.margin, abs=1e-10)


@settings(max_examples=5, deadline=None)
@given(scale=st.floats(0.1, 5.0))
def test_hkr_margin_scales_linearly(scale):
    p = cap(0, np.pi / 3)
    a = p.info["axis"]
    m1 = hkr.hkr_check(p, a, level=1).margin
    assert hkr.hkr_check(p, scale * a, level=1).margin == pytest.approx(scale * m1, rel=1e-12)
