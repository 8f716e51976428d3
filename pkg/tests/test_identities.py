import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capillary import identities as ids
from capillary.errors import DomainError
from capillary.quadrature import build_grid, integrate
from capillary.spaceform import SpaceForm, sample_sphere

from conftest import KS, rel_rho, surface

E = np.eye(3)
AXIS = np.array([0.48, 0.6, 0.64])


def cap(K, theta, frac=0.6, **kw):
    return surface("spherical_cap", K, theta=theta, rho=rel_rho(K, frac), **kw)


def test_flat_disk_minkowski_trivial():
    rep = ids.minkowski_residual(surface("geodesic_disk"), E[0], levels=(0, 1))
    assert abs(rep.lhs) < 1e-12 and abs(rep.rhs) < 1e-12


def test_free_boundary_cap_minkowski_on_axis():
    p = surface("spherical_cap", theta=np.pi / 2, rho=1.0)
    rep = ids.minkowski_residual(p, p.info["axis"], levels=(0, 1, 2))
    assert rep.relative < 1e-8
    assert abs(rep.lhs) > 0.1


def test_hyperbolic_cap_minkowski_order():
    p = cap(-1, np.pi / 3, axis=(0.48, 0.6, 0.64))
    rep = ids.minkowski_residual(p, E[0], "hyperbolic_capillary", levels=(0, 1, 2))
    assert rep.passed and rep.relative < 1e-7
    assert rep.order >= 4


@pytest.mark.parametrize("K", KS)
@pytest.mark.parametrize("theta", [np.pi / 4, np.pi / 2, 3 * np.pi / 4])
def test_minkowski_interior_and_exterior(K, theta):
    for family in ("spherical_cap", "exterior_cap"):
        p = surface(family, K, theta=theta, rho=rel_rho(K), axis=(0.48, 0.6, 0.64))
        for a in E:
            rep = ids.minkowski_residual(p, a, levels=(1, 2))
            assert rep.passed, (family, rep.relative)


@pytest.mark.parametrize("K", KS)
def test_closed_sphere_minkowski(K):
    p = surface("closed_sphere", K, rho=0.5 * SpaceForm(K).r_model, center=(0.1, 0.08, 0.05))
    for a in E:
        assert ids.minkowski_residual(p, a, levels=(1, 2)).passed


def test_minkowski_variant_mismatch():
    with pytest.raises(DomainError):
        ids.minkowski_residual(cap(-1, 1.0), E[2], "euclidean_capillary")
    with pytest.raises(DomainError):
        ids.minkowski_residual(cap(0, 1.0), E[2], "free_boundary")
    with pytest.raises(ValueError):
        ids.minkowski_residual(cap(0, 1.0), E[2], "nonsense")
    with pytest.raises(ValueError):
        ids.minkowski_residual(cap(0, 1.0), np.ones(4))


def test_higher_k1_matches_free_boundary_minkowski():
    p = cap(-1, np.pi / 2)
    a = p.info["axis"]
    hi = ids.minkowski_higher(p, a, 1, levels=(1, 2))
    fb = ids.minkowski_residual(p, a, "free_boundary", levels=(1, 2))
    n = p.n
    assert abs(n * hi.lhs - fb.lhs) < 1e-12 * abs(fb.lhs)
    assert abs(n * hi.rhs - fb.rhs) < 1e-12 * abs(fb.rhs)


@pytest.mark.parametrize("K", KS)
def test_higher_order_k2_on_free_boundary_caps(K):
    p = cap(K, np.pi / 2, axis=(0.48, 0.6, 0.64))
    for a in E:
        rep = ids.minkowski_higher(p, a, 2, levels=(1, 2))
        assert rep.relative < 1e-7


def test_higher_order_on_flat_disk():
    rep = ids.minkowski_higher(surface("geodesic_disk"), E[0], 2, levels=(0, 1))
    assert abs(rep.lhs) < 1e-12 and abs(rep.rhs) < 1e-12


def test_higher_order_needs_free_boundary():
    with pytest.raises(DomainError):
        ids.minkowski_higher(cap(0, 1.0), E[2], 1)
    with pytest.raises(ValueError):
        ids.minkowski_higher(cap(0, np.pi / 2), E[2], 3)


def test_balance_flat_disk():
    p = surface("geodesic_disk")
    rep = ids.balance_residual(p, p.info["axis"], levels=(0, 1))
    assert rep.lhs == pytest.approx(2 * np.pi, rel=1e-10)
    assert abs(rep.lhs - rep.rhs) < 1e-10


@pytest.mark.parametrize("K", KS)
def test_balance_on_caps(K):
    for family in ("spherical_cap", "exterior_cap"):
        p = surface(family, K, theta=np.pi / 2, rho=rel_rho(K))
        rep = ids.balance_residual(p, p.info["axis"], levels=(1, 2))
        assert rep.relative < 1e-8


def test_balance_symmetric_direction():
    p = cap(0, 1.0)
    rep = ids.balance_residual(p, E[0], levels=(0, 1))
    assert abs(rep.rhs) < 1e-10


def test_balance_needs_boundary():
    with pytest.raises(DomainError):
        ids.balance_residual(surface("closed_sphere", rho=0.5), E[0])


def test_laplacian_flat_x2():
    rep = ids.laplacian_identity_residual(surface("geodesic_disk"), E[0], "eq-x2")
    assert rep.residual < 1e-10


def test_laplacian_phi_on_euclidean_cap():
    rep = ids.laplacian_identity_residual(cap(0, 1.0), AXIS, "eq-phi")
    assert rep.residual < 1e-6


def test_laplacian_phi_h_on_hyperbolic_cap():
    rep = ids.laplacian_identity_residual(cap(-1, 1.0), AXIS, "eq-phi-h")
    assert rep.residual < 1e-6


@pytest.mark.parametrize("which", ids.EUCLIDEAN_LAPLACIAN)
def test_euclidean_laplacian_identities_on_non_umbilic_surfaces(which):
    for p in (surface("unduloid_piece", neck=0.4),
              surface("perturbed_cap", theta=1.0, rho=0.5, amplitude=0.05, mode=2)):
        if which in ids.CMC_IDS and p.cmc is None:
            continue
        rep = ids.laplacian_identity_residual(p, AXIS, which)
        assert rep.passed, (which, p.family, rep.residual)


@pytest.mark.parametrize("K", KS)
@pytest.mark.parametrize("which", ids.UNIFIED_LAPLACIAN)
def test_unified_laplacian_identities(K, which):
    p = surface("perturbed_cap", K, theta=1.0, rho=rel_rho(K), amplitude=0.05, mode=2)
    if which in ids.CMC_IDS:
        p = cap(K, 1.0)
    rep = ids.laplacian_identity_residual(p, AXIS, which)
    assert rep.passed, rep.residual


def test_euclidean_identity_rejects_curved_ambient():
    with pytest.raises(DomainError):
        ids.laplacian_identity_residual(cap(1, 1.0), AXIS, "eq-x")
    with pytest.raises(ValueError):
        ids.laplacian_identity_residual(cap(0, 1.0), AXIS, "eq-unknown")


def test_robin_q_free_boundary_euclidean():
    rep = ids.robin_residual(surface("spherical_cap", theta=np.pi / 2, rho=0.8), AXIS)
    assert rep.meta["q_min"] == pytest.approx(1.0, abs=1e-12)
    assert rep.meta["q_max"] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_robin_q_free_boundary_hyperbolic(R):
    p = surface("spherical_cap", -1, R, theta=np.pi / 2, rho=0.5 * np.tanh(R / 2))
    rep = ids.robin_residual(p, AXIS)
    assert rep.meta["q_min"] == pytest.approx(1 / np.tanh(R), abs=1e-12)
    assert rep.meta["q_max"] == pytest.approx(1 / np.tanh(R), abs=1e-12)
    assert rep.passed


@pytest.mark.parametrize("K", KS)
@pytest.mark.parametrize("exterior", [False, True])
def test_robin_residuals(K, exterior):
    family = "exterior_cap" if exterior else "spherical_cap"
    p = surface(family, K, theta=np.pi / 3, rho=rel_rho(K))
    rep = ids.robin_residual(p, AXIS)
    assert rep.meta["residual_s1"] < 1e-7 and rep.meta["residual_s2"] < 1e-7


def test_robin_variant_must_match():
    with pytest.raises(DomainError):
        ids.robin_residual(cap(0, 1.0), AXIS, "hyperbolic")


def test_robin_refuses_varying_angle():
    p = surface("perturbed_cap", theta=1.0, rho=0.5, amplitude=0.1, mode=2, flat_boundary=False)
    with pytest.raises(DomainError):
        ids.robin_residual(p, AXIS)


def test_phi_on_flat_disk_integrates_to_zero():
    p = surface("geodesic_disk")
    g = build_grid(p, 8, 1)
    vals = [ids.phi_test_function(p, AXIS, w) for w in g.nodes]
    assert abs(integrate(g, np.array(vals))) < 1e-10


def test_phi_of_zero_direction():
    p = cap(0, 1.0)
    assert ids.phi_test_function(p, np.zeros(3), np.array([0.1, 0.2])) == 0.0


@pytest.mark.parametrize("K", KS)
def test_phi_mean_zero_on_caps(K):
    for theta in (np.pi / 4, np.pi / 2, 3 * np.pi / 4):
        for family in ("spherical_cap", "exterior_cap"):
            p = surface(family, K, theta=theta, rho=rel_rho(K), axis=(0.48, 0.6, 0.64))
            assert ids.phi_mean(p, E[0]).passed


@pytest.mark.parametrize("family,params", [("unduloid_piece", dict(neck=0.3)),
                                           ("catenoid_piece", {}), ("geodesic_disk", {})])
def test_phi_mean_zero_on_other_cmc_families(family, params):
    p = surface(family, **params)
    assert ids.phi_mean(p, p.info["axis"]).passed
    assert ids.phi_mean(p, np.array([1.0, 0.5, 0.0])).passed


def test_phi_needs_cmc():
    p = surface("perturbed_cap", theta=1.0, rho=0.5, amplitude=0.05, mode=2)
    with pytest.raises(DomainError):
        ids.phi_mean(p, AXIS)


def test_aux_phi_euclidean_cap():
    rep = ids.aux_phi_residual(cap(0, 1.0))
    assert rep.meta["boundary_sup"] < 1e-9 and rep.meta["interior_sup"] < 1e-6


def test_aux_phi_flat_disk_vanishes():
    rep = ids.aux_phi_residual(surface("geodesic_disk"))
    assert rep.residual < 1e-12


@pytest.mark.parametrize("K", KS)
def test_aux_phi_caps(K):
    assert ids.aux_phi_residual(cap(K, np.pi / 3)).passed


def test_aux_phi_unduloid_interior():
    # non-umbilic: the Laplacian of Phi is nonzero but matches the identity
    rep = ids.aux_phi_residual(surface("unduloid_piece", neck=0.4))
    assert rep.passed


@pytest.mark.parametrize("K,R,expected", [(-1, 1.0, 1 / np.tanh(1.0)), (0, 1.0, 1.0),
                                           (1, np.pi / 3, 1 / np.tan(np.pi / 3))])
def test_boundary_umbilic(K, R, expected):
    sf = SpaceForm(K, R)
    pts = sample_sphere(sf, 200, np.random.default_rng(5))
    a = np.array([0.3, 0.4, 0.5])
    pts = pts[np.abs(pts @ a) > 1e-3]
    rep = ids.boundary_umbilic_residual(sf, a, pts)
    assert rep.passed
    assert rep.meta["ratio_mean"] == pytest.approx(expected, abs=1e-10)


def test_boundary_umbilic_rejects_interior_points():
    with pytest.raises(DomainError):
        ids.boundary_umbilic_residual(SpaceForm(0), E[0], np.array([[0.5, 0, 0]]))


@settings(max_examples=10, deadline=None)
@given(K=st.sampled_from(KS), theta=st.floats(0.4, 2.7),
       a1=st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       a2=st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_minkowski_linear_in_direction(K, theta, a1, a2):
    p = cap(K, theta, axis=(0.48, 0.6, 0.64))
    a1, a2 = np.array(a1), np.array(a2)
    r = [ids.minkowski_residual(p, a, levels=(0,)) for a in (a1, a2, a1 + a2)]
    assert r[2].residual <= r[0].residual + r[1].residual + 1e-12
    assert r[2].lhs == pytest.approx(r[0].lhs + r[1].lhs, abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(K=st.sampled_from(KS), theta=st.floats(0.4, 2.7), exterior=st.booleans())
def test_phi_mean_zero_property(K, theta, exterior):
    family = "exterior_cap" if exterior else "spherical_cap"
    p = surface(family, K, theta=theta, rho=rel_rho(K), axis=(0.48, 0.6, 0.64))
    assert ids.phi_mean(p, E[1], level=1).passed


@settings(max_examples=10, deadline=None)
@given(amp=st.floats(-0.1, 0.1), mode=st.integers(0, 4), K=st.sampled_from(KS))
def test_minkowski_holds_for_non_cmc_constant_angle(amp, mode, K):
    p = surface("perturbed_cap", K, theta=1.2, rho=rel_rho(K, 0.5), amplitude=amp, mode=mode)
    assert ids.minkowski_residual(p, AXIS, levels=(2,)).passed
