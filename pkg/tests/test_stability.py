import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import jnp_zeros

from capillary import stability as stab
from capillary.errors import DomainError

from conftest import rel_rho, surface

NEUMANN_DISK = jnp_zeros(1, 1)[0] ** 2  # first zero of J1' squared


def neumann_lambda(level):
    forms = stab.assemble_forms(surface("geodesic_disk"), level, robin_scale=0.0,
                                potential=False)
    return stab.constrained_eigen(forms, 1)[0][0]


def test_neumann_disk_coarse_levels_converge():
    errs = [abs(neumann_lambda(L) - NEUMANN_DISK) for L in (0, 1, 2)]
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] / NEUMANN_DISK < 0.02
    assert np.log2(errs[1] / errs[2]) > 1.5


def test_mass_total_is_area():
    forms = stab.assemble_forms(surface("geodesic_disk"), 2)
    assert forms.mass.sum() == pytest.approx(np.pi, rel=1e-4)
    assert forms.area == pytest.approx(np.pi, rel=1e-4)
    np.testing.assert_allclose(forms.mean.sum(), forms.area, rtol=1e-12)


def test_hemisphere_robin_coefficient_is_one():
    forms = stab.assemble_forms(surface("spherical_cap", theta=np.pi / 2, rho=1.0), 1)
    assert forms.meta["q_min"] == pytest.approx(1.0, abs=1e-12)
    assert forms.meta["q_max"] == pytest.approx(1.0, abs=1e-12)
    assert forms.robin.sum() == pytest.approx(forms.length, rel=1e-12)


@pytest.mark.parametrize("family,params", [("geodesic_disk", {}),
                                           ("spherical_cap", dict(theta=1.0, rho=0.5)),
                                           ("unduloid_piece", dict(neck=0.4))])
def test_matrices_are_symmetric(family, params):
    forms = stab.assemble_forms(surface(family, **params), 1)
    for M in (forms.stiffness, forms.potential, forms.robin, forms.mass):
        assert abs(M - M.T).max() < 1e-12 * max(1.0, abs(M).max())


@pytest.mark.parametrize("family,params", [("geodesic_disk", {}),
                                           ("spherical_cap", dict(theta=2.0, rho=0.5)),
                                           ("unduloid_piece", dict(neck=0.2))])
def test_meshes_are_not_degenerate(family, params):
    for L in (0, 1, 2):
        assert stab.min_angle(stab.build_mesh(surface(family, **params), L)) > stab.MIN_ANGLE_DEG


def test_classify_examples():
    assert stab.classify([-0.8, -0.82]) == "unstable"
    assert stab.classify([3e-4, 1e-4]) == "stable"
    assert stab.classify([-5e-3, 2e-3]) == "stable"
    assert stab.classify([-5e-3, -2e-2]) == "marginal"
    assert stab.classify([-0.5, 0.1]) == "marginal"
    with pytest.raises(ValueError):
        stab.classify([0.1])


def test_classify_uses_band_edge():
    # a lambda_1 inside the band counts as stable, outside as unstable
    assert stab.classify([-0.009, -0.0095], tol=1e-2) == "stable"
    assert stab.classify([-0.011, -0.012], tol=1e-2) == "unstable"


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0])
def test_free_boundary_caps_stable_coarse(rho):
    rep = stab.spectrum_study(surface("spherical_cap", theta=np.pi / 2, rho=rho), (1, 2))
    assert rep.classification == "stable"


def test_flat_disk_stable_coarse():
    assert stab.spectrum_study(surface("geodesic_disk"), (1, 2)).classification == "stable"


def test_unduloid_unstable_coarse():
    rep = stab.spectrum_study(surface("unduloid_piece", neck=0.4), (1, 2))
    assert rep.classification == "unstable"
    assert all(lv[0] < 0 for lv in rep.level_eigenvalues)


def test_constraint_is_enforced():
    forms = stab.assemble_forms(surface("spherical_cap", theta=1.2, rho=0.5), 1)
    vals, vecs = stab.constrained_eigen(forms, 3)
    np.testing.assert_allclose(forms.mean @ vecs, 0.0, atol=1e-12)
    assert np.all(np.diff(vals) >= -1e-12)
    with pytest.raises(ValueError):
        stab.constrained_eigen(forms, 0)


def test_forms_refuse_bad_patches():
    with pytest.raises(DomainError):
        stab.assemble_forms(surface("closed_sphere", rho=0.5), 1)
    p = surface("perturbed_cap", theta=1.0, rho=0.5, amplitude=0.1, mode=2, flat_boundary=False)
    with pytest.raises(DomainError):
        stab.assemble_forms(p, 1)


def test_pairing_of_zero_direction():
    assert stab.stability_pairing(surface("spherical_cap", theta=1.0, rho=0.5),
                                  np.zeros(3), 1) == (0.0, 0.0)


@pytest.mark.parametrize("K", [-1, 0, 1])
def test_pairing_on_umbilic_caps_vanishes(K):
    p = surface("spherical_cap", K, theta=np.pi / 2, rho=rel_rho(K))
    # phi_a vanishes identically for a on the axis, so take a transverse direction
    a = np.array([1.0, 0.0, 0.0])
    lhs = [stab.stability_pairing(p, a, L)[0] for L in (1, 2)]
    rhs = stab.stability_pairing(p, a, 1)[1]
    assert abs(rhs) < 1e-9
    assert abs(lhs[1]) < abs(lhs[0]) / 3


def test_pairing_on_unduloid_coarse():
    p = surface("unduloid_piece", neck=0.4)
    lhs, rhs = stab.stability_pairing(p, p.info["axis"], 2)
    assert abs(lhs - rhs) < 0.1 * abs(rhs)


@settings(max_examples=6, deadline=None)
@given(scale=st.floats(0.5, 1.5), family=st.sampled_from(["geodesic_disk", "spherical_cap"]))
def test_eigenvalues_decrease_with_robin_coefficient(scale, family):
    p = surface(family) if family == "geodesic_disk" else surface(family, theta=1.2, rho=0.5)
    lo = stab.constrained_eigen(stab.assemble_forms(p, 1, robin_scale=0.9 * scale), 3)[0]
    hi = stab.constrained_eigen(stab.assemble_forms(p, 1, robin_scale=1.1 * scale), 3)[0]
    assert np.all(hi <= lo + 1e-12)
