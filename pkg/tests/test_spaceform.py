import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capillary.errors import DomainError
from capillary.spaceform import (
    SpaceForm, ambient_covariant_derivative, ball_normal, check_field_identities,
    conformal_factor, eval_field, eval_potential, fd_covariant_derivative,
    field_identity_residuals, metric, potential_hessian, sample_ball, sample_sphere,
)

from conftest import KS

E1 = np.array([1.0, 0.0, 0.0])


def test_va_vanishes_at_origin_hyperbolic():
    sf = SpaceForm(-1, 1.0)
    a = np.array([0.3, -0.2, 0.9])
    assert eval_potential(sf, "Va", np.zeros(3), a) == 0.0


def test_va_hyperbolic_substitution():
    sf = SpaceForm(-1, 2.0)
    assert eval_potential(sf, "Va", np.array([0.5, 0, 0]), E1) == pytest.approx(4 / 3, abs=1e-15)


def test_va_euclidean_is_linear():
    assert eval_potential(SpaceForm(0), "Va", np.array([0.3, 0, 0]), E1) == pytest.approx(0.3)


def test_xa_at_origin_euclidean():
    np.testing.assert_allclose(eval_field(SpaceForm(0), "Xa", np.zeros(3), E1), -E1 / 2)


def test_xa_vanishes_at_a_on_unit_sphere():
    np.testing.assert_allclose(eval_field(SpaceForm(0), "Xa", E1, E1), 0.0, atol=1e-15)


def test_ya_at_origin_hyperbolic():
    np.testing.assert_allclose(eval_field(SpaceForm(-1, 1.0), "Ya", np.zeros(3), E1), E1 / 2)


def test_point_outside_hyperbolic_model_raises():
    with pytest.raises(DomainError):
        eval_potential(SpaceForm(-1, 1.0), "V0", np.array([1.2, 0, 0]))


@pytest.mark.parametrize("K,R,expected", [(-1, 1.0, np.tanh(0.5)), (0, 1.0, 1.0),
                                           (1, 1.0, np.tan(0.5))])
def test_r_model(K, R, expected):
    assert SpaceForm(K, R).r_model == pytest.approx(expected, rel=1e-15)


def test_r_model_hyperbolic_relation():
    for R in (0.3, 1.0, 2.5):
        r = SpaceForm(-1, R).r_model
        assert (1 + r ** 2) / (1 - r ** 2) == pytest.approx(np.cosh(R), rel=1e-13)


@pytest.mark.parametrize("K,R", [(-1, 0.7), (-1, 2.0), (1, 0.7), (1, 2.5)])
def test_v0_on_boundary_round_trip(K, R):
    sf = SpaceForm(K, R)
    x = np.array([0.0, sf.r_model, 0.0])
    expected = np.cosh(R) if K == -1 else np.cos(R)
    assert eval_potential(sf, "V0", x) == pytest.approx(expected, abs=1e-12)


def test_invalid_space_forms():
    for args in [(2, 1.0), (0, 2.0), (-1, 0.0), (1, np.pi), (0, 1.0, 1)]:
        with pytest.raises(ValueError):
            SpaceForm(*args)


@pytest.mark.parametrize("K", KS)
def test_ricci(K):
    assert SpaceForm(K, 1.0, 3).ricci == 3 * K


def test_euclidean_xa_conformal_killing_factor(rng):
    sf = SpaceForm(0)
    x = sample_ball(sf, 50, rng)
    a = np.array([0.2, -0.5, 0.4])
    J = np.stack([ambient_covariant_derivative(sf, "Xa", x, np.broadcast_to(e, x.shape), a)
                  for e in np.eye(3)], axis=-1)
    sym = 0.5 * (J + np.swapaxes(J, 1, 2))
    np.testing.assert_allclose(sym, (x @ a)[:, None, None] * np.eye(3), atol=1e-14)


def test_hyperbolic_v0_gradient_direction(rng):
    # derivative of V0 along Z equals gbar(x, Z)
    sf = SpaceForm(-1, 1.5)
    x = sample_ball(sf, 40, rng)
    Z = rng.standard_normal(x.shape)
    dV = ambient_covariant_derivative(sf, "V0", x, Z)
    np.testing.assert_allclose(dV, metric(-1, x, x, Z), atol=1e-13)


def test_hyperbolic_ya_killing_fd_oracle(rng):
    sf = SpaceForm(-1, 1.0)
    x = sample_ball(sf, 100, rng)
    res = field_identity_residuals(sf, E1, x, np.zeros((0, 3)), fd=True)
    assert res["killing_Y"] < 1e-8
    closed = field_identity_residuals(sf, E1, x, np.zeros((0, 3)))
    assert closed["killing_Y"] < 1e-12


def test_field_identities_euclidean():
    rep = check_field_identities(SpaceForm(0), E1, 1000, seed=3, tol=1e-10)
    assert rep.passed, rep.meta


def test_v0_hessian_hyperbolic(rng):
    sf = SpaceForm(-1, 1.0)
    x = sample_ball(sf, 200, rng)
    lam2 = conformal_factor(-1, x)[:, None, None] ** 2
    res = potential_hessian(sf, "V0", x) / lam2 - eval_potential(sf, "V0", x)[:, None, None] * np.eye(3)
    assert np.max(np.abs(res)) < 1e-10


def test_xa_tangent_on_spherical_boundary(rng):
    sf = SpaceForm(1, 1.2)
    x = sample_sphere(sf, 50, rng)
    X = eval_field(sf, "Xa", x, np.array([0.3, 0.1, -0.7]))
    assert np.max(np.abs(metric(1, x, X, ball_normal(sf, x)))) == pytest.approx(0.0, abs=1e-15)


def test_ball_normal_examples():
    np.testing.assert_allclose(ball_normal(SpaceForm(0), E1), E1)
    sf = SpaceForm(-1, 1.3)
    x = np.array([sf.r_model, 0, 0])
    np.testing.assert_allclose(ball_normal(sf, x), x / np.sinh(1.3), rtol=1e-14)


def test_ball_normal_off_boundary_raises():
    with pytest.raises(DomainError):
        ball_normal(SpaceForm(0), np.array([0.5, 0, 0]))


@settings(max_examples=40, deadline=None)
@given(K=st.sampled_from(KS), R=st.floats(0.2, 2.8), seed=st.integers(0, 2 ** 31))
def test_ball_normal_is_unit(K, R, seed):
    sf = SpaceForm(K, 1.0 if K == 0 else R)
    x = sample_sphere(sf, 5, np.random.default_rng(seed))
    N = ball_normal(sf, x)
    np.testing.assert_allclose(metric(K, x, N, N), 1.0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(K=st.sampled_from(KS), seed=st.integers(0, 2 ** 31))
def test_closed_form_identities_hold(K, seed):
    rng = np.random.default_rng(seed)
    sf = SpaceForm(K, 1.0)
    a = rng.standard_normal(3)
    res = field_identity_residuals(sf, a, sample_ball(sf, 20, rng), sample_sphere(sf, 5, rng))
    assert max(res.values()) < 1e-12 * max(1.0, np.linalg.norm(a))


@settings(max_examples=30, deadline=None)
@given(K=st.sampled_from(KS), seed=st.integers(0, 2 ** 31))
def test_covariant_derivative_matches_fd(K, seed):
    rng = np.random.default_rng(seed)
    sf = SpaceForm(K, 1.0)
    x = sample_ball(sf, 10, rng, radius=0.9 * sf.r_model)
    Z = rng.standard_normal(x.shape)
    a = rng.standard_normal(3)
    for kind in ("Xa", "Ya"):
        exact = ambient_covariant_derivative(sf, kind, x, Z, a)
        fd = fd_covariant_derivative(sf, kind, x, Z, a)
        np.testing.assert_allclose(exact, fd, atol=1e-7 * (1 + np.abs(exact).max()))


@settings(max_examples=30, deadline=None)
@given(K=st.sampled_from(KS), seed=st.integers(0, 2 ** 31))
def test_conformal_factor_positive(K, seed):
    sf = SpaceForm(K, 1.0)
    x = sample_ball(sf, 50, np.random.default_rng(seed))
    assert np.all(conformal_factor(K, x) > 0)
