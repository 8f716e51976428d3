"""Closed-form ambient geometry of geodesic balls in the three space forms.

Every space form is realized on a subset of R^{n+1} with the conformal metric
``gbar = e^{2u} <.,.>``:

* K = 0:  e^u = 1                      (Euclidean unit ball)
* K = -1: e^u = 2 / (1 - |x|^2)        (Poincare ball)
* K = +1: e^u = 2 / (1 + |x|^2)        (stereographic chart of the sphere)

A geodesic ball of radius R centred at the origin is the Euclidean ball of
radius ``r_model`` (1, tanh(R/2), tan(R/2)).

The low-level functions below take the curvature ``K`` as a plain number and
an array namespace ``xp`` so that the same formulas serve the numpy public
API and the traced jax kernels of :mod:`capillary.geometry`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .reports import pointwise_report


@dataclass(frozen=True)
class SpaceForm:
    """Ambient model: curvature ``K``, ball radius ``R``, hypersurface dim ``n``."""

    K: int = 0
    R: float = 1.0
    n: int = 2

    def __post_init__(self):
        if self.K not in (-1, 0, 1):
            raise ValueError(f"curvature must be -1, 0 or 1, got {self.K}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"hypersurface dimension must be >= 2, got {self.n}")
        R = float(self.R)
        if self.K == 0 and R != 1.0:
            raise ValueError("the Euclidean ball radius is fixed to 1")
        if self.K == -1 and not R > 0:
            raise ValueError("hyperbolic ball radius must be positive")
        if self.K == 1 and not 0 < R < np.pi:
            raise ValueError("spherical ball radius must lie in (0, pi)")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "n", int(self.n))

    @property
    def dim(self):
        """Ambient dimension n + 1."""
        return self.n + 1

    @property
    def r_model(self):
        if self.K == 0:
            return 1.0
        if self.K == -1:
            return float(np.tanh(self.R / 2))
        return float(np.tan(self.R / 2))

    @property
    def boundary_scale(self):
        """Factor s with x = s * Nbar on the ball boundary: 1, sinh R, sin R."""
        return {0: 1.0, -1: float(np.sinh(self.R)), 1: float(np.sin(self.R))}[self.K]

    @property
    def boundary_curvature(self):
        """Principal curvature of the ball boundary w.r.t. the outward normal."""
        return {0: 1.0, -1: 1 / float(np.tanh(self.R)),
                1: 1 / float(np.tan(self.R))}[self.K]

    @property
    def ricci(self):
        """Ric(nu, nu) for any unit vector."""
        return self.n * self.K

    def packed(self):
        """(K, R, r_model) as a float array, the form consumed by kernels."""
        return np.array([self.K, self.R, self.r_model], dtype=float)

    def admissible(self, x):
        """Mask of points inside the model domain (strictly, for K = -1)."""
        x = np.asarray(x, dtype=float)
        if self.K == -1:
            return np.sum(x * x, axis=-1) < 1.0
        return np.all(np.isfinite(x), axis=-1)


# ---------------------------------------------------------------------------
# array-namespace generic formulas


def _dot(x, y, xp=np):
    return xp.sum(x * y, axis=-1)


def conformal_factor(K, x, xp=np):
    """e^u at model points ``x`` (last axis = coordinates)."""
    r2 = _dot(x, x, xp)
    return xp.where(K == 0, xp.ones_like(r2), 2.0 / (1.0 + K * r2))


def grad_log_factor(K, x, xp=np):
    """Euclidean gradient of u: -K e^u x."""
    return -K * conformal_factor(K, x, xp)[..., None] * x


def christoffel(K, x, Z, W, xp=np):
    """Gamma(Z, W) for gbar = e^{2u} delta (Cartesian components)."""
    du = grad_log_factor(K, x, xp)
    return (_dot(Z, du, xp)[..., None] * W + _dot(W, du, xp)[..., None] * Z
            - _dot(Z, W, xp)[..., None] * du)


def metric(K, x, v, w, xp=np):
    """gbar(v, w) at x."""
    lam = conformal_factor(K, x, xp)
    return lam * lam * _dot(v, w, xp)


def potential_0(K, x, xp=np):
    """V_0: 1, (1+|x|^2)/(1-|x|^2), (1-|x|^2)/(1+|x|^2)."""
    lam = conformal_factor(K, x, xp)
    return xp.where(K == 0, xp.ones_like(lam), lam - 1.0)


def potential_a(K, x, a, xp=np):
    """V_a = e^u <x, a>."""
    return conformal_factor(K, x, xp) * _dot(x, a, xp)


def field_x(K, r, x, a, xp=np):
    """X_a; for K = 0 this is <x,a>x - (|x|^2+1)a/2."""
    coef = xp.where(K == 0, 1.0, 2.0 / (1.0 + K * r * r))
    xa = _dot(x, a, xp)[..., None]
    r2 = _dot(x, x, xp)[..., None]
    return coef * (xa * x - 0.5 * (r2 + r * r) * a)


def field_y(K, x, a, xp=np):
    """Y_a: a (K = 0), (1+|x|^2)a/2 - <x,a>x (K = -1), (1-|x|^2)a/2 + <x,a>x (K = 1)."""
    xa = _dot(x, a, xp)[..., None]
    r2 = _dot(x, x, xp)[..., None]
    curved = 0.5 * (1.0 - K * r2) * a + K * xa * x
    return xp.where(K == 0, a + 0.0 * x, curved)


def grad_factor(K, x, xp=np):
    """Euclidean gradient of e^u: -K e^{2u} x."""
    lam = conformal_factor(K, x, xp)
    return -K * (lam * lam)[..., None] * x


def hess_factor(K, x, xp=np):
    """Euclidean Hessian of e^u: -K e^{2u} I + 2K^2 e^{3u} x x^T."""
    lam = conformal_factor(K, x, xp)[..., None, None]
    eye = xp.eye(x.shape[-1])
    return -K * lam ** 2 * eye + 2 * K * K * lam ** 3 * x[..., :, None] * x[..., None, :]


# ---------------------------------------------------------------------------
# public numpy API

_POTENTIALS = ("V0", "Va")
_FIELDS = ("Xa", "Ya")


def _points(sf, x, on_boundary=False):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != sf.dim:
        raise DomainError(f"expected points in R^{sf.dim}, got shape {x.shape}")
    if on_boundary:
        r = np.sqrt(np.sum(x * x, axis=-1))
        if np.any(np.abs(r - sf.r_model) > 1e-12 * max(1.0, sf.r_model)):
            raise DomainError("point is not on the ball boundary |x| = r_model")
    elif not np.all(sf.admissible(x)):
        raise DomainError("point outside the model domain")
    return x


def _direction(sf, a):
    a = np.asarray(a, dtype=float)
    if a.shape != (sf.dim,):
        raise ValueError(f"direction must have shape ({sf.dim},)")
    return a


def eval_potential(sf: SpaceForm, kind: str, x, a=None):
    """V_0 or V_a at model point(s) ``x``."""
    x = _points(sf, x)
    if kind == "V0":
        return potential_0(sf.K, x)
    if kind == "Va":
        return potential_a(sf.K, x, _direction(sf, a))
    raise ValueError(f"unknown potential {kind!r}; expected one of {_POTENTIALS}")


def eval_field(sf: SpaceForm, kind: str, x, a):
    """Cartesian components of X_a or Y_a at ``x``."""
    x = _points(sf, x)
    a = _direction(sf, a)
    if kind == "Xa":
        return field_x(sf.K, sf.r_model, x, a)
    if kind == "Ya":
        return field_y(sf.K, x, a)
    raise ValueError(f"unknown field {kind!r}; expected one of {_FIELDS}")


def _field_fn(sf, kind, a):
    K, r = sf.K, sf.r_model
    fns = {
        "a": lambda x: np.broadcast_to(a, x.shape).copy(),
        "e^{-u}a": lambda x: a / conformal_factor(K, x)[..., None],
        "x": lambda x: x.copy(),
        "Xa": lambda x: field_x(K, r, x, a),
        "Ya": lambda x: field_y(K, x, a),
        "V0": lambda x: potential_0(K, x),
        "Va": lambda x: potential_a(K, x, a),
    }
    if kind not in fns:
        raise ValueError(f"unknown field kind {kind!r}")
    return fns[kind]


def _flat_derivative(sf, kind, x, Z, a):
    """Closed-form Euclidean directional derivative D_Z of the field/function."""
    K, r = sf.K, sf.r_model
    xz = _dot(x, Z)[..., None]
    if kind == "a":
        return np.zeros_like(x)
    if kind == "e^{-u}a":
        du = grad_log_factor(K, x)
        return -(_dot(du, Z)[..., None] / conformal_factor(K, x)[..., None]) * a
    if kind == "x":
        return np.array(Z, dtype=float, copy=True) + 0 * x
    if kind == "Xa":
        coef = 1.0 if K == 0 else 2.0 / (1.0 + K * r * r)
        return coef * (_dot(Z, a)[..., None] * x + _dot(x, a)[..., None] * Z - xz * a)
    if kind == "Ya":
        return K * (-xz * a + _dot(Z, a)[..., None] * x + _dot(x, a)[..., None] * Z)
    if kind == "V0":
        return _dot(grad_factor(K, x), Z)
    if kind == "Va":
        lam = conformal_factor(K, x)
        return lam * _dot(Z, a) + _dot(x, a) * _dot(grad_factor(K, x), Z)
    raise ValueError(f"unknown field kind {kind!r}")


def ambient_covariant_derivative(sf: SpaceForm, field_kind: str, x, Z, a=None):
    """Closed-form covariant derivative (in gbar) of a field or potential along Z.

    ``field_kind`` is one of ``a``, ``e^{-u}a``, ``x``, ``Xa``, ``Ya`` (vector
    fields, returns Cartesian components) or ``V0``, ``Va`` (functions,
    returns the scalar Z(V)).
    """
    x = _points(sf, x)
    Z = np.asarray(Z, dtype=float)
    if a is None:
        a = np.zeros(sf.dim)
    a = _direction(sf, a)
    flat = _flat_derivative(sf, field_kind, x, Z, a)
    if field_kind in _POTENTIALS:
        return flat
    W = _field_fn(sf, field_kind, a)(x)
    return flat + christoffel(sf.K, x, Z, W)


def fd_covariant_derivative(sf: SpaceForm, field_kind: str, x, Z, a=None, step=1e-5):
    """Central finite-difference counterpart of :func:`ambient_covariant_derivative`."""
    x = np.asarray(x, dtype=float)
    Z = np.asarray(Z, dtype=float)
    a = np.zeros(sf.dim) if a is None else _direction(sf, a)
    fn = _field_fn(sf, field_kind, a)
    flat = (fn(x + step * Z) - fn(x - step * Z)) / (2 * step)
    if field_kind in _POTENTIALS:
        return flat
    return flat + christoffel(sf.K, x, Z, fn(x))


def potential_gradient(sf: SpaceForm, kind: str, x, a=None):
    """Euclidean gradient of V_0 or V_a."""
    K = sf.K
    x = np.asarray(x, dtype=float)
    if kind == "V0":
        return grad_factor(K, x)
    a = _direction(sf, a)
    lam = conformal_factor(K, x)[..., None]
    return lam * a + _dot(x, a)[..., None] * grad_factor(K, x)


def potential_hessian(sf: SpaceForm, kind: str, x, a=None):
    """Covariant Hessian of V in the Cartesian coordinate basis (closed form)."""
    K = sf.K
    x = np.asarray(x, dtype=float)
    grad = potential_gradient(sf, kind, x, a)
    if kind == "V0":
        flat = hess_factor(K, x)
    else:
        a = _direction(sf, a)
        gf = grad_factor(K, x)
        flat = (a[..., :, None] * gf[..., None, :] + gf[..., :, None] * a[..., None, :]
                + _dot(x, a)[..., None, None] * hess_factor(K, x))
    return flat - _gamma_dv(K, x, grad)


def _gamma_dv(K, x, grad):
    """dV(Gamma(e_i, e_j)) = u_i V_j + u_j V_i - delta_ij <du, dV>."""
    du = grad_log_factor(K, x)
    eye = np.eye(x.shape[-1])
    return (du[..., :, None] * grad[..., None, :] + grad[..., :, None] * du[..., None, :]
            - _dot(du, grad)[..., None, None] * eye)


def fd_potential_hessian(sf: SpaceForm, kind: str, x, a=None, step=1e-5):
    """Covariant Hessian with the flat part from central differences of the gradient."""
    K = sf.K
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    cols = []
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = step
        cols.append((potential_gradient(sf, kind, x + e, a)
                     - potential_gradient(sf, kind, x - e, a)) / (2 * step))
    flat = np.stack(cols, axis=-1)
    flat = 0.5 * (flat + np.swapaxes(flat, -1, -2))
    return flat - _gamma_dv(K, x, potential_gradient(sf, kind, x, a))


def fd_potential_gradient(sf: SpaceForm, kind: str, x, a=None, step=1e-5):
    x = np.asarray(x, dtype=float)
    fn = _field_fn(sf, kind, np.zeros(sf.dim) if a is None else _direction(sf, a))
    cols = []
    for j in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[j] = step
        cols.append((fn(x + e) - fn(x - e)) / (2 * step))
    return np.stack(cols, axis=-1)


def ball_normal(sf: SpaceForm, x_on_boundary):
    """Outward gbar-unit normal of the ball boundary at |x| = r_model."""
    x = _points(sf, x_on_boundary, on_boundary=True)
    lam = conformal_factor(sf.K, x)[..., None]
    return x / (lam * sf.r_model)


def sample_ball(sf: SpaceForm, count, rng, radius=None):
    """Uniform random points in the closed model ball (or a smaller radius)."""
    radius = sf.r_model if radius is None else radius
    v = rng.standard_normal((count, sf.dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    rad = radius * rng.random(count) ** (1.0 / sf.dim)
    return v * rad[:, None]


def sample_sphere(sf: SpaceForm, count, rng):
    """Random points on the ball boundary |x| = r_model."""
    v = rng.standard_normal((count, sf.dim))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * sf.r_model


def _jacobian(sf, kind, x, a, fd):
    """Matrix whose column i is the covariant derivative along e_i."""
    dim = x.shape[-1]
    deriv = fd_covariant_derivative if fd else ambient_covariant_derivative
    cols = [deriv(sf, kind, x, np.broadcast_to(np.eye(dim)[i], x.shape), a)
            for i in range(dim)]
    return np.stack(cols, axis=-1)


def _sym(m):
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def field_identity_residuals(sf: SpaceForm, a, points, boundary_points, fd=False):
    """Max residuals of the defining identities of X_a, Y_a, V_0, V_a.

    Tensor residuals are measured in a gbar-orthonormal frame, so that
    they are dimensionless. With ``fd`` the flat derivative parts come
    from central differences instead of the closed forms.
    """
    a = _direction(sf, a)
    K = sf.K
    eye = np.eye(sf.dim)
    out = {}
    # in the orthonormal frame e^{-u} e_i, gbar(nabla_{E_i} W, E_j) = (nabla_{e_i} W)_j
    jx = _jacobian(sf, "Xa", points, a, fd)
    va = potential_a(K, points, a)
    out["conformal_killing_X"] = float(np.max(np.abs(_sym(jx) - va[:, None, None] * eye)))
    jy = _jacobian(sf, "Ya", points, a, fd)
    out["killing_Y"] = float(np.max(np.abs(_sym(jy))))
    lam2 = conformal_factor(K, points)[:, None, None] ** 2
    hess = fd_potential_hessian if fd else potential_hessian
    for kind in _POTENTIALS:
        V = potential_0(K, points) if kind == "V0" else va
        res = hess(sf, kind, points, a) / lam2 + K * V[:, None, None] * eye
        out[f"hessian_{kind}"] = float(np.max(np.abs(res)))
    if len(boundary_points):
        Nbar = ball_normal(sf, boundary_points)
        X = field_x(K, sf.r_model, boundary_points, a)
        out["tangency_X"] = float(np.max(np.abs(metric(K, boundary_points, X, Nbar))))
    return out


def check_field_identities(sf: SpaceForm, a, sample_count=1000, seed=0, tol=1e-8):
    """Verify the field/potential identities at random points of the ball.

    Closed-form residuals and finite-difference residuals (central
    differences, step 1e-5) are both reported; the largest of them decides
    pass/fail against ``tol``.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    pts = sample_ball(sf, sample_count, rng)
    bpts = sample_sphere(sf, sample_count, rng)
    closed = field_identity_residuals(sf, a, pts, bpts, fd=False)
    fd = field_identity_residuals(sf, a, pts, bpts, fd=True)
    gaps = {}
    for kind in ("Xa", "Ya", "e^{-u}a"):
        gaps[kind] = float(np.max(np.abs(_jacobian(sf, kind, pts, _direction(sf, a), False)
                                         - _jacobian(sf, kind, pts, _direction(sf, a), True))))
    lam = conformal_factor(sf.K, pts)[:, None]
    for kind in _POTENTIALS:
        g = potential_gradient(sf, kind, pts, a)
        gap = (g - fd_potential_gradient(sf, kind, pts, a)) / lam
        gaps[f"grad_{kind}"] = float(np.max(np.abs(gap)))
    worst = max(list(closed.values()) + list(fd.values()) + list(gaps.values()))
    meta = {"K": sf.K, "R": sf.R, "n": sf.n, "a": list(map(float, a)),
            "samples": sample_count, "closed_form": closed,
            "finite_difference": fd, "closed_vs_fd": gaps}
    return pointwise_report("field_identities", worst, tol, meta)
