"""Pointwise extrinsic geometry of parametric patches in a space-form ball.

A patch is a chart ``w -> x(w)`` from a parameter domain U in R^n into model
coordinates. Charts are pure jax functions ``chart(w, params)``; all partial
derivatives (up to third order for Laplacians) are taken by automatic
differentiation, and the ambient Christoffel symbols of ``gbar = e^{2u} delta``
are applied in closed form. Nothing here is mesh based.

Evaluation happens in batches through jit-compiled kernels keyed on the chart
function; node arrays are padded to a fixed chunk size so that compiled code
is reused across refinement levels.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from . import spaceform as sfm
from .errors import GeometryError, DomainError
from .spaceform import SpaceForm

CHUNK = 256
COND_LIMIT = 1e12


# ---------------------------------------------------------------------------
# parameter domains


@dataclass(frozen=True)
class DiskDomain:
    """Closed ball {|w| <= radius} in R^n; its boundary sphere lies on dB."""

    radius: float
    n: int = 2
    shape: str = "disk"

    @property
    def has_boundary(self):
        return True


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box; ``faces`` lists (axis, side) pairs lying on dB."""

    lo: tuple
    hi: tuple
    faces: tuple = ()
    periodic: tuple = ()
    panels: tuple = ()
    shape: str = "box"

    @property
    def n(self):
        return len(self.lo)

    @property
    def has_boundary(self):
        return len(self.faces) > 0


# ---------------------------------------------------------------------------
# patches


@dataclass(frozen=True, eq=False)
class ParametricPatch:
    """Immersed hypersurface given by a chart over a parameter domain.

    ``exterior`` marks patches outside a ball (the ball normal then points
    into the patch side); ``cmc`` and ``theta`` carry the claimed constant
    mean curvature and contact angle (``None`` when not claimed).
    ``orientation`` multiplies the chart-induced unit normal.
    """

    sf: SpaceForm
    chart: Callable
    params: dict
    domain: object
    exterior: bool = False
    cmc: float | None = None
    theta: float | None = None
    orientation: int = 1
    family: str = "custom"
    info: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.sf.n

    @property
    def closed(self):
        return not self.domain.has_boundary

    @property
    def side(self):
        """+1 for patches inside the ball, -1 for exterior patches."""
        return -1 if self.exterior else 1

    def with_orientation(self, orientation):
        return replace(self, orientation=int(orientation))

    def embed(self, w):
        """Model coordinates of parameter points ``w`` (shape (..., n))."""
        w = np.asarray(w, dtype=float)
        flat = w.reshape(-1, self.n)
        out = _run(_embed_batch, self, flat)
        return out.reshape(w.shape[:-1] + (self.sf.dim,))


# ---------------------------------------------------------------------------
# single-point kernels (traced)


def _unit_normal(J):
    """Euclidean unit normal of the column space of J (shape (n+1, n))."""
    dim = J.shape[0]
    comps = []
    for k in range(dim):
        minor = jnp.concatenate([J[:k], J[k + 1:]], axis=0)
        comps.append((-1.0) ** k * jnp.linalg.det(minor))
    v = jnp.stack(comps)
    return v / jnp.sqrt(jnp.sum(v * v))


def _first_order(chart, params, K, orient, w):
    x = chart(w, params)
    J = jax.jacfwd(chart)(w, params)
    lam = sfm.conformal_factor(K, x, jnp)
    nu = orient * _unit_normal(J) / lam
    return x, J, lam, nu


def _second_order(chart, params, K, orient, w):
    x, J, lam, nu = _first_order(chart, params, K, orient, w)
    hess = jax.hessian(chart)(w, params)  # (N, n, n)
    du = sfm.grad_log_factor(K, x, jnp)
    jd = J.T @ du
    JtJ = J.T @ J
    gamma = (jd[None, :, None] * J[:, None, :] + jd[None, None, :] * J[:, :, None]
             - JtJ[None, :, :] * du[:, None, None])
    second = hess + gamma
    h = -(lam * lam) * jnp.einsum("k,kij->ij", nu, second)
    G = lam * lam * JtJ
    Ginv = jnp.linalg.inv(G)
    S = Ginv @ h
    H = jnp.trace(S)
    h2 = jnp.trace(S @ S)
    return dict(x=x, J=J, lam=lam, nu=nu, G=G, h=h, H=H, h2=h2)


def _mean_curvature(chart, params, K, orient, w):
    return _second_order(chart, params, K, orient, w)["H"]


def _ambient_scalars(chart, params, sfp, orient, consts, w):
    """Scalar functions whose surface Laplacians enter the identity checks.

    consts = (a[0..N-1], cos_theta, side, boundary_scale, H_claim, P_boundary)
    """
    K, r = sfp[0], sfp[2]
    x, J, lam, nu = _first_order(chart, params, K, orient, w)
    dim = x.shape[0]
    a = consts[:dim]
    cos_t, side, s_b, Hc, Pb = consts[dim], consts[dim + 1], consts[dim + 2], consts[dim + 3], consts[dim + 4]
    lam2 = lam * lam
    xnu = lam2 * jnp.dot(x, nu)
    Xnu = lam2 * jnp.dot(sfm.field_x(K, r, x, a, jnp), nu)
    Ynu = lam2 * jnp.dot(sfm.field_y(K, x, a, jnp), nu)
    V0 = sfm.potential_0(K, x, jnp)
    Va = sfm.potential_a(K, x, a, jnp)
    n = dim - 1
    phi = n * (Va + side * s_b * cos_t * Ynu) - Hc * Xnu
    P = jnp.where(K == 0, 0.5 * jnp.dot(x, x), -K * V0)
    Phi = (P - Pb) * Hc - n * (xnu + side * cos_t * s_b)
    return jnp.concatenate([x, nu, jnp.stack([0.5 * jnp.dot(x, x), xnu, Xnu, Ynu, V0, Va, phi, Phi])])


SCALAR_NAMES = ("half_x2", "g_x_nu", "g_Xa_nu", "g_Ya_nu", "V0", "Va", "phi_a", "Phi")


def _laplacian_point(chart, params, sfp, orient, consts, w):
    K = sfp[0]

    def metric_at(w):
        J = jax.jacfwd(chart)(w, params)
        x = chart(w, params)
        lam = sfm.conformal_factor(K, x, jnp)
        return lam * lam * (J.T @ J)

    def flux(w):
        G = metric_at(w)
        Ginv = jnp.linalg.inv(G)
        sq = jnp.sqrt(jnp.linalg.det(G))
        ds = jax.jacfwd(_ambient_scalars, argnums=5)(chart, params, sfp, orient, consts, w)  # (m, n)
        return sq * (ds @ Ginv)  # (m, n): row s -> sqrt(g) g^{ij} d_j s

    G = metric_at(w)
    sq = jnp.sqrt(jnp.linalg.det(G))
    dflux = jax.jacfwd(flux)(w)  # (m, n, n)
    lap = jnp.trace(dflux, axis1=1, axis2=2) / sq
    vals = _ambient_scalars(chart, params, sfp, orient, consts, w)
    geo = _second_order(chart, params, K, orient, w)
    dH = jax.grad(_mean_curvature, argnums=4)(chart, params, K, orient, w)
    gradH = geo["J"] @ (jnp.linalg.inv(geo["G"]) @ dH)  # ambient components
    return dict(lap=lap, vals=vals, x=geo["x"], nu=geo["nu"], H=geo["H"],
                h2=geo["h2"], gradH=gradH)


def _boundary_point(chart, params, sfp, orient, consts, side, w, xi, T):
    K, r = sfp[0], sfp[2]
    geo = _second_order(chart, params, K, orient, w)
    x, J, lam, nu, G, h = geo["x"], geo["J"], geo["lam"], geo["nu"], geo["G"], geo["h"]
    lam2 = lam * lam
    Ginv = jnp.linalg.inv(G)
    m = Ginv @ xi
    m = m / jnp.sqrt(xi @ m)
    mu = J @ m
    radius = jnp.sqrt(jnp.dot(x, x))
    Nbar = side * x / (lam * radius)
    cos_t = -lam2 * jnp.dot(nu, Nbar)
    sin_t = lam2 * jnp.dot(mu, Nbar)
    theta = jnp.arctan2(sin_t, cos_t)
    w_bar = nu + cos_t * Nbar
    nubar = w_bar / jnp.sqrt(lam2 * jnp.dot(w_bar, w_bar))
    c, s = jnp.cos(theta), jnp.sin(theta)
    r_mu = mu - (s * Nbar + c * nubar)
    r_nu = nu - (-c * Nbar + s * nubar)
    recon = jnp.sqrt(lam2 * jnp.dot(r_mu, r_mu)) + jnp.sqrt(lam2 * jnp.dot(r_nu, r_nu))
    hmm = m @ h @ m
    B = T.T @ G @ T
    v = T.T @ h @ m
    hem = jnp.sqrt(jnp.abs(v @ jnp.linalg.solve(B, v)))
    ds = jnp.sqrt(jnp.linalg.det(B))
    dscal = jax.jacfwd(_ambient_scalars, argnums=5)(chart, params, sfp, orient, consts, w)
    dmu = dscal @ m
    vals = _ambient_scalars(chart, params, sfp, orient, consts, w)
    return dict(x=x, nu=nu, mu=mu, Nbar=Nbar, nubar=nubar, theta=theta,
                recon=recon, h_mumu=hmm, h_emu=hem, ds=ds, radius=radius,
                dmu=dmu, vals=vals, H=geo["H"], h2=geo["h2"], lam=lam)


# ---------------------------------------------------------------------------
# batched, jitted kernels


@partial(jax.jit, static_argnums=(0,))
def _embed_batch(chart, params, W):
    return jax.vmap(lambda w: chart(w, params))(W)


@partial(jax.jit, static_argnums=(0,))
def _shape_batch(chart, params, sfp, orient, W):
    return jax.vmap(lambda w: _second_order(chart, params, sfp[0], orient, w))(W)


@partial(jax.jit, static_argnums=(0,))
def _scalar_batch(chart, params, sfp, orient, consts, W):
    return jax.vmap(lambda w: _ambient_scalars(chart, params, sfp, orient, consts, w))(W)


@partial(jax.jit, static_argnums=(0,))
def _laplacian_batch(chart, params, sfp, orient, consts, W):
    return jax.vmap(lambda w: _laplacian_point(chart, params, sfp, orient, consts, w))(W)


@partial(jax.jit, static_argnums=(0,))
def _boundary_batch(chart, params, sfp, orient, consts, side, W, XI, T):
    return jax.vmap(lambda w, xi, t: _boundary_point(chart, params, sfp, orient, consts,
                                                     side, w, xi, t))(W, XI, T)


def _pad(arr, total):
    arr = np.asarray(arr, dtype=float)
    if arr.shape[0] == total:
        return arr
    fill = np.repeat(arr[:1], total - arr.shape[0], axis=0)
    return np.concatenate([arr, fill], axis=0)


def _run(kernel, patch, W, *extra, per_node=(), **kw):
    """Evaluate ``kernel`` over node array ``W`` in fixed-size chunks.

    ``per_node`` holds further arrays aligned with ``W`` (chunked alongside).
    ``extra`` are broadcast arguments placed between params and nodes.
    """
    W = np.asarray(W, dtype=float)
    count = W.shape[0]
    if count == 0:
        raise GeometryError("no evaluation nodes")
    outs = []
    for start in range(0, count, CHUNK):
        stop = min(start + CHUNK, count)
        chunk = [_pad(W[start:stop], CHUNK)] + [_pad(p[start:stop], CHUNK) for p in per_node]
        res = kernel(patch.chart, patch.params, *extra, *chunk, **kw)
        res = jax.tree_util.tree_map(lambda v: np.asarray(v)[: stop - start], res)
        outs.append(res)
    return jax.tree_util.tree_map(lambda *parts: np.concatenate(parts, axis=0), *outs)


def _sfp(patch):
    return jnp.asarray(patch.sf.packed())


def identity_constants(patch, a):
    """Constant vector consumed by the scalar-function kernels."""
    sf = patch.sf
    a = np.zeros(sf.dim) if a is None else np.asarray(a, dtype=float)
    cos_t = 0.0 if patch.theta is None else np.cos(patch.theta)
    Hc = 0.0 if patch.cmc is None else patch.cmc
    return np.concatenate([a, [cos_t, patch.side, sf.boundary_scale, Hc,
                               boundary_potential(sf)]])


def boundary_potential(sf):
    """Value on dB of the function P with Hessian-type identity used in Phi."""
    if sf.K == 0:
        return 0.5
    if sf.K == -1:
        return float(np.cosh(sf.R))
    return -float(np.cos(sf.R))


# ---------------------------------------------------------------------------
# batch evaluation API


def shape_batch(patch, W):
    """Second-order geometry at parameter nodes ``W`` (dict of arrays)."""
    out = _run(_shape_batch, patch, W, _sfp(patch), float(patch.orientation))
    G = out["G"]
    ev = np.linalg.eigvalsh(G)
    cond = ev[:, -1] / np.maximum(ev[:, 0], 1e-300)
    bad = np.nonzero(~(ev[:, 0] > 0) | (cond > COND_LIMIT))[0]
    if bad.size:
        raise GeometryError(f"degenerate induced metric at node {int(bad[0])} "
                            f"(condition number {cond[bad[0]]:.3g})")
    out["sqrtg"] = np.sqrt(np.linalg.det(G))
    return out


def scalar_batch(patch, W, a=None):
    """Named scalar functions (see ``SCALAR_NAMES``) plus x and nu at nodes ``W``."""
    consts = jnp.asarray(identity_constants(patch, a))
    vals = _run(_scalar_batch, patch, W, _sfp(patch), float(patch.orientation), consts)
    return split_scalars(vals, patch.sf.dim)


def split_scalars(vals, dim):
    """Split the stacked scalar array of the kernels into a dict."""
    out = {"x": vals[..., :dim], "nu": vals[..., dim:2 * dim]}
    for i, name in enumerate(SCALAR_NAMES):
        out[name] = vals[..., 2 * dim + i]
    return out


def laplacian_batch(patch, W, a=None):
    consts = jnp.asarray(identity_constants(patch, a))
    return _run(_laplacian_batch, patch, W, _sfp(patch), float(patch.orientation), consts)


def boundary_batch(patch, W, XI, T, a=None):
    consts = jnp.asarray(identity_constants(patch, a))
    out = _run(_boundary_batch, patch, W, _sfp(patch), float(patch.orientation), consts,
               float(patch.side), per_node=(XI, T))
    off = np.abs(out["radius"] - patch.sf.r_model)
    if np.max(off) > 1e-9:
        i = int(np.argmax(off))
        raise DomainError(f"boundary node {i} is off the ball boundary by {off[i]:.3g}")
    return out


def principal_curvatures(G, h):
    """Eigenvalues of the shape operator g^{-1}h, ascending (batched)."""
    L = np.linalg.cholesky(G)
    Linv = np.linalg.inv(L)
    A = Linv @ h @ np.swapaxes(Linv, -1, -2)
    return np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, -1, -2)))


def elementary_symmetric(kappa):
    """sigma_0..sigma_n of the last axis of ``kappa``."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    e = [np.ones(kappa.shape[:-1])] + [np.zeros(kappa.shape[:-1]) for _ in range(n)]
    for i in range(n):
        for k in range(i + 1, 0, -1):
            e[k] = e[k] + kappa[..., i] * e[k - 1]
    return np.stack(e, axis=-1)


# ---------------------------------------------------------------------------
# single-node API


@dataclass
class ShapeSample:
    position: np.ndarray
    tangents: np.ndarray
    normal: np.ndarray
    metric: np.ndarray
    second_form: np.ndarray
    H: float
    h_norm2: float
    kappa: np.ndarray
    sigma: np.ndarray

    @property
    def n(self):
        return self.metric.shape[0]

    def umbilicity(self):
        """n|h|^2 - H^2 (nonnegative, zero exactly at umbilic points)."""
        return self.n * self.h_norm2 - self.H ** 2

    def normal_residual(self, K):
        """max(|gbar(nu,nu) - 1|, max_i |gbar(nu, x_i)|)."""
        lam2 = sfm.conformal_factor(K, self.position) ** 2
        unit = abs(lam2 * self.normal @ self.normal - 1)
        tang = np.max(np.abs(lam2 * self.tangents.T @ self.normal))
        return float(max(unit, tang))


@dataclass
class BoundaryFrame:
    nu: np.ndarray
    mu: np.ndarray
    Nbar: np.ndarray
    nubar: np.ndarray
    theta: float
    reconstruction: float


def shape_at(patch, w):
    """Curvature data of ``patch`` at one parameter point."""
    w = np.asarray(w, dtype=float).reshape(1, patch.n)
    out = shape_batch(patch, w)
    G, h = out["G"][0], out["h"][0]
    kappa = principal_curvatures(G[None], h[None])[0]
    return ShapeSample(position=out["x"][0], tangents=out["J"][0], normal=out["nu"][0],
                       metric=G, second_form=h, H=float(out["H"][0]),
                       h_norm2=float(out["h2"][0]), kappa=kappa,
                       sigma=elementary_symmetric(kappa))


def boundary_frame_at(patch, s):
    """Boundary frame at a boundary parameter ``s`` (see :func:`boundary_point`)."""
    from .quadrature import boundary_point
    w, xi, T = boundary_point(patch, s)
    out = boundary_batch(patch, w[None], xi[None], T[None])
    return BoundaryFrame(nu=out["nu"][0], mu=out["mu"][0], Nbar=out["Nbar"][0],
                         nubar=out["nubar"][0], theta=float(out["theta"][0]),
                         reconstruction=float(out["recon"][0]))


def newton_tensor(sample: ShapeSample, k: int):
    """T_{k-1} = d sigma_k / d h as a symmetric (0,2) tensor."""
    n = sample.n
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}, got {k}")
    G = sample.metric
    S = np.linalg.solve(G, sample.second_form)
    T = np.eye(n)
    for j in range(1, k):
        T = sample.sigma[j] * np.eye(n) - S @ T
    flat = G @ T
    return 0.5 * (flat + flat.T)


def newton_traces(sample: ShapeSample, T):
    """(tr(T h), tr T) with indices raised by g."""
    Ginv = np.linalg.inv(sample.metric)
    return float(np.trace(Ginv @ T @ Ginv @ sample.second_form)), float(np.trace(Ginv @ T))


def principal_direction_residual(patch, level=1, rule_order=8):
    """max over boundary nodes of |h(e, mu)| for unit e tangent to dM."""
    from .quadrature import build_grid
    grid = build_grid(patch, rule_order, level)
    out = boundary_batch(patch, grid.bnodes, grid.bcovectors, grid.btangents)
    return float(np.max(out["h_emu"]))
