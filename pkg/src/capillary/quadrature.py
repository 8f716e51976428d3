"""Tensor Gauss-Legendre quadrature on parametric patches.

Disk domains use polar tensor grids (radius x hyperspherical angles) with the
polar Jacobian folded into the weights; box domains use plain tensor grids.
Level L splits every axis into ``base_panels * 2**L`` panels, each carrying a
``rule_order``-point Gauss rule. Metric area/length elements come from the
geometry kernels, and reductions use numpy's pairwise summation over a fixed
node order, so integrals are bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import jax
import jax.numpy as jnp
import numpy as np

from .geometry import BoxDomain, DiskDomain, boundary_batch, shape_batch


def gauss_panels(lo, hi, panels, order):
    """Composite Gauss-Legendre nodes/weights on [lo, hi]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _sphere_point(angles):
    """Hyperspherical coordinates: angles (alpha_1..alpha_{m-1}, beta) -> S^{m}."""
    m = angles.shape[0]
    comps = []
    prod = 1.0
    for k in range(m - 1):
        comps.append(prod * jnp.cos(angles[k]))
        prod = prod * jnp.sin(angles[k])
    comps.append(prod * jnp.cos(angles[m - 1]))
    comps.append(prod * jnp.sin(angles[m - 1]))
    return jnp.stack(comps)


_sphere_batch = jax.jit(jax.vmap(_sphere_point))
_sphere_jac_batch = jax.jit(jax.vmap(jax.jacfwd(_sphere_point)))


def sphere_point(angles):
    """Unit vectors in R^{m+1} for an (N, m) array of hyperspherical angles."""
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    return np.asarray(_sphere_batch(jnp.asarray(angles)))


def sphere_jacobian(angles):
    """d omega / d angles, shape (N, m+1, m)."""
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    return np.asarray(_sphere_jac_batch(jnp.asarray(angles)))


def _angle_grid(m, order, level):
    """Tensor grid over the hyperspherical angles of S^{m}.

    Returns nodes, raw tensor weights and the spherical volume Jacobian.
    """
    axes = []
    for k in range(m - 1):
        axes.append(gauss_panels(0.0, np.pi, 2 ** level, order))
    axes.append(gauss_panels(0.0, 2 * np.pi, 2 * 2 ** level, order))
    nodes, weights = _tensor(axes)
    jac = np.ones(len(weights))
    for k in range(m - 1):
        jac *= np.sin(nodes[:, k]) ** (m - 1 - k)
    return nodes, weights, jac


def _tensor(axes):
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return nodes, weights


@dataclass
class QuadratureGrid:
    """Interior and boundary nodes of a patch with metric weights."""

    nodes: np.ndarray
    pweights: np.ndarray
    area: np.ndarray
    bnodes: np.ndarray
    bpweights: np.ndarray
    bcovectors: np.ndarray
    btangents: np.ndarray
    length: np.ndarray
    level: int
    rule_order: int
    geo: dict = field(default_factory=dict, repr=False)
    bgeo: dict = field(default_factory=dict, repr=False)

    @property
    def total_area(self):
        return float(np.sum(self.area))

    @property
    def total_length(self):
        return float(np.sum(self.length))


def _disk_interior(dom, order, level):
    n = dom.n
    s, ws = gauss_panels(0.0, dom.radius, 2 ** level, order)
    ang, wa, jac = _angle_grid(n - 1, order, level)
    omega = sphere_point(ang)
    nodes = (s[:, None, None] * omega[None, :, :]).reshape(-1, n)
    weights = (ws[:, None] * s[:, None] ** (n - 1) * (wa * jac)[None, :]).ravel()
    return nodes, weights


def _disk_boundary(dom, order, level):
    n = dom.n
    ang, wa, _ = _angle_grid(n - 1, order, level)
    omega = sphere_point(ang)
    # the metric length element sqrt(det T^t g T) already carries the
    # angular Jacobian, so the raw tensor weights are used here
    T = dom.radius * sphere_jacobian(ang)
    return dom.radius * omega, wa, omega, T


def _box_interior(dom, order, level, panels):
    axes = [gauss_panels(lo, hi, p * 2 ** level, order)
            for lo, hi, p in zip(dom.lo, dom.hi, panels)]
    return _tensor(axes)


def _box_boundary(dom, order, level, panels):
    n = dom.n
    nodes, weights, cov, tan = [], [], [], []
    for axis, side in dom.faces:
        others = [j for j in range(n) if j != axis]
        axes = [gauss_panels(dom.lo[j], dom.hi[j], panels[j] * 2 ** level, order) for j in others]
        if axes:
            sub, w = _tensor(axes)
        else:
            sub, w = np.zeros((1, 0)), np.ones(1)
        full = np.zeros((len(w), n))
        full[:, others] = sub
        full[:, axis] = dom.hi[axis] if side > 0 else dom.lo[axis]
        xi = np.zeros((len(w), n))
        xi[:, axis] = side
        T = np.zeros((len(w), n, n - 1))
        for c, j in enumerate(others):
            T[:, j, c] = 1.0
        nodes.append(full)
        weights.append(w)
        cov.append(xi)
        tan.append(T)
    return (np.concatenate(nodes), np.concatenate(weights), np.concatenate(cov),
            np.concatenate(tan))


def build_grid(patch, rule_order=8, level=0):
    """Quadrature grid with metric weights for ``patch`` at refinement ``level``."""
    if not (isinstance(rule_order, (int, np.integer)) and 4 <= rule_order <= 64):
        raise ValueError(f"rule_order must be an integer in 4..64, got {rule_order}")
    if level < 0:
        raise ValueError("level must be >= 0")
    dom = patch.domain
    n = patch.n
    if isinstance(dom, DiskDomain):
        if dom.n != n:
            raise ValueError("domain dimension does not match the patch")
        nodes, pw = _disk_interior(dom, rule_order, level)
        bnodes, bpw, cov, tan = _disk_boundary(dom, rule_order, level)
    elif isinstance(dom, BoxDomain):
        panels = getattr(dom, "panels", None) or (1,) * n
        nodes, pw = _box_interior(dom, rule_order, level, panels)
        if dom.faces:
            bnodes, bpw, cov, tan = _box_boundary(dom, rule_order, level, panels)
        else:
            bnodes = np.zeros((0, n))
            bpw = np.zeros(0)
            cov = np.zeros((0, n))
            tan = np.zeros((0, n, n - 1))
    else:
        raise ValueError(f"unsupported reference-domain shape {getattr(dom, 'shape', dom)!r}")
    geo = shape_batch(patch, nodes)
    area = pw * geo["sqrtg"]
    bgeo = {}
    if len(bnodes):
        bgeo = boundary_batch(patch, bnodes, cov, tan)
        length = bpw * bgeo["ds"]
    else:
        length = np.zeros(0)
    return QuadratureGrid(nodes=nodes, pweights=pw, area=area, bnodes=bnodes,
                          bpweights=bpw, bcovectors=cov, btangents=tan, length=length,
                          level=level, rule_order=rule_order, geo=geo, bgeo=bgeo)


def boundary_point(patch, s):
    """Boundary parameter -> (w, covector, tangent matrix).

    Disk domains take the n-1 hyperspherical angles; box domains take
    ``(face_index, coordinates along the remaining axes...)``.
    """
    dom = patch.domain
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if isinstance(dom, DiskDomain):
        omega = sphere_point(s[None])[0]
        T = dom.radius * sphere_jacobian(s[None])[0]
        return dom.radius * omega, omega, T
    if not dom.faces:
        raise ValueError("closed patch has no boundary")
    axis, side = dom.faces[int(s[0])]
    n = dom.n
    others = [j for j in range(n) if j != axis]
    w = np.zeros(n)
    w[others] = s[1:]
    w[axis] = dom.hi[axis] if side > 0 else dom.lo[axis]
    xi = np.zeros(n)
    xi[axis] = side
    T = np.zeros((n, n - 1))
    for c, j in enumerate(others):
        T[j, c] = 1.0
    return w, xi, T


def integrate(grid, values, region="interior"):
    """Metric-weighted sum of nodal ``values`` over the interior or boundary."""
    if region == "interior":
        weights = grid.area
    elif region == "boundary":
        weights = grid.length
    else:
        raise ValueError(f"region must be 'interior' or 'boundary', got {region!r}")
    values = np.asarray(values, dtype=float)
    if values.shape != weights.shape:
        raise ValueError(f"expected {weights.shape[0]} nodal values, got shape {values.shape}")
    bad = np.nonzero(~np.isfinite(values))[0]
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"non-finite integrand value {values[i]} at {region} node {i}")
    return float(np.sum(values * weights))


def convergence_order(values_per_level, true_value=None, floor=1e-12):
    """Observed convergence order from a sequence of refinement levels.

    With ``true_value`` the errors are |v - true|; without it, successive
    differences (Richardson). Errors at or below ``floor`` count as zero;
    a zero error after a nonzero one gives ``inf``, and zero error at every
    level also gives ``inf``. The finest resolved pair decides the value.
    """
    v = np.asarray(values_per_level, dtype=float)
    if v.size < 3:
        raise ValueError("convergence_order needs at least 3 levels")
    if true_value is None:
        err = np.abs(np.diff(v))
    else:
        err = np.abs(v - true_value)
    err = np.where(err <= floor, 0.0, err)
    order = math.inf
    for e0, e1 in zip(err[:-1], err[1:]):
        if e0 == 0:
            continue
        order = math.inf if e1 == 0 else math.log2(e0 / e1)
    return order
