"""P1 finite elements for the second variation of capillary surfaces (n = 2).

The quadratic form

    Q(f) = int |grad f|^2 - (|h|^2 + nK) f^2 dA - oint q f^2 ds

is discretized with piecewise linear elements on the parameter domain of a
patch. Disk charts get a ring triangulation whose boundary elements follow
the circular arc exactly (blending map), box charts of surfaces of
revolution a periodic structured mesh. Metric data (g, |h|^2, q, ds) comes
from the geometry kernels at element quadrature points. The spectrum is
computed on the hyperplane int f dA = 0 through an explicit orthonormal
basis built from a Householder reflector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import DomainError, GeometryError
from .geometry import BoxDomain, DiskDomain, boundary_batch, shape_batch, scalar_batch
from .identities import robin_coefficient
from .quadrature import build_grid, integrate
from .reports import _plain

# degree-5 seven-point rule on the reference triangle (barycentric a, b, b)
_A1, _B1 = 0.797426985353087, 0.101286507323456
_A2, _B2 = 0.059715871789770, 0.470142064105115
_W0, _W1, _W2 = 0.225, 0.125939180544827, 0.132394152788506
TRI_BARY = np.array([[1 / 3, 1 / 3, 1 / 3],
                     [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
                     [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2]])
TRI_WEIGHTS = 0.5 * np.array([_W0, _W1, _W1, _W1, _W2, _W2, _W2])
EDGE_ORDER = 5
MIN_ANGLE_DEG = 1.0
STABILITY_TOL = 1e-2
BOX_BASE = 8


# ---------------------------------------------------------------------------
# meshes


@dataclass
class Mesh:
    """Triangulation of a parameter domain.

    ``coords`` holds per-element vertex coordinates (periodic meshes repeat
    nodes with shifted coordinates), ``arc`` marks elements whose edge
    opposite vertex 0 lies on the circle ``|w| = arc_radius`` (columns:
    flag, start angle, angle increment). Boundary edges are described
    by their parametrization kind.
    """

    nodes: np.ndarray
    elements: np.ndarray
    coords: np.ndarray
    arc: np.ndarray
    arc_radius: float
    bedges: np.ndarray
    bkind: str
    bdata: np.ndarray
    level: int


def _ring_mesh(radius, level):
    N = 3 * 2 ** level
    nodes = [np.zeros(2)]
    rings = [[0]]
    angles = [np.zeros(1)]
    for i in range(1, N + 1):
        m = 6 * i
        ang = 2 * np.pi * np.arange(m) / m
        start = len(nodes)
        nodes.extend(radius * i / N * np.column_stack([np.cos(ang), np.sin(ang)]))
        rings.append(list(range(start, start + m)))
        angles.append(ang)
    nodes = np.asarray(nodes)
    elements, arcs = [], []
    for i in range(1, N + 1):
        outer, oang = rings[i], angles[i]
        inner, iang = rings[i - 1], angles[i - 1]
        mo, mi = len(outer), len(inner)
        if mi == 1:
            for k in range(mo):
                elements.append((inner[0], outer[k], outer[(k + 1) % mo]))
            continue
        # merge-walk by angle around the annulus
        a, b = 0, 0
        while a < mi or b < mo:
            na = iang[a + 1] if a + 1 < mi else 2 * np.pi
            nb = oang[b + 1] if b + 1 < mo else 2 * np.pi
            if b < mo and (a >= mi or nb <= na + 1e-12):
                elements.append((inner[a % mi], outer[b], outer[(b + 1) % mo]))
                b += 1
            else:
                elements.append((outer[b % mo], inner[(a + 1) % mi], inner[a]))
                a += 1
    elements = np.asarray(elements)
    coords = nodes[elements].copy()
    arc = np.zeros((len(elements), 3))
    outer = set(rings[N])
    m = 6 * N
    for e, (v0, v1, v2) in enumerate(elements):
        if v1 in outer and v2 in outer:
            k = v1 - rings[N][0]
            arc[e] = (1.0, 2 * np.pi * k / m, 2 * np.pi / m)
    ring = np.asarray(rings[N])
    bedges = np.column_stack([ring, np.roll(ring, -1)])
    bdata = np.column_stack([2 * np.pi * np.arange(m) / m, np.full(m, 2 * np.pi / m)])
    return Mesh(nodes=nodes, elements=elements, coords=coords, arc=arc, arc_radius=radius,
                bedges=bedges, bkind="arc", bdata=bdata, level=level)


def _graded_nodes(patch, count):
    """Nodes on the first box axis equidistributing 1/4 + |h| / mean |h|.

    Surfaces of revolution concentrate curvature at their necks; grading
    the meridian mesh there balances the P1 interpolation error.
    """
    dom = patch.domain
    fine = np.linspace(dom.lo[0], dom.hi[0], 2049)
    w = np.column_stack([fine, np.full_like(fine, dom.lo[1])])
    hnorm = np.sqrt(shape_batch(patch, w)["h2"])
    monitor = 0.25 + hnorm / np.mean(hnorm)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (monitor[1:] + monitor[:-1]) * np.diff(fine))])
    s = np.interp(np.linspace(0.0, cdf[-1], count + 1), cdf, fine)
    s[0], s[-1] = dom.lo[0], dom.hi[0]
    return s


def _box_mesh(patch, level):
    dom = patch.domain
    if dom.n != 2 or tuple(dom.periodic) != (1,):
        raise DomainError("stability meshes on boxes need 2-D domains periodic in the second axis")
    Ns = Nphi = BOX_BASE * 2 ** level
    s = _graded_nodes(patch, Ns)
    phi = np.linspace(dom.lo[1], dom.hi[1], Nphi + 1)
    idx = lambda i, j: i * Nphi + (j % Nphi)
    nodes = np.array([(si, pj) for si in s for pj in phi[:-1]])
    elements, coords = [], []
    for i in range(Ns):
        for j in range(Nphi):
            p00, p10 = (s[i], phi[j]), (s[i + 1], phi[j])
            p01, p11 = (s[i], phi[j + 1]), (s[i + 1], phi[j + 1])
            elements.append((idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)))
            coords.append((p00, p10, p11))
            elements.append((idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)))
            coords.append((p00, p11, p01))
    bedges, bdata = [], []
    for axis, side in dom.faces:
        if axis != 0:
            raise DomainError("boundary faces must be s = const")
        i = Ns if side > 0 else 0
        for j in range(Nphi):
            bedges.append((idx(i, j), idx(i, j + 1)))
            bdata.append((s[i], phi[j], s[i], phi[j + 1], side, 0.0))
    elements = np.asarray(elements)
    return Mesh(nodes=nodes, elements=elements, coords=np.asarray(coords),
                arc=np.zeros((len(elements), 3)), arc_radius=0.0,
                bedges=np.asarray(bedges, dtype=int).reshape(-1, 2), bkind="line",
                bdata=np.asarray(bdata).reshape(-1, 6), level=level)


def build_mesh(patch, level):
    """P1 mesh of the parameter domain of ``patch`` at refinement ``level``."""
    if patch.n != 2:
        raise DomainError("stability spectra are implemented for n = 2 only")
    if level < 0:
        raise ValueError("mesh level must be >= 0")
    dom = patch.domain
    if isinstance(dom, DiskDomain):
        mesh = _ring_mesh(dom.radius, level)
    elif isinstance(dom, BoxDomain):
        mesh = _box_mesh(patch, level)
    else:
        raise DomainError(f"unsupported domain {dom!r}")
    angle = min_angle(mesh)
    if angle < MIN_ANGLE_DEG:
        raise GeometryError(f"degenerate element: minimum angle {angle:.3g} degrees")
    return mesh


def min_angle(mesh):
    """Smallest interior angle (degrees) over the straight-sided elements."""
    c = mesh.coords
    worst = 180.0
    for k in range(3):
        u = c[:, (k + 1) % 3] - c[:, k]
        v = c[:, (k + 2) % 3] - c[:, k]
        cosang = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        worst = min(worst, float(np.degrees(np.min(np.arccos(np.clip(cosang, -1, 1))))))
    return worst


def _element_maps(mesh):
    """Quadrature points, Jacobians of the element maps and |det|, per element and point."""
    A, B, C = mesh.coords[:, 0], mesh.coords[:, 1], mesh.coords[:, 2]
    xi = TRI_BARY[:, 1][None, :]
    eta = TRI_BARY[:, 2][None, :]
    pts = (A[:, None] * TRI_BARY[:, 0][None, :, None] + B[:, None] * xi[..., None]
           + C[:, None] * eta[..., None])
    dF = np.empty(pts.shape + (2,))
    dF[..., 0] = (B - A)[:, None]
    dF[..., 1] = (C - A)[:, None]
    curved = np.nonzero(mesh.arc[:, 0] > 0)[0]
    if curved.size:
        rho = mesh.arc_radius
        phi0 = mesh.arc[curved, 1][:, None]
        dphi = mesh.arc[curved, 2][:, None]
        sig = xi + eta
        t = eta / sig
        ang = phi0 + t * dphi
        gam = rho * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        dgam = rho * dphi[..., None] * np.stack([-np.sin(ang), np.cos(ang)], axis=-1)
        Bc, Cc = B[curved][:, None], C[curved][:, None]
        E = gam - (1 - t)[..., None] * Bc - t[..., None] * Cc
        dE = dgam + Bc - Cc
        pts[curved] = pts[curved] + sig[..., None] * E
        dF[curved, :, :, 0] += E - t[..., None] * dE
        dF[curved, :, :, 1] += E + (1 - t)[..., None] * dE
    det = dF[..., 0, 0] * dF[..., 1, 1] - dF[..., 0, 1] * dF[..., 1, 0]
    if np.any(det <= 0):
        raise GeometryError("inverted element map")
    return pts, dF, det


_GRAD_BARY = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def _edge_points(mesh):
    """Gauss points, weights, parameter tangents and covectors on boundary edges."""
    t, wt = np.polynomial.legendre.leggauss(EDGE_ORDER)
    t = 0.5 * (t + 1)
    wt = 0.5 * wt
    if mesh.bkind == "arc":
        rho = mesh.arc_radius
        phi0, dphi = mesh.bdata[:, :1], mesh.bdata[:, 1:2]
        ang = phi0 + t[None] * dphi
        omega = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        pts = rho * omega
        tang = rho * dphi[..., None] * np.stack([-np.sin(ang), np.cos(ang)], axis=-1)
        cov = omega
    else:
        P, Q = mesh.bdata[:, 0:2], mesh.bdata[:, 2:4]
        pts = P[:, None] + t[None, :, None] * (Q - P)[:, None]
        tang = np.broadcast_to((Q - P)[:, None], pts.shape).copy()
        cov = np.zeros_like(pts)
        cov[..., 0] = mesh.bdata[:, 4:5]
    return t, wt, pts, tang, cov


# ---------------------------------------------------------------------------
# forms


@dataclass
class DiscreteForms:
    """Assembled P1 matrices for the second variation on one mesh."""

    mesh: Mesh
    stiffness: sp.csr_matrix
    potential: sp.csr_matrix
    robin: sp.csr_matrix
    mass: sp.csr_matrix
    mean: np.ndarray
    area: float
    length: float
    level: int
    meta: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.mass.shape[0]

    def quadratic(self):
        """Matrix of Q: stiffness - potential - robin."""
        return (self.stiffness - self.potential - self.robin).tocsr()

    def energy(self, f):
        f = np.asarray(f, dtype=float)
        return float(f @ (self.quadratic() @ f))


def _scatter(elements, local, size):
    rows = np.repeat(elements, 3, axis=1).ravel()
    cols = np.tile(elements, (1, 3)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(size, size)).tocsr()


def assemble_forms(patch, mesh_level, robin_scale=1.0, potential=True):
    """Stiffness, potential (W = |h|^2 + nK), Robin (q), mass and mean functional.

    ``robin_scale`` multiplies q and ``potential=False`` drops W; both are
    for reference problems (e.g. the Neumann Laplacian with scale 0).
    """
    if patch.closed:
        raise DomainError("stability forms need a patch with boundary")
    if patch.theta is None:
        raise DomainError("stability forms need a constant contact angle")
    mesh = build_mesh(patch, mesh_level)
    size = len(mesh.nodes)
    pts, dF, det = _element_maps(mesh)
    E, Q = det.shape
    geo = shape_batch(patch, pts.reshape(-1, 2))
    G = geo["G"].reshape(E, Q, 2, 2)
    sqrtg = geo["sqrtg"].reshape(E, Q)
    W = (geo["h2"] + patch.n * patch.sf.K).reshape(E, Q) if potential else np.zeros((E, Q))
    dA = TRI_WEIGHTS[None] * det * sqrtg
    # gradients of the barycentric basis in parameter coordinates: dF^{-T} grad_ref
    dFinv = np.linalg.inv(dF)
    grads = np.einsum("eqji,aj->eqai", dFinv, _GRAD_BARY)  # (E, Q, 3, 2)
    Ginv = np.linalg.inv(G)
    Kloc = np.einsum("eq,eqai,eqij,eqbj->eab", dA, grads, Ginv, grads)
    bary = TRI_BARY  # basis values at quadrature points (Q, 3)
    Mloc = np.einsum("eq,qa,qb->eab", dA, bary, bary)
    Ploc = np.einsum("eq,eq,qa,qb->eab", dA, W, bary, bary)
    stiffness = _scatter(mesh.elements, Kloc, size)
    mass = _scatter(mesh.elements, Mloc, size)
    pot = _scatter(mesh.elements, Ploc, size)
    # boundary Robin term
    t, wt, bpts, btan, bcov = _edge_points(mesh)
    Eb, Qb = bpts.shape[:2]
    out = boundary_batch(patch, bpts.reshape(-1, 2), bcov.reshape(-1, 2),
                         btan.reshape(-1, 2, 1))
    q = robin_scale * robin_coefficient(patch, out["h_mumu"]).reshape(Eb, Qb)
    ds = wt[None] * out["ds"].reshape(Eb, Qb)
    basis = np.stack([1 - t, t], axis=-1)
    Rloc = np.einsum("eq,eq,qa,qb->eab", ds, q, basis, basis)
    rows = np.repeat(mesh.bedges, 2, axis=1).ravel()
    cols = np.tile(mesh.bedges, (1, 2)).ravel()
    robin = sp.coo_matrix((Rloc.ravel(), (rows, cols)), shape=(size, size)).tocsr()
    mean = np.asarray(mass @ np.ones(size)).ravel()
    meta = {"family": patch.family, "K": patch.sf.K, "theta": patch.theta, "dof": size,
            "elements": E, "robin_scale": robin_scale, "potential": potential,
            "q_min": float(q.min() / robin_scale) if robin_scale else None,
            "q_max": float(q.max() / robin_scale) if robin_scale else None}
    return DiscreteForms(mesh=mesh, stiffness=stiffness, potential=pot, robin=robin,
                         mass=mass, mean=mean, area=float(dA.sum()), length=float(ds.sum()),
                         level=mesh_level, meta=meta)


# ---------------------------------------------------------------------------
# spectra


def _constraint_basis(c):
    """Householder vector u with (I - 2uu^T) c parallel to e_1."""
    c = np.asarray(c, dtype=float)
    norm = np.linalg.norm(c)
    if norm == 0:
        raise ValueError("constraint vector vanishes")
    v = c.copy()
    v[0] += math.copysign(norm, c[0])
    return v / np.linalg.norm(v)


def _reflect(A, u):
    """(I - 2uu^T) A (I - 2uu^T) for dense symmetric A."""
    Au = A @ u
    uAu = u @ Au
    return A - 2 * np.outer(u, Au) - 2 * np.outer(Au, u) + 4 * uAu * np.outer(u, u)


@dataclass
class SpectrumReport:
    """Lowest constrained eigenvalues of Q relative to the mass form."""

    eigenvalues: list
    levels: list
    level_eigenvalues: list
    deltas: list
    classification: str | None
    tol: float
    eigenvector_samples: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def lambda1(self):
        return self.eigenvalues[0]

    def to_dict(self):
        return _plain({"eigenvalues": self.eigenvalues, "levels": self.levels,
                       "level_eigenvalues": self.level_eigenvalues, "deltas": self.deltas,
                       "classification": self.classification, "tol": self.tol,
                       "eigenvector_samples": self.eigenvector_samples, "meta": self.meta})


def constrained_eigen(forms, k=4):
    """(eigenvalues, eigenvectors) of Q on {mean . f = 0}, vectors in full coordinates."""
    size = forms.size
    if not 1 <= k <= size - 1:
        raise ValueError(f"k must lie in 1..{size - 1}")
    A = forms.quadratic().toarray()
    M = forms.mass.toarray()
    A = 0.5 * (A + A.T)
    M = 0.5 * (M + M.T)
    u = _constraint_basis(forms.mean)
    Ar = _reflect(A, u)[1:, 1:]
    Mr = _reflect(M, u)[1:, 1:]
    try:
        vals, vecs = sla.eigh(Ar, Mr, subset_by_index=[0, k - 1])
    except np.linalg.LinAlgError as exc:
        raise GeometryError(f"mass matrix is not positive definite: {exc}") from exc
    full = np.vstack([np.zeros((1, k)), vecs])
    full = full - 2 * np.outer(u, u @ full)
    return vals, full


def constrained_spectrum(forms, k=4, tol=STABILITY_TOL):
    """Single-level SpectrumReport (classification needs two levels)."""
    vals, vecs = constrained_eigen(forms, k)
    v1 = vecs[:, 0] / np.max(np.abs(vecs[:, 0]))
    idx = np.linspace(0, forms.size - 1, 16).astype(int)
    return SpectrumReport(eigenvalues=vals.tolist(), levels=[forms.level],
                          level_eigenvalues=[vals.tolist()], deltas=[], classification=None,
                          tol=tol, eigenvector_samples=v1[idx].tolist(), meta=dict(forms.meta))


def classify(spectrum, tol=STABILITY_TOL):
    """stable / unstable / marginal from lambda_1 at the two finest levels."""
    levels = spectrum.level_eigenvalues if isinstance(spectrum, SpectrumReport) else spectrum
    if len(levels) < 2:
        raise ValueError("classification needs at least two refinement levels")
    l1 = [lv[0] if np.ndim(lv) else lv for lv in levels[-2:]]
    if all(v < -tol for v in l1):
        return "unstable"
    if all(v >= -tol for v in l1):
        return "stable"
    return "marginal"


def spectrum_study(patch, levels=(2, 3), k=4, tol=STABILITY_TOL, robin_scale=1.0, potential=True):
    """Constrained spectra at several mesh levels plus the stability class."""
    levels = list(levels)
    reports = [constrained_spectrum(assemble_forms(patch, L, robin_scale, potential), k, tol)
               for L in levels]
    per_level = [r.eigenvalues for r in reports]
    deltas = [float(b[0] - a[0]) for a, b in zip(per_level[:-1], per_level[1:])]
    meta = dict(reports[-1].meta)
    meta.update({"family": patch.family, "cmc": patch.cmc})
    rep = SpectrumReport(eigenvalues=per_level[-1], levels=levels, level_eigenvalues=per_level,
                         deltas=deltas, classification=None, tol=tol,
                         eigenvector_samples=reports[-1].eigenvector_samples, meta=meta)
    if len(levels) >= 2:
        rep.classification = classify(rep, tol)
    return rep


# ---------------------------------------------------------------------------
# pairing of the test function


def stability_pairing(patch, a, mesh_level=3, rule_order=8, quad_level=2):
    """(Q(phi_a) on the mesh, -int phi_a V_a (n|h|^2 - H^2) dA by quadrature).

    Both sides agree by integration by parts since phi_a satisfies the
    Jacobi equation with umbilicity source and the Robin condition.
    """
    if patch.cmc is None:
        raise DomainError("stability pairing needs a CMC patch")
    a = np.asarray(a, dtype=float)
    forms = assemble_forms(patch, mesh_level)
    phi = scalar_batch(patch, forms.mesh.nodes, a)["phi_a"]
    lhs = forms.energy(phi)
    grid = build_grid(patch, rule_order, quad_level)
    sc = scalar_batch(patch, grid.nodes, a)
    umb = patch.n * grid.geo["h2"] - grid.geo["H"] ** 2
    rhs = -integrate(grid, sc["phi_a"] * sc["Va"] * umb)
    return lhs, rhs
