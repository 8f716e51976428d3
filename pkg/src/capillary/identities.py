"""Numerical certification of the integral and pointwise identities on patches.

Integral identities (Minkowski formulas, balance identity, mean-zero test
function) are evaluated with tensor Gauss rules at several levels; pointwise
identities (surface Laplacians, Robin boundary conditions) use the analytic
chart derivatives of the geometry kernels. All functions return
:class:`~capillary.reports.IdentityReport` objects.

Notation: ``sigma`` is +1 for interior and -1 for exterior patches,
``s_K = boundary_scale`` (1, sinh R, sin R) and ``h_B`` the principal
curvature of dB.
"""
from __future__ import annotations

import math

import numpy as np

from . import spaceform as sfm
from .errors import DomainError
from .geometry import (boundary_batch, elementary_symmetric, laplacian_batch,
                       principal_curvatures, scalar_batch, split_scalars)
from .quadrature import build_grid, integrate
from .reports import ABS_FLOOR, integral_report, pointwise_report

DEFAULT_LEVELS = (0, 1, 2)
ANGLE_TOL = 1e-9

MINKOWSKI_VARIANTS = ("euclidean_capillary", "hyperbolic_capillary", "spherical_capillary",
                      "exterior", "closed", "free_boundary")
ROBIN_VARIANTS = ("euclidean", "hyperbolic", "spherical", "exterior")
EUCLIDEAN_LAPLACIAN = ("eq-x", "eq-x2", "eq-nu", "eq-xnu", "eq-Xnu", "eq-phi")
UNIFIED_LAPLACIAN = ("eq-x0-h", "eq-x-h", "eq-xnu-h", "eq-Xnu-h", "eq-Ynu-h", "eq-phi-h",
                     "stab-eq4")
LAPLACIAN_IDS = EUCLIDEAN_LAPLACIAN + UNIFIED_LAPLACIAN
CMC_IDS = ("eq-phi", "eq-phi-h", "stab-eq4")


def _direction(patch, a):
    a = np.asarray(a, dtype=float)
    if a.shape != (patch.sf.dim,):
        raise ValueError(f"direction a must have {patch.sf.dim} components")
    return a


def _meta(patch, a=None, **extra):
    meta = {"family": patch.family, "K": patch.sf.K, "R": patch.sf.R, "n": patch.n,
            "theta": patch.theta, "exterior": patch.exterior}
    if a is not None:
        meta["a"] = np.asarray(a, dtype=float).tolist()
    meta.update(extra)
    return meta


def _grids(patch, levels, rule_order):
    levels = list(levels)
    if not levels:
        raise ValueError("at least one level is required")
    return levels, [build_grid(patch, rule_order, L) for L in levels]


def _require_boundary(patch):
    if patch.closed:
        raise DomainError("identity needs a patch with boundary on dB")


def _require_angle(patch):
    if patch.theta is None:
        raise DomainError("identity needs a constant contact angle")


def _require_cmc(patch, name):
    if patch.cmc is None:
        raise DomainError(f"{name} needs a CMC patch")


# ---------------------------------------------------------------------------
# Minkowski formulas


def _default_minkowski_variant(patch):
    if patch.closed:
        return "closed"
    if patch.exterior:
        return "exterior"
    return {0: "euclidean_capillary", -1: "hyperbolic_capillary", 1: "spherical_capillary"}[patch.sf.K]


def _check_variant(patch, variant):
    K = patch.sf.K
    if variant not in MINKOWSKI_VARIANTS:
        raise ValueError(f"unknown Minkowski variant {variant!r}")
    if variant == "closed":
        if not patch.closed:
            raise DomainError("closed variant needs a closed patch")
        return
    if patch.closed:
        raise DomainError(f"variant {variant!r} needs a patch with boundary")
    _require_angle(patch)
    if variant == "exterior" and not patch.exterior:
        raise DomainError("exterior variant needs an exterior patch")
    if variant != "exterior" and variant != "free_boundary" and patch.exterior:
        raise DomainError(f"variant {variant!r} is for interior patches")
    expected = {"euclidean_capillary": 0, "hyperbolic_capillary": -1, "spherical_capillary": 1}
    if variant in expected and expected[variant] != K:
        raise DomainError(f"variant {variant!r} needs K = {expected[variant]}, got {K}")
    if variant == "free_boundary" and abs(patch.theta - math.pi / 2) > ANGLE_TOL:
        raise DomainError("free_boundary variant needs theta = pi/2")


def minkowski_sides(patch, grid, a):
    """(LHS, RHS) of the Minkowski formula on one grid.

    LHS = int n (V_a + sigma s_K cos(theta) gbar(Y_a, nu)), RHS = int H gbar(X_a, nu),
    with the pointwise mean curvature. Closed patches drop the Y_a term.
    """
    sc = scalar_batch(patch, grid.nodes, a)
    n = patch.n
    if patch.closed:
        left = n * sc["Va"]
    else:
        cos_t = math.cos(patch.theta)
        left = n * (sc["Va"] + patch.side * patch.sf.boundary_scale * cos_t * sc["g_Ya_nu"])
    right = grid.geo["H"] * sc["g_Xa_nu"]
    return integrate(grid, left), integrate(grid, right)


def minkowski_residual(patch, a, variant=None, levels=DEFAULT_LEVELS, rule_order=8, tol=1e-6):
    """Minkowski formula for capillary, exterior or closed hypersurfaces."""
    a = _direction(patch, a)
    variant = variant or _default_minkowski_variant(patch)
    _check_variant(patch, variant)
    levels, grids = _grids(patch, levels, rule_order)
    sides = [minkowski_sides(patch, g, a) for g in grids]
    return integral_report(f"minkowski:{variant}", [s[0] for s in sides], [s[1] for s in sides],
                           levels, tol, _meta(patch, a, variant=variant, rule_order=rule_order))


def _sigma_nodes(grid):
    kappa = principal_curvatures(grid.geo["G"], grid.geo["h"])
    return elementary_symmetric(kappa)


def minkowski_higher(patch, a, k, levels=DEFAULT_LEVELS, rule_order=8, tol=1e-6):
    """int V_a sigma_{k-1} = k/(n+1-k) int sigma_k gbar(X_a, nu) on free-boundary patches."""
    a = _direction(patch, a)
    n = patch.n
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in 1..{n}, got {k}")
    if not patch.closed:
        _require_angle(patch)
        if abs(patch.theta - math.pi / 2) > ANGLE_TOL:
            raise DomainError("higher-order Minkowski formula needs theta = pi/2")
    levels, grids = _grids(patch, levels, rule_order)
    lhs, rhs = [], []
    for g in grids:
        sc = scalar_batch(patch, g.nodes, a)
        sig = _sigma_nodes(g)
        lhs.append(integrate(g, sc["Va"] * sig[:, k - 1]))
        rhs.append(k / (n + 1 - k) * integrate(g, sig[:, k] * sc["g_Xa_nu"]))
    return integral_report(f"minkowski_higher:k={k}", lhs, rhs, levels, tol,
                           _meta(patch, a, k=k, rule_order=rule_order))


# ---------------------------------------------------------------------------
# balance identity


def balance_residual(patch, a, levels=DEFAULT_LEVELS, rule_order=8, tol=1e-6):
    """n int gbar(Y_a, nu) dA = sigma r_model oint gbar(nubar, a) ds.

    The factor sigma accounts for Nbar pointing into the ball for exterior patches.
    """
    a = _direction(patch, a)
    _require_boundary(patch)
    levels, grids = _grids(patch, levels, rule_order)
    lhs, rhs = [], []
    for g in grids:
        sc = scalar_batch(patch, g.nodes, a)
        lhs.append(patch.n * integrate(g, sc["g_Ya_nu"]))
        lam2 = g.bgeo["lam"] ** 2
        rhs.append(patch.side * patch.sf.r_model * integrate(g, lam2 * (g.bgeo["nubar"] @ a), "boundary"))
    return integral_report("balance", lhs, rhs, levels, tol, _meta(patch, a, rule_order=rule_order))


# ---------------------------------------------------------------------------
# test function and its mean


def phi_test_function(patch, a, node):
    """phi_a = n(V_a + sigma s_K cos(theta) gbar(Y_a, nu)) - H gbar(X_a, nu) at a parameter node."""
    _require_cmc(patch, "phi_test_function")
    a = _direction(patch, a)
    w = np.asarray(node, dtype=float).reshape(1, patch.n)
    return float(scalar_batch(patch, w, a)["phi_a"][0])


def phi_mean(patch, a, level=2, rule_order=8, tol=1e-8):
    """|int phi_a dA| relative to ||phi_a||_inf * area (vanishes by the Minkowski formula)."""
    _require_cmc(patch, "phi_mean")
    a = _direction(patch, a)
    g = build_grid(patch, rule_order, level)
    phi = scalar_batch(patch, g.nodes, a)["phi_a"]
    mean = integrate(g, phi)
    scale = float(np.max(np.abs(phi))) * g.total_area
    rel = abs(mean) / max(scale, 1e-300)
    passed = bool(rel < tol or abs(mean) < ABS_FLOOR)
    rep = pointwise_report("phi_mean", abs(mean), tol, _meta(patch, a, level=level,
                           phi_sup=float(np.max(np.abs(phi))), area=g.total_area),
                           lhs=mean, rhs=0.0)
    rep.relative = rel
    rep.passed = passed
    return rep


# ---------------------------------------------------------------------------
# Laplacian identities


def _ambient_gradient(sf, kind, x, a):
    """Euclidean gradient of V_0 or V_a (batched)."""
    K = sf.K
    lam = sfm.conformal_factor(K, x)
    du = -K * lam[:, None] * x
    if kind == "V0":
        return np.zeros_like(x) if K == 0 else lam[:, None] * du
    xa = x @ a
    return lam[:, None] * (a[None, :] + xa[:, None] * du)


def _laplacian_terms(patch, out, a, which):
    """(LHS, RHS) nodal arrays for one Laplacian identity."""
    sf = patch.sf
    K, n, dim = sf.K, patch.n, sf.dim
    lap = split_scalars(out["lap"], dim)
    val = split_scalars(out["vals"], dim)
    x, nu, H, h2, gH = out["x"], out["nu"], out["H"], out["h2"], out["gradH"]
    lam2 = sfm.conformal_factor(K, x) ** 2
    g = lambda u, v: lam2 * np.sum(u * v, axis=-1)
    Xa = sfm.field_x(K, sf.r_model, x, a)
    Ya = sfm.field_y(K, x, a)
    if which == "eq-x":
        return lap["x"], -H[:, None] * nu
    if which == "eq-x2":
        return lap["half_x2"], n - H * val["g_x_nu"]
    if which == "eq-nu":
        return lap["nu"], gH - h2[:, None] * nu
    if which == "eq-xnu":
        return lap["g_x_nu"], g(x, gH) + H - h2 * val["g_x_nu"]
    if which == "eq-Xnu":
        return lap["g_Xa_nu"], g(Xa, gH) + (x @ a) * H - h2 * val["g_Xa_nu"] - n * (nu @ a)
    if which in ("eq-x0-h", "eq-x-h"):
        kind, name = ("V0", "V0") if which == "eq-x0-h" else ("Va", "Va")
        dnu = np.sum(_ambient_gradient(sf, kind, x, a) * nu, axis=-1)
        return lap[name], -n * K * val[name] - H * dnu
    if which == "eq-xnu-h":
        return lap["g_x_nu"], H * val["V0"] + g(x, gH) - h2 * val["g_x_nu"]
    if which == "eq-Xnu-h":
        dnu = np.sum(_ambient_gradient(sf, "Va", x, a) * nu, axis=-1)
        return (lap["g_Xa_nu"], H * val["Va"] + g(Xa, gH) - h2 * val["g_Xa_nu"]
                - n * dnu - n * K * val["g_Xa_nu"])
    if which == "eq-Ynu-h":
        return lap["g_Ya_nu"], g(Ya, gH) - (h2 + n * K) * val["g_Ya_nu"]
    if which in ("eq-phi", "eq-phi-h"):
        umb = n * h2 - H ** 2
        return lap["phi_a"] + (h2 + n * K) * val["phi_a"], umb * val["Va"]
    if which == "stab-eq4":
        return lap["Phi"], (n * h2 - H ** 2) * val["g_x_nu"]
    raise ValueError(f"unknown Laplacian identity {which!r}")


def laplacian_identity_residual(patch, a, which, level=0, rule_order=6, tol=1e-6):
    """Sup-norm over interior nodes of LHS - RHS for a surface-Laplacian identity.

    Surface Laplacians are computed in divergence form from analytic third
    chart derivatives. Identities named without ``-h`` are Euclidean and
    need K = 0; the ``-h`` forms and ``stab-eq4`` hold for every K.
    """
    if which not in LAPLACIAN_IDS:
        raise ValueError(f"unknown Laplacian identity {which!r}; choose from {LAPLACIAN_IDS}")
    if which in EUCLIDEAN_LAPLACIAN and patch.sf.K != 0:
        raise DomainError(f"{which} is a Euclidean identity; use the -h form for K != 0")
    if which in CMC_IDS:
        _require_cmc(patch, which)
        if not patch.closed:
            _require_angle(patch)
    a = np.zeros(patch.sf.dim) if a is None else _direction(patch, a)
    g = build_grid(patch, rule_order, level)
    out = laplacian_batch(patch, g.nodes, a)
    lhs, rhs = _laplacian_terms(patch, out, a, which)
    diff = np.abs(np.asarray(lhs) - np.asarray(rhs))
    if diff.ndim > 1:
        diff = np.linalg.norm(diff, axis=-1)
    scale = float(np.max(np.abs(lhs))) if np.size(lhs) else 0.0
    return pointwise_report(which, float(np.max(diff)), tol,
                            _meta(patch, a, level=level, nodes=len(diff), lhs_sup=scale,
                                  derivatives="analytic"))


# ---------------------------------------------------------------------------
# Robin boundary identities


def robin_coefficient(patch, h_mumu):
    """q = sigma h_B / sin(theta) + cot(theta) h(mu, mu) with the claimed angle."""
    th = patch.theta
    return patch.side * patch.sf.boundary_curvature / math.sin(th) + h_mumu / math.tan(th)


def _default_robin_variant(patch):
    if patch.exterior:
        return "exterior"
    return {0: "euclidean", -1: "hyperbolic", 1: "spherical"}[patch.sf.K]


def robin_residual(patch, a, variant=None, level=1, rule_order=8, tol=1e-7):
    """max over boundary nodes of |d_mu s - q s| for s1 = V_a + sigma s_K cos(theta) gbar(Y_a, nu)
    and s2 = gbar(X_a, nu)."""
    a = _direction(patch, a)
    _require_boundary(patch)
    _require_angle(patch)
    variant = variant or _default_robin_variant(patch)
    if variant not in ROBIN_VARIANTS:
        raise ValueError(f"unknown Robin variant {variant!r}")
    if variant != _default_robin_variant(patch):
        raise DomainError(f"Robin variant {variant!r} does not match the patch "
                          f"(K={patch.sf.K}, exterior={patch.exterior})")
    g = build_grid(patch, rule_order, level)
    out = boundary_batch(patch, g.bnodes, g.bcovectors, g.btangents, a)
    dim = patch.sf.dim
    val = split_scalars(out["vals"], dim)
    dmu = split_scalars(out["dmu"], dim)
    angle_dev = float(np.max(np.abs(out["theta"] - patch.theta)))
    if angle_dev > 1e-8:
        raise DomainError(f"contact angle is not constant (deviation {angle_dev:.3g})")
    q = robin_coefficient(patch, out["h_mumu"])
    c = patch.side * patch.sf.boundary_scale * math.cos(patch.theta)
    s1 = val["Va"] + c * val["g_Ya_nu"]
    d1 = dmu["Va"] + c * dmu["g_Ya_nu"]
    s2 = val["g_Xa_nu"]
    d2 = dmu["g_Xa_nu"]
    r1 = float(np.max(np.abs(d1 - q * s1)))
    r2 = float(np.max(np.abs(d2 - q * s2)))
    return pointwise_report(f"robin:{variant}", max(r1, r2), tol,
                            _meta(patch, a, variant=variant, level=level,
                                  residual_s1=r1, residual_s2=r2,
                                  q_min=float(np.min(q)), q_max=float(np.max(q)),
                                  angle_deviation=angle_dev))


# ---------------------------------------------------------------------------
# auxiliary function Phi


def aux_phi_residual(patch, level=0, rule_order=6, tol=1e-6, boundary_tol=1e-9):
    """Phi = (P - P_dB) H - n(gbar(x, nu) + sigma cos(theta) s_K): boundary values and
    the interior identity Delta Phi = (n|h|^2 - H^2) gbar(x, nu)."""
    _require_cmc(patch, "aux_phi_residual")
    _require_boundary(patch)
    _require_angle(patch)
    a = np.zeros(patch.sf.dim)
    interior = laplacian_identity_residual(patch, a, "stab-eq4", level, rule_order, tol)
    g = build_grid(patch, rule_order, level)
    bvals = split_scalars(g.bgeo["vals"], patch.sf.dim)
    bmax = float(np.max(np.abs(bvals["Phi"])))
    passed = bool(interior.residual < tol and bmax < boundary_tol)
    meta = _meta(patch, None, level=level, boundary_sup=bmax, interior_sup=interior.residual,
                 boundary_tol=boundary_tol)
    rep = pointwise_report("aux_phi", max(interior.residual, bmax), tol, meta)
    rep.passed = passed
    return rep


# ---------------------------------------------------------------------------
# umbilicity of dB


def boundary_umbilic_residual(sf, a, samples_on_ball, tol=1e-10):
    """max norm of h^{dB} - ((V_a)_{Nbar} / V_a) g^{dB} over points of dB.

    dB is a round sphere, so h^{dB} = kappa g^{dB} with kappa from the
    conformal change of the Euclidean curvature 1/r; the tensor norm of the
    difference is sqrt(n) |kappa - (V_a)_{Nbar} / V_a|.
    """
    a = np.asarray(a, dtype=float)
    pts = np.atleast_2d(np.asarray(samples_on_ball, dtype=float))
    r = np.linalg.norm(pts, axis=1)
    if np.max(np.abs(r - sf.r_model)) > 1e-9:
        raise DomainError("sample points must lie on dB")
    K = sf.K
    lam = sfm.conformal_factor(K, pts)
    Va = sfm.potential_a(K, pts, a)
    small = np.abs(Va) <= 1e-8
    if np.any(small):
        raise DomainError(f"V_a vanishes at sample {int(np.argmax(small))}")
    Nbar = pts / (lam * r)[:, None]
    dV = np.sum(_ambient_gradient(sf, "Va", pts, a) * Nbar, axis=1)
    ratio = dV / Va
    dudr = -K * lam * r
    kappa = (1.0 / r + dudr) / lam
    res = math.sqrt(sf.n) * float(np.max(np.abs(kappa - ratio)))
    return pointwise_report("boundary_umbilic", res, tol,
                            {"K": K, "R": sf.R, "n": sf.n, "a": a.tolist(),
                             "samples": len(pts), "ratio_mean": float(np.mean(ratio)),
                             "expected": sf.boundary_curvature})
