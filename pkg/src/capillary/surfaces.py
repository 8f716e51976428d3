"""Analytic test surfaces: geodesic disks, caps, closed spheres, perturbed caps,
unduloid and catenoid pieces.

Spheres are parametrized stereographically from the pole opposite to the
part that is kept, so cap charts are regular everywhere on their disk
domain. Surfaces of revolution use a Chebyshev fit of the arclength profile
ODE whose derivatives are supplied exactly by the ODE right-hand side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import jax
import jax.numpy as jnp
import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.integrate import solve_ivp
from scipy.optimize import bisect, brentq

from .errors import InfeasibleSurfaceError
from .geometry import BoxDomain, DiskDomain, ParametricPatch, shape_batch
from .quadrature import _sphere_point
from .spaceform import SpaceForm

FAMILIES = ("geodesic_disk", "spherical_cap", "exterior_cap", "unduloid_piece",
            "catenoid_piece", "perturbed_cap", "closed_sphere")


@dataclass
class SurfaceSpec:
    """Family name, ambient data and family-specific parameters.

    Parameters by family (all optional unless noted):

    * geodesic_disk: ``axis`` (normal of the disk).
    * spherical_cap / exterior_cap: ``theta`` (required), ``rho`` (required),
      ``axis``, ``normal`` in {"auto", "outward", "inward"}.
    * closed_sphere: ``rho`` (required), ``center`` (vector, default 0).
    * perturbed_cap: cap parameters plus ``amplitude``, ``mode`` (0..8),
      ``flat_boundary`` (keeps the contact angle, default True).
    * unduloid_piece: ``neck`` (ratio in (0, 1)) or ``H`` (target), ``center``
      in {"bulge", "neck"}, ``crossing`` (1-based), ``axis``.
    * catenoid_piece: ``crossing``, ``axis``.
    """

    family: str
    K: int = 0
    R: float = 1.0
    n: int = 2
    params: dict = field(default_factory=dict)

    @property
    def space_form(self):
        return SpaceForm(self.K, self.R, self.n)


# ---------------------------------------------------------------------------
# charts (pure jax functions of (w, params))


def _cap_chart(w, p):
    q = jnp.dot(w, w)
    den = 1.0 + q
    local = jnp.concatenate([2.0 * w / den, (p["pole"] * (1.0 - q) / den)[None]])
    return p["center"] + p["rho"] * (p["frame"] @ local)


def _bump(w, p):
    """Profile W(|w|^2/s^2) times a combination of Re((w0 + i w1)^k)."""
    s2 = p["smax"] ** 2
    t = jnp.dot(w, w) / s2
    radial = jnp.where(p["flat"] > 0, (1.0 - t) ** 2, 1.0 - t)
    zr = w[0] / p["smax"]
    zi = w[1] / p["smax"]
    re, im = 1.0, 0.0
    total = p["modes"][0] * re
    for k in range(1, p["modes"].shape[0]):
        re, im = re * zr - im * zi, re * zi + im * zr
        total = total + p["modes"][k] * re
    return radial * total


def _perturbed_cap_chart(w, p):
    q = jnp.dot(w, w)
    den = 1.0 + q
    local = jnp.concatenate([2.0 * w / den, (p["pole"] * (1.0 - q) / den)[None]])
    normal = p["frame"] @ local
    return p["center"] + (p["rho"] + p["amp"] * _bump(w, p)) * normal


def _flat_chart(w, p):
    n = w.shape[0]
    return p["frame"][:, :n] @ w


def _sphere_chart(u, p):
    v = _sphere_point(u)
    local = jnp.concatenate([v[1:], v[:1]])
    return p["center"] + p["rho"] * (p["frame"] @ local)


@jax.custom_jvp
def _profile(s, coef, H, nm1, lo, hi):
    t = (2.0 * s - lo - hi) / (hi - lo)
    t = jnp.clip(t, -1.0, 1.0)
    k = jnp.arange(coef.shape[1])
    basis = jnp.cos(k * jnp.arccos(t))
    return coef @ basis


@_profile.defjvp
def _profile_jvp(primals, tangents):
    s, coef, H, nm1, lo, hi = primals
    ds = tangents[0]
    zrp = _profile(s, coef, H, nm1, lo, hi)
    psi, r = zrp[2], zrp[1]
    rhs = jnp.stack([jnp.cos(psi), jnp.sin(psi), nm1 * jnp.cos(psi) / r - H])
    return zrp, rhs * ds


def _revolution_chart(u, p):
    zrp = _profile(u[0], p["coef"], p["H"], p["nm1"], p["lo"], p["hi"])
    omega = _sphere_point(u[1:])
    local = jnp.concatenate([zrp[1] * omega, (zrp[0] - p["zc"])[None]]) / p["scale"]
    return p["frame"] @ local


# ---------------------------------------------------------------------------
# helpers


def axis_frame(axis, dim):
    """Orthogonal matrix whose last column is the unit vector ``axis``."""
    e = np.asarray(axis, dtype=float)
    if e.shape != (dim,):
        raise InfeasibleSurfaceError(f"axis must have {dim} components")
    norm = np.linalg.norm(e)
    if norm == 0:
        raise InfeasibleSurfaceError("axis must be nonzero")
    e = e / norm
    M = np.column_stack([e, np.eye(dim)])
    Q, _ = np.linalg.qr(M)
    Q = Q[:, :dim]
    if Q[:, 0] @ e < 0:
        Q = -Q
    Q[:, 0] = e
    frame = np.column_stack([Q[:, 1:], e])
    if np.linalg.det(frame) < 0:
        frame[:, 0] = -frame[:, 0]
    return frame


def _default_axis(dim):
    e = np.zeros(dim)
    e[-1] = 1.0
    return e


def sphere_curvature(sf, d, rho):
    """Principal curvature (outward normal) of the Euclidean sphere |x - c| = rho, |c| = d."""
    if sf.K == 0:
        return 1.0 / rho
    return (1.0 + sf.K * (d * d - rho * rho)) / (2.0 * rho)


def cap_center_distance(sf, theta, rho, exterior=False, normal="outward"):
    """Centre distance d of a Euclidean sphere of radius rho meeting dB at angle theta."""
    r = sf.r_model
    c = math.cos(theta)
    sign = 1.0 if normal == "outward" else -1.0
    if exterior:
        sign = -sign
    d2 = rho * rho + r * r + 2.0 * sign * r * rho * c
    if d2 <= 0:
        raise InfeasibleSurfaceError("cap centre would coincide with the ball centre")
    return math.sqrt(d2)


def _orient(patch, w, target):
    """Fix the orientation so that nu at parameter w is positively aligned with target."""
    probe = shape_batch(patch.with_orientation(1), np.asarray(w, dtype=float)[None])
    sign = 1 if probe["nu"][0] @ target > 0 else -1
    return patch.with_orientation(sign)


def _cap_data(sf, theta, rho, exterior, normal):
    if not 0 < theta < math.pi:
        raise InfeasibleSurfaceError("contact angle must lie in (0, pi)")
    if not rho > 0:
        raise InfeasibleSurfaceError("cap radius must be positive")
    choices = ("outward", "inward") if normal == "auto" else (normal,)
    errors = []
    for choice in choices:
        try:
            d = cap_center_distance(sf, theta, rho, exterior, choice)
        except InfeasibleSurfaceError as exc:
            errors.append(str(exc))
            continue
        r = sf.r_model
        if not abs(d - rho) < r < d + rho:
            errors.append("sphere does not cross the ball boundary")
            continue
        if exterior:
            cos_tb = (r * r - d * d - rho * rho) / (2 * d * rho)
            if sf.K == -1 and d + rho >= 1.0:
                errors.append("exterior cap leaves the Poincare ball")
                continue
        else:
            cos_tb = (d * d + rho * rho - r * r) / (2 * d * rho)
        H = sf.n * sphere_curvature(sf, d, rho)
        if choice == "inward":
            H = -H
        if H < -1e-12 and normal == "auto":
            errors.append(f"{choice} normal gives negative mean curvature")
            continue
        return d, cos_tb, H, choice
    raise InfeasibleSurfaceError("; ".join(errors) or "infeasible cap")


def _cap_params(sf, d, rho, cos_tb, exterior, axis):
    dim = sf.dim
    frame = axis_frame(axis, dim)
    e = frame[:, -1]
    t_b = math.acos(max(-1.0, min(1.0, cos_tb)))
    smax = math.tan(t_b / 2)
    pole = 1.0 if exterior else -1.0
    params = {"center": d * e, "rho": np.asarray(float(rho)), "frame": frame,
              "pole": np.asarray(pole)}
    return params, smax


def spherical_cap(sf, theta, rho, axis=None, exterior=False, normal="auto"):
    """Cap of a Euclidean-model sphere meeting dB at contact angle ``theta``."""
    axis = _default_axis(sf.dim) if axis is None else axis
    d, cos_tb, H, choice = _cap_data(sf, theta, rho, exterior, normal)
    params, smax = _cap_params(sf, d, rho, cos_tb, exterior, axis)
    patch = ParametricPatch(sf=sf, chart=_cap_chart, params=params,
                            domain=DiskDomain(smax, sf.n), exterior=exterior,
                            cmc=float(H), theta=float(theta),
                            family="exterior_cap" if exterior else "spherical_cap",
                            info={"d": d, "rho": float(rho), "normal": choice,
                                  "omega": "lens" if choice == "outward" else "complement",
                                  "axis": params["frame"][:, -1].copy()})
    w0 = np.zeros(sf.n)
    outward = patch.embed(w0) - params["center"]
    return _orient(patch, w0, outward if choice == "outward" else -outward)


def sphere_cap_patch(sf, center, rho, t_max, axis=None):
    """Plain cap {angle from the pole c - rho e <= t_max}; no ball constraint.

    Used for quadrature tests (e.g. hemispheres); carries no contact claims.
    """
    axis = _default_axis(sf.dim) if axis is None else axis
    frame = axis_frame(axis, sf.dim)
    params = {"center": np.asarray(center, dtype=float), "rho": np.asarray(float(rho)),
              "frame": frame, "pole": np.asarray(-1.0)}
    patch = ParametricPatch(sf=sf, chart=_cap_chart, params=params,
                            domain=DiskDomain(math.tan(t_max / 2), sf.n), family="sphere_cap",
                            info={"rho": float(rho)})
    w0 = np.zeros(sf.n)
    return _orient(patch, w0, patch.embed(w0) - params["center"])


def geodesic_disk(sf, axis=None):
    """Totally geodesic disk through the centre, normal to ``axis``."""
    axis = _default_axis(sf.dim) if axis is None else axis
    frame = axis_frame(axis, sf.dim)
    patch = ParametricPatch(sf=sf, chart=_flat_chart, params={"frame": frame},
                            domain=DiskDomain(sf.r_model, sf.n), cmc=0.0,
                            theta=math.pi / 2, family="geodesic_disk",
                            info={"axis": frame[:, -1].copy(), "omega": "half"})
    return _orient(patch, np.full(sf.n, 0.1 * sf.r_model), frame[:, -1])


def closed_sphere(sf, rho, center=None):
    """Round sphere |x - center| = rho in model coordinates (outward normal)."""
    center = np.zeros(sf.dim) if center is None else np.asarray(center, dtype=float)
    if not rho > 0:
        raise InfeasibleSurfaceError("sphere radius must be positive")
    d = float(np.linalg.norm(center))
    if sf.K == -1 and d + rho >= 1.0:
        raise InfeasibleSurfaceError("sphere leaves the Poincare ball")
    n = sf.n
    frame = axis_frame(center if d > 0 else _default_axis(sf.dim), sf.dim)
    lo = (0.0,) * n
    hi = (math.pi,) * (n - 1) + (2 * math.pi,)
    panels = (1,) * (n - 1) + (2,)
    dom = BoxDomain(lo=lo, hi=hi, periodic=(n - 1,), panels=panels)
    params = {"center": center, "rho": np.asarray(float(rho)), "frame": frame}
    H = n * sphere_curvature(sf, d, rho)
    patch = ParametricPatch(sf=sf, chart=_sphere_chart, params=params, domain=dom,
                            cmc=float(H), family="closed_sphere",
                            info={"d": d, "rho": float(rho), "omega": "inside"})
    u0 = np.full(n, 1.0)
    return _orient(patch, u0, patch.embed(u0) - center)


MAX_MODE = 8


def perturbed_cap(sf, theta, rho, amplitude, mode=0, flat_boundary=True, axis=None,
                  exterior=False, normal="auto"):
    """Normal graph over a cap, ``rho + amplitude * W * Re(z^mode)`` radially.

    With ``flat_boundary`` the profile W has a double root on the boundary,
    which keeps the contact angle; otherwise the angle varies along the
    boundary. The result carries no CMC claim.
    """
    base = spherical_cap(sf, theta, rho, axis=axis, exterior=exterior, normal=normal)
    if not 0 <= int(mode) <= MAX_MODE:
        raise InfeasibleSurfaceError(f"mode must lie in 0..{MAX_MODE}")
    modes = np.zeros(MAX_MODE + 1)
    modes[int(mode)] = 1.0
    params = dict(base.params)
    params.update({"amp": np.asarray(float(amplitude)), "smax": np.asarray(base.domain.radius),
                   "flat": np.asarray(1.0 if flat_boundary else 0.0), "modes": modes})
    info = dict(base.info)
    info.update({"amplitude": float(amplitude), "mode": int(mode),
                 "flat_boundary": bool(flat_boundary)})
    return replace(base, chart=_perturbed_cap_chart, params=params, cmc=None,
                   theta=base.theta if flat_boundary else None,
                   family="perturbed_cap", info=info)


# ---------------------------------------------------------------------------
# axisymmetric CMC profiles


@dataclass
class CmcProfile:
    """Arclength profile (z(s), r(s), psi(s)) of an axisymmetric CMC hypersurface.

    psi is the angle of the tangent with the axis; the mean curvature is
    taken w.r.t. the normal (-sin psi, cos psi) pointing away from the axis.
    ``coef`` holds Chebyshev coefficients on [lo, hi]; ``dense`` is the
    underlying ODE solution used for root finding and refits. ``window`` is
    the arclength range actually used (defaults to [lo, hi]); refits pad
    the fit interval beyond it so that derivatives stay accurate at its ends.
    """

    H: float
    neck: float
    n: int
    lo: float
    hi: float
    coef: np.ndarray | None
    dense: object = field(default=None, repr=False)
    window: tuple | None = None

    @property
    def span(self):
        return self.window if self.window is not None else (self.lo, self.hi)

    def evaluate(self, s):
        if self.coef is None:
            return self.dense(np.asarray(s, dtype=float))
        t = (2 * np.asarray(s, dtype=float) - self.lo - self.hi) / (self.hi - self.lo)
        return cheb.chebval(t, self.coef.T)

    def _exact(self, s):
        return self.evaluate(s) if self.dense is None else self.dense(np.asarray(s, dtype=float))

    def rhs(self, s):
        z, r, psi = self.evaluate(s)
        return np.array([np.cos(psi), np.sin(psi), (self.n - 1) * np.cos(psi) / r - self.H])

    def restrict(self, lo, hi, pad=0.05):
        """Chebyshev refit of the ODE solution for the window [lo, hi]."""
        if self.dense is None:
            raise InfeasibleSurfaceError("profile has no ODE solution to refit")
        d = pad * (hi - lo)
        flo, fhi = max(self.lo, lo - d), min(self.hi, hi + d)
        if lo < self.span[0] or hi > self.span[1]:
            raise InfeasibleSurfaceError("refit interval exceeds the profile span")
        return replace(self, lo=float(flo), hi=float(fhi), coef=_fit(self.dense, flo, fhi),
                       window=(float(lo), float(hi)))

    def curvature_residual(self, samples=2001):
        """max |H_revolved - H| using derivatives of the fitted z(s), r(s) only.

        Samples within 1% of the largest radius from the axis are skipped:
        at a pole the parallel curvature is a 0/0 limit.
        """
        s = np.linspace(*self.span, samples)
        scale = 2.0 / (self.hi - self.lo)
        t = (2 * s - self.lo - self.hi) / (self.hi - self.lo)
        z1 = cheb.chebval(t, cheb.chebder(self.coef[0])) * scale
        r1 = cheb.chebval(t, cheb.chebder(self.coef[1])) * scale
        z2 = cheb.chebval(t, cheb.chebder(self.coef[0], 2)) * scale ** 2
        r2 = cheb.chebval(t, cheb.chebder(self.coef[1], 2)) * scale ** 2
        r = cheb.chebval(t, self.coef[1])
        speed = np.hypot(z1, r1)
        kappa = (z1 * r2 - r1 * z2) / speed ** 3
        keep = np.abs(r) > 1e-2 * np.max(np.abs(r))
        Hrev = (self.n - 1) * z1[keep] / (r[keep] * speed[keep]) - kappa[keep]
        return float(np.max(np.abs(Hrev - self.H)))

    def bulge(self):
        """Arclength of the first radius maximum after s = 0."""
        s = np.linspace(max(self.span[0], 0.0), self.span[1], 4001)[1:]
        psi = self._exact(s)[2]
        idx = np.nonzero((psi[:-1] > 0) & (psi[1:] <= 0))[0]
        if not idx.size:
            raise InfeasibleSurfaceError("no bulge within the profile span")
        i = idx[0]
        return bisect(lambda t: float(self._exact(t)[2]), s[i], s[i + 1], xtol=1e-14)

    def orthogonal_roots(self, center=0.0, tol=1e-13):
        """Arclengths s > center where the profile meets a centred sphere orthogonally.

        The sphere is centred on the axis at z(center); orthogonality means
        the tangent is radial: (z - z_c) sin psi - r cos psi = 0.
        """
        zc = self._exact(center)[0]

        def cross(t):
            z, r, psi = self._exact(t)
            return (z - zc) * np.sin(psi) - r * np.cos(psi)

        s = np.linspace(center, self.span[1], 8001)[1:]
        vals = cross(s)
        roots = []
        for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
            roots.append(bisect(lambda t: float(cross(t)), s[i], s[i + 1], xtol=tol))
        return roots


def _fit(fun, lo, hi, deg0=32, max_deg=1024, tol=1e-13):
    """Chebyshev coefficients (3, deg+1) of ``fun`` on [lo, hi], doubling the degree
    until the trailing coefficients drop below ``tol`` relative."""
    deg = deg0
    while True:
        t = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
        vals = fun(lo + (t + 1) * (hi - lo) / 2)
        coef = np.stack([cheb.chebfit(t, v, deg) for v in vals])
        tail = np.max(np.abs(coef[:, -4:]))
        if tail < tol * max(1.0, np.max(np.abs(coef))) or deg >= max_deg:
            return coef
        deg *= 2


def _integrate_profile(H, r0, n, span):
    """Dense ODE solution on [-span, span] (neck start) or [-span, span] via the
    exact sphere series near the pole (pole start, used for s < s0)."""
    nm1 = n - 1

    def ode(s, y):
        z, r, psi = y
        return [math.cos(psi), math.sin(psi), nm1 * math.cos(psi) / r - H]

    opts = dict(method="DOP853", rtol=1e-13, atol=1e-14, dense_output=True)
    if r0 > 0:
        sol = solve_ivp(ode, (0.0, span), [0.0, r0, 0.0], **opts)
        if not sol.success:
            raise InfeasibleSurfaceError(f"profile integration failed: {sol.message}")

        def fun(s):
            s = np.asarray(s, dtype=float)
            y = sol.sol(np.abs(s))
            sgn = np.where(s < 0, -1.0, 1.0)
            return np.stack([sgn * y[0], y[1], sgn * y[2]])

        return fun
    # pole start: exact sphere series for s < s0, ODE afterwards
    R0 = n / H
    s0 = 1e-3 * R0
    start = [R0 - R0 * math.cos(s0 / R0), R0 * math.sin(s0 / R0), math.pi / 2 - s0 / R0]
    sol = solve_ivp(ode, (s0, max(span, 2 * s0)), start, **opts)
    if not sol.success:
        raise InfeasibleSurfaceError(f"profile integration failed: {sol.message}")

    def fun(s):
        s = np.asarray(s, dtype=float)
        y = sol.sol(np.clip(s, s0, None))
        cap = np.stack([R0 - R0 * np.cos(s / R0), R0 * np.sin(s / R0), np.pi / 2 - s / R0])
        return np.where(s < s0, cap, y)

    return fun


def solve_cmc_profile(H_target, neck_param, arc_length_span, n=2, fit=True):
    """Integrate the axisymmetric CMC profile ODE and fit it spectrally.

    ``neck_param`` is the neck radius r0 (0 <= r0 < (n-1)/H): the profile
    starts at the neck with axial tangent and is extended by symmetry to
    [-span, span]. ``neck_param = 0`` starts at a pole instead (round
    sphere of radius n/H) on [0, span]. With ``fit=False`` only the ODE
    solution is kept (see :meth:`CmcProfile.restrict`).
    """
    H = float(H_target)
    r0 = float(neck_param)
    span = float(arc_length_span)
    if H < 0:
        raise InfeasibleSurfaceError("H_target must be nonnegative")
    if span <= 0:
        raise InfeasibleSurfaceError("arc_length_span must be positive")
    if r0 < 0:
        raise InfeasibleSurfaceError("neck radius must be nonnegative")
    if r0 == 0 and H <= 0:
        raise InfeasibleSurfaceError("degenerate neck requires H > 0")
    if H > 0 and r0 >= (n - 1) / H:
        raise InfeasibleSurfaceError("neck radius must be below (n-1)/H")
    pad = 0.05 * span
    fun = _integrate_profile(H, r0, n, span + pad)
    lo = -span - pad if r0 > 0 else -pad
    prof = CmcProfile(H=H, neck=r0, n=n, lo=lo, hi=span + pad, coef=None, dense=fun)
    window = (-span if r0 > 0 else 0.0, span)
    if not fit:
        return replace(prof, window=window)
    return replace(prof, coef=_fit(fun, prof.lo, prof.hi), window=window)


def _profile_period_span(H, r0, n):
    """Arclength span covering at least one full period on either side of the neck."""
    if H == 0:
        return 4.0 * max(r0, 1e-3)
    return 1.5 * math.pi * n / H + 4 * r0


def _trim(prof, center_s, crossing):
    """(s_lo, s_hi, z_c, scale) of the piece symmetric about ``center_s``."""
    roots = prof.orthogonal_roots(center_s)
    if len(roots) < crossing:
        raise InfeasibleSurfaceError("no orthogonal trimming point within the profile span")
    s_star = roots[crossing - 1]
    z_c = float(prof._exact(center_s)[0])
    z, r, _ = prof._exact(s_star)
    scale = float(math.hypot(z - z_c, r))
    s_lo, s_hi = 2 * center_s - s_star, s_star
    if s_lo < prof.span[0] or s_hi > prof.span[1]:
        raise InfeasibleSurfaceError("trimmed piece exceeds the profile span")
    return s_lo, s_hi, z_c, scale


def _revolution_patch(sf, prof, center_s, crossing, axis, family):
    s_lo, s_hi, z_c, scale = _trim(prof, center_s, crossing)
    ss = np.linspace(s_lo, s_hi, 4001)
    zz, rr, _ = prof._exact(ss)
    if np.max(np.hypot(zz - z_c, rr)) > scale * (1 + 1e-9):
        raise InfeasibleSurfaceError("trimmed piece leaves the ball")
    piece = prof.restrict(s_lo, s_hi)
    n = sf.n
    frame = axis_frame(_default_axis(sf.dim) if axis is None else axis, sf.dim)
    params = {"coef": piece.coef, "H": np.asarray(piece.H), "nm1": np.asarray(float(n - 1)),
              "lo": np.asarray(piece.lo), "hi": np.asarray(piece.hi), "zc": np.asarray(z_c),
              "scale": np.asarray(scale), "frame": frame}
    length = s_hi - s_lo
    panels_s = max(2, int(math.ceil(4 * length / scale)))
    lo = (s_lo,) + (0.0,) * (n - 1)
    hi = (s_hi,) + (math.pi,) * (n - 2) + (2 * math.pi,)
    panels = (panels_s,) + (1,) * (n - 2) + (2,)
    dom = BoxDomain(lo=lo, hi=hi, faces=((0, -1), (0, 1)), periodic=(n - 1,), panels=panels)
    patch = ParametricPatch(sf=sf, chart=_revolution_chart, params=params, domain=dom,
                            cmc=float(piece.H * scale), theta=math.pi / 2, family=family,
                            info={"neck_radius": piece.neck / scale, "scale": scale,
                                  "s_range": (s_lo, s_hi), "profile": piece,
                                  "axis": frame[:, -1].copy(), "omega": "inside"})
    # outward normal points away from the axis at the centre of the piece
    u0 = np.array([center_s] + [1.0] * (n - 1))
    x0 = patch.embed(u0)
    radial = x0 - (x0 @ frame[:, -1]) * frame[:, -1]
    return _orient(patch, u0, radial)


def _unduloid_profile(sf, neck):
    n = sf.n
    r0 = neck * (n - 1)
    return solve_cmc_profile(1.0, r0, _profile_period_span(1.0, r0, n), n, fit=False)


def unduloid_piece(sf, neck=None, H=None, center="bulge", crossing=1, axis=None):
    """Piece of a Delaunay unduloid meeting the unit sphere orthogonally.

    The profile with mean curvature 1 and neck radius ``neck * (n-1)`` is
    trimmed at its ``crossing``-th orthogonal intersection with a sphere
    centred at the chosen bulge or neck, then rescaled into the unit ball;
    the resulting mean curvature is the trimming radius. Passing ``H``
    instead of ``neck`` solves for the neck ratio on that branch.
    """
    if sf.K != 0:
        raise InfeasibleSurfaceError("unduloid pieces are Euclidean only")
    if center not in ("bulge", "neck"):
        raise InfeasibleSurfaceError("center must be 'bulge' or 'neck'")
    if neck is None and H is None:
        raise InfeasibleSurfaceError("give either neck or H")
    if neck is None:
        neck = _solve_neck(sf, H, center, crossing)
    if not 0 < neck < 1:
        raise InfeasibleSurfaceError("neck ratio must lie in (0, 1)")
    prof = _unduloid_profile(sf, neck)
    center_s = prof.bulge() if center == "bulge" else 0.0
    patch = _revolution_patch(sf, prof, center_s, crossing, axis, "unduloid_piece")
    patch.info.update({"neck_ratio": float(neck), "center": center, "crossing": crossing})
    return patch


def _unduloid_H(sf, neck, center, crossing):
    prof = _unduloid_profile(sf, neck)
    try:
        c = prof.bulge() if center == "bulge" else 0.0
        return _trim(prof, c, crossing)[3]
    except InfeasibleSurfaceError:
        return math.nan


def _solve_neck(sf, H, center, crossing):
    grid = np.linspace(0.02, 0.9, 45)
    vals = np.array([_unduloid_H(sf, t, center, crossing) for t in grid]) - H
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if np.isfinite(a) and np.isfinite(b) and a * b < 0 and abs(a - b) < 0.5:
            return brentq(lambda t: _unduloid_H(sf, t, center, crossing) - H,
                          grid[i], grid[i + 1], xtol=1e-13)
    raise InfeasibleSurfaceError(f"no unduloid piece with H = {H} on the {center} branch")


def catenoid_piece(sf, crossing=1, axis=None):
    """Critical catenoid piece (minimal, meeting the unit sphere orthogonally)."""
    if sf.K != 0:
        raise InfeasibleSurfaceError("catenoid pieces are Euclidean only")
    prof = solve_cmc_profile(0.0, 1.0, _profile_period_span(0.0, 1.0, sf.n), sf.n, fit=False)
    patch = _revolution_patch(sf, prof, 0.0, crossing, axis, "catenoid_piece")
    patch.info.update({"crossing": crossing})
    return patch


def make_surface(spec: SurfaceSpec):
    """Build the patch described by ``spec``."""
    if spec.family not in FAMILIES:
        raise InfeasibleSurfaceError(f"unknown surface family {spec.family!r}")
    sf = spec.space_form
    p = dict(spec.params)
    axis = p.pop("axis", None)

    def need(key):
        if key not in p:
            raise InfeasibleSurfaceError(f"{spec.family} requires parameter {key!r}")
        return p.pop(key)

    if spec.family == "geodesic_disk":
        patch = geodesic_disk(sf, axis=axis)
    elif spec.family in ("spherical_cap", "exterior_cap"):
        patch = spherical_cap(sf, float(need("theta")), float(need("rho")), axis=axis,
                              exterior=spec.family == "exterior_cap",
                              normal=p.pop("normal", "auto"))
    elif spec.family == "closed_sphere":
        patch = closed_sphere(sf, float(need("rho")), center=p.pop("center", None))
    elif spec.family == "perturbed_cap":
        patch = perturbed_cap(sf, float(need("theta")), float(need("rho")),
                              float(need("amplitude")), int(p.pop("mode", 0)),
                              bool(p.pop("flat_boundary", True)), axis=axis,
                              exterior=bool(p.pop("exterior", False)),
                              normal=p.pop("normal", "auto"))
    elif spec.family == "unduloid_piece":
        neck = p.pop("neck", None)
        H = p.pop("H", None)
        patch = unduloid_piece(sf, None if neck is None else float(neck),
                               None if H is None else float(H),
                               center=p.pop("center", "bulge"),
                               crossing=int(p.pop("crossing", 1)), axis=axis)
    else:
        patch = catenoid_piece(sf, crossing=int(p.pop("crossing", 1)), axis=axis)
    if p:
        raise InfeasibleSurfaceError(f"unknown parameters for {spec.family}: {sorted(p)}")
    return patch


def rotated(patch, Q):
    """Patch composed with an orthogonal map of the ambient model space."""
    Q = np.asarray(Q, dtype=float)
    params = dict(patch.params)
    params["frame"] = Q @ params["frame"]
    if "center" in params:
        params["center"] = Q @ params["center"]
    info = dict(patch.info)
    if "axis" in info:
        info["axis"] = Q @ info["axis"]
    orient = patch.orientation * (1 if np.linalg.det(Q) > 0 else -1)
    return replace(patch, params=params, info=info, orientation=orient)
