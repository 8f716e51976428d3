"""Result containers shared by the verification modules."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

REL_FLOOR = 1e-14
ABS_FLOOR = 1e-12


def relative_residual(lhs, rhs, floor=REL_FLOOR):
    """|lhs - rhs| divided by the larger magnitude (never below ``floor``)."""
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), floor)


def _plain(value):
    """Convert numpy scalars/arrays to JSON-friendly python objects."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


@dataclass
class IdentityReport:
    identity: str
    residual: float
    relative: float
    passed: bool | None
    tol: float
    lhs: float | None = None
    rhs: float | None = None
    levels: list = field(default_factory=list)
    level_residuals: list = field(default_factory=list)
    order: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return _plain(asdict(self))


def integral_report(identity, lhs_levels, rhs_levels, levels, tol,
                    meta=None, abs_floor=ABS_FLOOR):
    """Build a report for an integral identity evaluated at several levels.

    The finest level decides pass/fail; the per-level relative residuals
    feed the convergence-order estimate.
    """
    from .quadrature import convergence_order

    lhs_levels = [float(v) for v in lhs_levels]
    rhs_levels = [float(v) for v in rhs_levels]
    rel = [relative_residual(l, r) for l, r in zip(lhs_levels, rhs_levels)]
    absres = [abs(l - r) for l, r in zip(lhs_levels, rhs_levels)]
    lhs, rhs = lhs_levels[-1], rhs_levels[-1]
    order = None
    if len(levels) >= 3:
        # relative residuals against the exact value 0, floored at abs_floor
        scale = max(abs(lhs), abs(rhs), REL_FLOOR)
        order = convergence_order(rel, true_value=0.0,
                                  floor=max(abs_floor / scale, 1e-15))
    passed = bool(rel[-1] < tol or absres[-1] < abs_floor)
    return IdentityReport(identity=identity, residual=absres[-1],
                          relative=rel[-1], passed=passed, tol=tol,
                          lhs=lhs, rhs=rhs, levels=list(levels),
                          level_residuals=rel, order=order,
                          meta=dict(meta or {}))


def pointwise_report(identity, residual, tol, meta=None, lhs=None, rhs=None):
    """Report for a sup-norm (pointwise) identity: residual is absolute."""
    residual = float(residual)
    return IdentityReport(identity=identity, residual=residual,
                          relative=residual, passed=bool(residual < tol),
                          tol=tol, lhs=lhs, rhs=rhs, meta=dict(meta or {}))
