"""Scenario-driven batch runner.

Usage::

    capillary verify --config scenario.ini --out report.json [--seed N]
                     [--levels 0,1,2] [--tol 1e-6] [--jobs 4]

Subcommands select which checks of the scenario run: ``verify`` (identity
checks), ``spectrum`` (stability spectra and pairings), ``hkr``
(Heintze-Karcher-Ros and related integrals), ``sweep`` (everything) and
``convergence`` (integral identities over a level ladder, with one CSV row
per level). Exit codes: 0 all checks pass, 1 a check failed or raised,
2 configuration error (no report written).

The JSON report is deterministic for a given scenario and seed regardless of
``--jobs``; wall-clock timings go to a separate ``*.timings.json`` file.
"""
from __future__ import annotations

import argparse
import ast
import configparser
import csv
import hashlib
import itertools
import json
import math
import operator
import os
import re
import sys
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import hkr as hkr_mod
from . import identities as ids
from . import stability as stab
from .errors import ConfigError, InfeasibleSurfaceError
from .reports import _plain
from .spaceform import SpaceForm, check_field_identities, sample_sphere
from .surfaces import FAMILIES, SurfaceSpec, make_surface

SCHEMA_VERSION = 1
JOBS_ENV = "CAPILLARY_JOBS"

IDENTITY_KINDS = ("field_identities", "minkowski", "minkowski_higher", "balance", "laplacian",
                  "robin", "phi_mean", "aux_phi", "boundary_umbilic")
SPECTRUM_KINDS = ("spectrum", "pairing")
HKR_KINDS = ("hkr", "volume", "alexandrov", "radial")
INTEGRAL_KINDS = ("minkowski", "minkowski_higher", "balance", "alexandrov")
AMBIENT_KINDS = ("field_identities", "boundary_umbilic", "radial")
ALL_KINDS = IDENTITY_KINDS + SPECTRUM_KINDS + HKR_KINDS
COMMAND_KINDS = {"verify": IDENTITY_KINDS, "spectrum": SPECTRUM_KINDS, "hkr": HKR_KINDS,
                 "sweep": ALL_KINDS, "convergence": INTEGRAL_KINDS}

SCENARIO_KEYS = {"schema_version", "name", "seed", "levels", "tol", "directions", "rule_order",
                 "output", "csv"}
SURFACE_KEYS = {"family", "k", "r", "n", "theta", "rho", "rho_rel", "axis", "normal", "center",
                "amplitude", "mode", "flat_boundary", "exterior", "neck", "h", "crossing"}
CHECK_KEYS = {"kind", "surfaces", "directions", "tol", "levels", "variant", "which", "k",
              "mesh_levels", "eigen_count", "expect", "mesh_level", "abs_tol", "k_curv", "r",
              "n", "samples", "a_coef", "center", "rule_order", "robin_scale"}
AMBIENT_KEYS = {"k", "r", "n"}


# ---------------------------------------------------------------------------
# value parsing


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def parse_number(text):
    """Float from a literal or a small arithmetic expression in numbers and ``pi``."""
    text = text.strip()
    text = re.sub(r"(\d)\s*pi\b", r"\1*pi", text)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ValueError(f"not a number: {text!r}")

    try:
        return ev(ast.parse(text, mode="eval"))
    except SyntaxError as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def _split_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def parse_vector(text):
    return np.array([parse_number(t) for t in text.split()])


def parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# ---------------------------------------------------------------------------
# scenario model


@dataclass
class SurfaceEntry:
    label: str
    section: str
    spec: SurfaceSpec
    values: dict
    patch: object = None


@dataclass
class CheckEntry:
    name: str
    kind: str
    options: dict


@dataclass
class Scenario:
    path: str
    name: str
    seed: int
    levels: list
    tol: float | None
    directions: object
    rule_order: int
    output: str | None
    csv: bool
    surfaces: dict
    checks: list
    canonical: dict
    lines: dict = field(default_factory=dict)

    @property
    def hash(self):
        blob = json.dumps(self.canonical, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _line_index(text):
    """Map section -> line and (section, key) -> line for error messages."""
    lines = {}
    section = None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            lines.setdefault(section, i)
            continue
        if section is not None and raw[:1] not in " \t":
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            lines.setdefault((section, key), i)
    return lines


def _canonical(parser):
    out = {}
    for sec in parser.sections():
        out[sec] = {k: re.sub(r"\s+", " ", v.strip()) for k, v in sorted(parser.items(sec))}
    return out


def load_scenario(path):
    """Parse and validate a scenario file; raises :class:`ConfigError`."""
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=path) from exc
    lines = _line_index(text)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"syntax error: {exc.message if hasattr(exc, 'message') else exc}",
                          line, path) from exc

    def err(msg, section, key=None):
        line = lines.get((section, key)) if key else None
        raise ConfigError(msg, line or lines.get(section), path)

    if "scenario" not in parser:
        raise ConfigError("missing [scenario] section", 1, path)
    sc = parser["scenario"]
    for key in sc:
        if key not in SCENARIO_KEYS:
            err(f"unknown key {key!r} in [scenario]", "scenario", key)
    if "schema_version" not in sc:
        err("[scenario] requires schema_version", "scenario")
    try:
        version = int(sc["schema_version"])
    except ValueError:
        err("schema_version must be an integer", "scenario", "schema_version")
    if version != SCHEMA_VERSION:
        err(f"unsupported schema_version {version} (expected {SCHEMA_VERSION})",
            "scenario", "schema_version")

    def value(section, key, conv, default=None):
        sec = parser[section]
        if key not in sec:
            return default
        try:
            return conv(sec[key])
        except (ValueError, TypeError) as exc:
            err(f"bad value for {key!r}: {exc}", section, key)

    seed = value("scenario", "seed", int, 0)
    levels = value("scenario", "levels", lambda t: [int(v) for v in _split_list(t)], [0, 1, 2])
    tol = value("scenario", "tol", parse_number, None)
    rule_order = value("scenario", "rule_order", int, 8)
    directions = value("scenario", "directions", _parse_directions, "canonical")
    csv_flag = value("scenario", "csv", parse_bool, False)

    surfaces = {}
    checks = []
    for sec in parser.sections():
        if sec == "scenario":
            continue
        kind, _, name = sec.partition(".")
        if kind == "surface" and name:
            surfaces[name] = _expand_surface(parser, sec, name, err)
        elif kind == "check" and name:
            checks.append(_parse_check(parser, sec, name, err, surfaces))
        else:
            err(f"unknown section [{sec}] (expected [surface.NAME] or [check.NAME])", sec)
    for name, entries in surfaces.items():
        for entry in entries:
            try:
                entry.patch = make_surface(entry.spec)
            except (InfeasibleSurfaceError, ValueError) as exc:
                err(f"surface {entry.label}: {exc}", entry.section)
    return Scenario(path=path, name=sc.get("name", Path(path).stem), seed=seed, levels=levels,
                    tol=tol, directions=directions, rule_order=rule_order,
                    output=sc.get("output"), csv=csv_flag, surfaces=surfaces, checks=checks,
                    canonical=_canonical(parser), lines=lines)


def _parse_directions(text):
    t = text.strip().lower()
    if t in ("canonical", "axis"):
        return t
    return [parse_vector(v) for v in _split_list(text)]


_SURFACE_CONV = {
    "k": lambda t: int(parse_number(t)), "r": parse_number, "n": lambda t: int(parse_number(t)),
    "theta": parse_number, "rho": parse_number, "rho_rel": parse_number, "axis": parse_vector,
    "normal": str, "center": lambda t: t.strip() if t.strip() in ("bulge", "neck")
    else parse_vector(t), "amplitude": parse_number, "mode": lambda t: int(parse_number(t)),
    "flat_boundary": parse_bool, "exterior": parse_bool, "neck": parse_number,
    "h": parse_number, "crossing": lambda t: int(parse_number(t)),
}


def _fmt(v):
    if isinstance(v, np.ndarray):
        return " ".join(f"{x:g}" for x in v)
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _expand_surface(parser, sec, name, err):
    s = parser[sec]
    if "family" not in s:
        err(f"[{sec}] requires family", sec)
    family = s["family"].strip()
    if family not in FAMILIES:
        err(f"unknown surface family {family!r}; choose from {', '.join(FAMILIES)}", sec, "family")
    axes = []
    for key in s:
        if key == "family":
            continue
        if key not in SURFACE_KEYS:
            err(f"unknown key {key!r} in [{sec}]", sec, key)
        try:
            vals = [_SURFACE_CONV[key](v) for v in _split_list(s[key])]
        except (ValueError, TypeError) as exc:
            err(f"bad value for {key!r}: {exc}", sec, key)
        if not vals:
            err(f"empty value for {key!r}", sec, key)
        axes.append((key, vals))
    entries = []
    for combo in itertools.product(*[v for _, v in axes]):
        values = dict(zip([k for k, _ in axes], combo))
        K = values.get("k", 0)
        R = values.get("r", 1.0)
        n = values.get("n", 2)
        params = {}
        for key, v in values.items():
            if key in AMBIENT_KEYS:
                continue
            params["H" if key == "h" else key] = v
        if "rho_rel" in params:
            try:
                r_model = SpaceForm(K, R, n).r_model
            except ValueError as exc:
                err(str(exc), sec)
            params["rho"] = params.pop("rho_rel") * r_model
        try:
            spec = SurfaceSpec(family=family, K=K, R=R, n=n, params=params)
        except ValueError as exc:
            err(str(exc), sec)
        swept = [k for k, v in axes if len(v) > 1]
        label = name if not swept else name + "[" + ",".join(
            f"{k}={_fmt(values[k])}" for k in swept) + "]"
        entries.append(SurfaceEntry(label=label, section=sec, spec=spec, values=values))
    return entries


def _parse_check(parser, sec, name, err, surfaces):
    s = parser[sec]
    if "kind" not in s:
        err(f"[{sec}] requires kind", sec)
    kind = s["kind"].strip()
    if kind not in ALL_KINDS:
        err(f"unknown check kind {kind!r}; choose from {', '.join(ALL_KINDS)}", sec, "kind")
    opts = {}
    conv = {
        "surfaces": _split_list, "directions": _parse_directions, "tol": parse_number,
        "levels": lambda t: [int(v) for v in _split_list(t)], "variant": str.strip,
        "which": _split_list, "k": lambda t: [int(parse_number(v)) for v in _split_list(t)],
        "mesh_levels": lambda t: [int(v) for v in _split_list(t)],
        "eigen_count": int, "expect": str.strip, "mesh_level": int, "abs_tol": parse_number,
        "k_curv": lambda t: [int(parse_number(v)) for v in _split_list(t)],
        "r": lambda t: [parse_number(v) for v in _split_list(t)], "n": int,
        "samples": int, "a_coef": lambda t: [parse_number(v) for v in _split_list(t)],
        "center": parse_vector, "rule_order": int, "robin_scale": parse_number,
    }
    for key in s:
        if key == "kind":
            continue
        if key not in CHECK_KEYS:
            err(f"unknown key {key!r} in [{sec}]", sec, key)
        try:
            opts[key] = conv[key](s[key])
        except (ValueError, TypeError) as exc:
            err(f"bad value for {key!r}: {exc}", sec, key)
    if kind in AMBIENT_KINDS:
        if "surfaces" in opts:
            err(f"check kind {kind!r} does not take surfaces", sec, "surfaces")
    else:
        if not opts.get("surfaces"):
            err(f"check kind {kind!r} requires surfaces", sec)
        for sname in opts["surfaces"]:
            if sname not in surfaces:
                err(f"unknown surface {sname!r} (define [surface.{sname}] before the check)",
                    sec, "surfaces")
    if kind == "laplacian" and not opts.get("which"):
        err("laplacian checks require which", sec)
    for w in opts.get("which", []):
        if w not in ids.LAPLACIAN_IDS:
            err(f"unknown Laplacian identity {w!r}", sec, "which")
    return CheckEntry(name=name, kind=kind, options=opts)


# ---------------------------------------------------------------------------
# task expansion and execution


@dataclass
class Task:
    id: str
    kind: str
    check: str
    surface: SurfaceEntry | None
    a: np.ndarray | None
    params: dict
    seed: int


def _directions_for(entry, spec):
    dim = entry.spec.n + 1 if entry is not None else None
    if isinstance(spec, list):
        return spec
    if spec == "axis":
        axis = entry.patch.info.get("axis")
        if axis is None:
            raise ValueError(f"surface {entry.label} has no axis")
        return [np.asarray(axis, dtype=float)]
    return list(np.eye(dim))


def _task_seed(seed, task_id):
    return (seed + zlib.crc32(task_id.encode())) % (2 ** 32)


def expand_tasks(scn, command, seed, levels_override=None):
    kinds = COMMAND_KINDS[command]
    tasks = []
    for chk in scn.checks:
        if chk.kind not in kinds:
            continue
        o = chk.options
        base = {"tol": o.get("tol"), "levels": levels_override or o.get("levels") or scn.levels,
                "rule_order": o.get("rule_order", scn.rule_order)}
        if chk.kind in AMBIENT_KINDS:
            Ks = o.get("k_curv", [-1, 0, 1])
            Rs = o.get("r", [1.0])
            for K, R in itertools.product(Ks, Rs):
                tid = f"{chk.name}/K={K},R={R:g}"
                params = dict(base, K=K, R=R, n=o.get("n", 2), samples=o.get("samples"),
                              a_coef=o.get("a_coef", [1.0]), center=o.get("center"),
                              directions=o.get("directions"))
                tasks.append(Task(tid, chk.kind, chk.name, None, None, params,
                                  _task_seed(seed, tid)))
            continue
        extra = [{}]
        if chk.kind == "laplacian":
            extra = [{"which": w} for w in o["which"]]
        elif chk.kind in ("minkowski_higher",):
            extra = [{"k": k} for k in o.get("k", [1])]
        for sname in o["surfaces"]:
            for entry in scn.surfaces[sname]:
                dspec = o.get("directions", scn.directions)
                if chk.kind == "spectrum":
                    dirs = [None]
                else:
                    dirs = _directions_for(entry, dspec)
                for ai, a in enumerate(dirs):
                    for ex in extra:
                        tid = f"{chk.name}/{entry.label}"
                        if a is not None:
                            tid += f"/a={_fmt(np.asarray(a))}"
                        if ex:
                            tid += "/" + ",".join(f"{k}={v}" for k, v in ex.items())
                        params = dict(base, **ex)
                        for key in ("variant", "mesh_levels", "eigen_count", "expect",
                                    "mesh_level", "abs_tol", "robin_scale"):
                            if key in o:
                                params[key] = o[key]
                        tasks.append(Task(tid, chk.kind, chk.name, entry,
                                          None if a is None else np.asarray(a, dtype=float),
                                          params, _task_seed(seed, tid)))
    return tasks


def _tol(params, default):
    return default if params.get("tol") is None else params["tol"]


def run_task(task):
    """Execute one task; returns (status, report dict)."""
    k, p = task.kind, task.params
    patch = task.surface.patch if task.surface is not None else None
    lv, ro = p["levels"], p["rule_order"]
    if k == "minkowski":
        rep = ids.minkowski_residual(patch, task.a, p.get("variant"), lv, ro, _tol(p, 1e-6))
    elif k == "minkowski_higher":
        rep = ids.minkowski_higher(patch, task.a, p["k"], lv, ro, _tol(p, 1e-6))
    elif k == "balance":
        rep = ids.balance_residual(patch, task.a, lv, ro, _tol(p, 1e-6))
    elif k == "laplacian":
        rep = ids.laplacian_identity_residual(patch, task.a, p["which"], min(lv), 6,
                                              _tol(p, 1e-6))
    elif k == "robin":
        rep = ids.robin_residual(patch, task.a, p.get("variant"), 1, ro, _tol(p, 1e-7))
    elif k == "phi_mean":
        rep = ids.phi_mean(patch, task.a, max(lv), ro, _tol(p, 1e-8))
    elif k == "aux_phi":
        rep = ids.aux_phi_residual(patch, 0, 6, _tol(p, 1e-6))
    elif k == "alexandrov":
        rep = hkr_mod.alexandrov_consistency(patch, task.a, None, lv, ro, _tol(p, 1e-7))
    elif k == "field_identities":
        sf = SpaceForm(p["K"], p["R"], p["n"])
        a = _ambient_direction(task, sf)
        rep = check_field_identities(sf, a, p.get("samples") or 1000, task.seed, _tol(p, 1e-8))
    elif k == "boundary_umbilic":
        sf = SpaceForm(p["K"], p["R"], p["n"])
        a = _ambient_direction(task, sf)
        pts = sample_sphere(sf, p.get("samples") or 200, np.random.default_rng(task.seed))
        pts = pts[np.abs(pts @ a) > 1e-3 * sf.r_model]
        rep = ids.boundary_umbilic_residual(sf, a, pts, _tol(p, 1e-10))
    elif k == "radial":
        sf = SpaceForm(p["K"], p["R"], p["n"])
        center = p.get("center")
        center = np.zeros(sf.dim) if center is None else np.asarray(center) * sf.r_model
        reps = [hkr_mod.radial_solution_residual(sf, center, A, p.get("samples") or 500,
                                                 task.seed, _tol(p, 1e-9))
                for A in p.get("a_coef", [1.0])]
        rep = max(reps, key=lambda r: r.residual)
    elif k == "volume":
        div = hkr_mod.volume_potential_integral(patch, task.a, max(lv), ro)
        solid = hkr_mod.solid_potential_integral(patch, task.a)
        from .reports import integral_report
        rep = integral_report("volume", [div], [solid], [max(lv)], _tol(p, 1e-5),
                              {"family": patch.family, "K": patch.sf.K, "theta": patch.theta,
                               "a": task.a.tolist(), "routes": ["divergence", "solid"]})
    elif k == "hkr":
        rep = hkr_mod.hkr_check(patch, task.a, max(lv), ro, _tol(p, 1e-6))
        d = rep.to_dict()
        expect = p.get("expect", "inequality")
        if expect == "refusal":
            ok = not rep.hypotheses_hold
        elif not rep.hypotheses_hold:
            ok = False
        elif expect == "equality":
            ok = bool(rep.equality)
        elif expect == "strict":
            ok = bool(rep.relative_margin > 10 * rep.tol)
        else:
            ok = bool(rep.inequality_holds)
        d["expect"] = expect
        return ("pass" if ok else "fail"), d
    elif k == "spectrum":
        levels = p.get("mesh_levels", [2, 3])
        rep = stab.spectrum_study(patch, levels, p.get("eigen_count", 4), _tol(p, 1e-2),
                                  p.get("robin_scale", 1.0))
        d = rep.to_dict()
        expect = p.get("expect")
        d["expect"] = expect
        ok = rep.classification == expect if expect else rep.classification in ("stable",
                                                                                  "unstable")
        return ("pass" if ok else "fail"), d
    elif k == "pairing":
        lhs, rhs = stab.stability_pairing(patch, task.a, p.get("mesh_level", 3), ro, max(lv))
        tol = _tol(p, 0.03)
        abs_tol = p.get("abs_tol", 1e-3)
        rel = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
        ok = rel < tol or max(abs(lhs), abs(rhs)) < abs_tol
        return ("pass" if ok else "fail"), _plain({"identity": "stability_pairing", "lhs": lhs,
                                                   "rhs": rhs, "relative": rel, "tol": tol,
                                                   "abs_tol": abs_tol, "passed": bool(ok)})
    else:  # pragma: no cover - guarded by the parser
        raise ValueError(f"unknown kind {k}")
    return ("pass" if rep.passed else "fail"), rep.to_dict()


def _ambient_direction(task, sf):
    dirs = task.params.get("directions")
    if isinstance(dirs, list) and dirs:
        return np.asarray(dirs[0], dtype=float)
    rng = np.random.default_rng(task.seed)
    a = rng.standard_normal(sf.dim)
    return a / np.linalg.norm(a)


def _execute(task):
    start = time.perf_counter()
    try:
        status, rep = run_task(task)
    except Exception as exc:  # a failing check must not abort the run
        status, rep = "error", {"error": f"{type(exc).__name__}: {exc}"}
    return status, rep, time.perf_counter() - start


def _surface_record(entry):
    if entry is None:
        return None
    spec = entry.spec
    return _plain({"label": entry.label, "family": spec.family, "K": spec.K, "R": spec.R,
                   "n": spec.n, "params": spec.params, "cmc": entry.patch.cmc,
                   "theta": entry.patch.theta})


def run_scenario(scn, command="sweep", seed=None, levels=None, tol=None, jobs=1):
    """Run the checks of ``scn`` selected by ``command``; returns (report, timings)."""
    seed = scn.seed if seed is None else seed
    if command == "convergence" and levels is None:
        levels = [0, 1, 2, 3]
    tasks = expand_tasks(scn, command, seed, levels)
    tol = scn.tol if tol is None else tol
    if tol is not None:
        for t in tasks:
            t.params["tol"] = tol
    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_execute, tasks))
    else:
        results = [_execute(t) for t in tasks]
    checks, timings = [], {}
    for t, (status, rep, wall) in zip(tasks, results):
        checks.append({"id": t.id, "check": t.check, "kind": t.kind,
                       "surface": _surface_record(t.surface),
                       "a": None if t.a is None else t.a.tolist(),
                       "status": status, "report": rep})
        timings[t.id] = wall
    counts = {s: sum(c["status"] == s for c in checks) for s in ("pass", "fail", "error")}
    report = {"tool": "capillary", "version": __version__, "schema_version": SCHEMA_VERSION,
              "command": command, "scenario": scn.name, "scenario_hash": scn.hash, "seed": seed,
              "levels": levels, "tol_override": tol, "checks": checks,
              "summary": {"total": len(checks), "passed": counts["pass"],
                          "failed": counts["fail"], "errors": counts["error"]},
              "passed": counts["fail"] == 0 and counts["error"] == 0}
    return _plain(report), timings


def dumps_report(report):
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


CSV_COLUMNS = ("id", "family", "K", "theta", "a", "level", "residual", "order", "pass")


def csv_rows(report):
    """One row per (check, level): relative residuals for integral identities,
    lambda_1 for spectra, the relative margin for HKR."""
    rows = []
    for c in report["checks"]:
        surf = c["surface"] or {}
        rep = c["report"]
        K = surf.get("K", (rep.get("meta") or {}).get("K"))
        base = {"id": c["id"], "family": surf.get("family", c["kind"]), "K": K,
                "theta": surf.get("theta"),
                "a": "" if c["a"] is None else " ".join(repr(float(v)) for v in c["a"]),
                "order": rep.get("order"), "pass": c["status"] == "pass"}
        if rep.get("level_residuals"):
            for L, r in zip(rep["levels"], rep["level_residuals"]):
                rows.append(dict(base, level=L, residual=r))
        elif rep.get("level_eigenvalues"):
            for L, ev in zip(rep["levels"], rep["level_eigenvalues"]):
                rows.append(dict(base, level=L, residual=ev[0]))
        else:
            res = rep.get("residual", rep.get("relative_margin", rep.get("relative")))
            rows.append(dict(base, level="", residual=res))
    return rows


def write_csv(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for row in csv_rows(report):
            w.writerow({k: ("" if row[k] is None else row[k]) for k in CSV_COLUMNS})


def _jobs(arg):
    if arg is not None:
        return max(1, arg)
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def build_parser():
    ap = argparse.ArgumentParser(prog="capillary", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"capillary {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMAND_KINDS:
        p = sub.add_parser(name, help=f"run the {name} checks of a scenario")
        p.add_argument("--config", required=True, help="scenario file (INI)")
        p.add_argument("--out", help="JSON report path (default: scenario output or report.json)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--levels", help="comma-separated quadrature levels")
        p.add_argument("--tol", type=float, help="override every check tolerance")
        p.add_argument("--jobs", type=int, help=f"worker threads (env {JOBS_ENV})")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        scn = load_scenario(args.config)
        levels = None
        if args.levels:
            try:
                levels = [int(v) for v in _split_list(args.levels)]
            except ValueError as exc:
                raise ConfigError(f"--levels: {exc}") from exc
            if not levels or min(levels) < 0:
                raise ConfigError("--levels needs nonnegative integers")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    report, timings = run_scenario(scn, args.command, args.seed, levels, args.tol,
                                   _jobs(args.jobs))
    out = Path(args.out or scn.output or "report.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dumps_report(report))
    out.with_suffix(".timings.json").write_text(json.dumps(
        {"scenario_hash": report["scenario_hash"], "seconds": timings}, indent=2) + "\n")
    if scn.csv or args.command in ("sweep", "convergence"):
        write_csv(report, out.with_suffix(".csv"))
    s = report["summary"]
    print(f"{args.command}: {s['passed']}/{s['total']} passed, {s['failed']} failed, "
          f"{s['errors']} errors -> {out}")
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
