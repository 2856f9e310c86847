"""Declarative experiment configs and their execution.

A config is a flat JSON object; :func:`parse_config` rejects unknown keys
and nonpositive tolerances.  :func:`run` returns the report dictionary,
an optional table and the process exit code.
"""

from __future__ import annotations

import math
import platform
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import body as bodies
from .body import SupportRejected
from .determinants import cofactor, cofactor2
from .fields import Const, Exp, FieldDomainError, Harmonic, Linear, Log, Scale, Sum, c2_norm, field_from_json
from .oracles import mc_volume
from .sphere import build_grid, integrate
from .variation import (
    PreconditionError, concavity_scan, lambda_grid, log_bm_check, log_minkowski_chain,
    poincare_gap, rho_threshold, third_ratio, volume_path, ibp1_residual,
    ibp2_residual,
)

CONFIG_SCHEMA = "logbm.config/1"
REPORT_SCHEMA = "logbm.report/1"
COMMANDS = ("volume", "concavity", "logbm", "poincare", "identities", "cone", "thirdratio")
TABLE_COLUMNS = ("f", "f1", "f2", "f3", "logf2", "logf3", "deficit")

EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_VALIDATION = 0, 1, 2, 3

DEFAULTS = {
    "schema": CONFIG_SCHEMA,
    "dim": 3,
    "grid_kind": None,
    "resolution": 32,
    "seed": 0,
    "field": None,
    "support": False,
    "radius": 1.0,
    "s_samples": 41,
    "lambda_samples": 21,
    "tolerance": 1e-8,
    "identity_tolerance": 1e-6,
    "mc_samples": 0,
    "scales": [0.2, 0.1, 0.05],
    "normalize_volume": False,
}


class ConfigError(ValueError):
    pass


def parse_config(doc: dict) -> dict:
    """Validate a config dictionary and fill defaults (strict: unknown keys fail)."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - set(DEFAULTS) - {"command"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if doc.get("command") not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {doc.get('command')!r}")
    cfg = {**DEFAULTS, **doc}
    if cfg["schema"] != CONFIG_SCHEMA:
        raise ConfigError(f"unsupported config schema {cfg['schema']!r}")
    for key in ("tolerance", "identity_tolerance", "radius"):
        if not isinstance(cfg[key], (int, float)) or cfg[key] <= 0:
            raise ConfigError(f"{key} must be a positive number")
    for key in ("dim", "resolution", "s_samples", "lambda_samples", "seed", "mc_samples"):
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool):
            raise ConfigError(f"{key} must be an integer")
    if cfg["s_samples"] < 3 or cfg["lambda_samples"] < 2:
        raise ConfigError("need at least 3 s-samples and 2 lambda-samples")
    if cfg["command"] not in ("identities",) and cfg["field"] is None:
        raise ConfigError(f"command {cfg['command']!r} needs a field")
    if cfg["field"] is not None and not isinstance(cfg["field"], dict):
        raise ConfigError("field must be a JSON object")
    return cfg


@dataclass
class Outcome:
    report: dict
    table: list[dict] | None = None
    table_key: str = "s"
    exit_code: int = EXIT_OK
    extra: dict = field(default_factory=dict)


def _provenance(cfg, grid):
    return {
        "schema": REPORT_SCHEMA,
        "config": cfg,
        "grid": grid.descriptor() if grid is not None else None,
        "versions": {"logbm": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }


def run(config: dict) -> Outcome:
    """Execute one experiment.  Never raises for validation failures."""
    cfg = parse_config(config)
    try:
        grid = build_grid(cfg["dim"], cfg["resolution"], cfg["grid_kind"], cfg["seed"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        fld = field_from_json(cfg["field"], cfg["dim"]) if cfg["field"] is not None else None
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad field description: {exc}") from exc
    if fld is not None and fld.dim != grid.dim:
        raise ConfigError(f"field dimension {fld.dim} does not match dim {grid.dim}")
    try:
        out = _RUNNERS[cfg["command"]](cfg, grid, fld)
    except (SupportRejected, PreconditionError, FieldDomainError) as exc:
        report = {"error": type(exc).__name__, "message": str(exc), "passed": False}
        for attr in ("node", "eigenvalue", "value", "s"):
            if getattr(exc, attr, None) is not None:
                report[attr] = getattr(exc, attr)
        out = Outcome(report, exit_code=EXIT_VALIDATION)
    out.report = {**_provenance(cfg, grid), "command": cfg["command"], **out.report}
    return out


def _verdict_code(passed: bool) -> int:
    return EXIT_OK if passed else EXIT_VERDICT


def _run_volume(cfg, grid, h):
    body = bodies.validate_support(h, grid)
    vol = bodies.volume(body)
    cone_total = integrate(grid, bodies.cone_densities(body))
    report = {
        "volume": vol,
        "volume_std_error": bodies.volume_error(body),
        "surface_area": bodies.surface_area(body),
        "cone_measure_total": cone_total,
        "min_Q_eigen": body.min_Q_eigen,
        "c2_norm": c2_norm(h, grid),
    }
    passed = True
    if cfg["mc_samples"]:
        est = mc_volume(h, grid, cfg["mc_samples"], cfg["seed"])
        z = abs(est.value - vol) / math.hypot(est.std_error, report["volume_std_error"])
        report["monte_carlo"] = {"value": est.value, "std_error": est.std_error,
                                 "samples": est.samples, "seed": est.seed, "z": z}
        passed = z <= 3.0
    report["passed"] = passed
    return Outcome(report, exit_code=_verdict_code(passed))


def _path_rows(path, key="s", deficits=None, params=None, f_override=None):
    rows = []
    for i, row in enumerate(path.rows()):
        r = {key: row["s"] if params is None else params[i]}
        r.update({c: row.get(c) for c in TABLE_COLUMNS if c != "deficit"})
        if f_override is not None:
            r["f"] = f_override[i]
        r["deficit"] = None if deficits is None else deficits[i]
        rows.append(r)
    return rows


def _run_concavity(cfg, grid, psi):
    rep = concavity_scan(psi, grid, cfg["s_samples"], cfg["tolerance"])
    report = rep.to_dict()
    i0 = int(np.argmin(np.abs(rep.path.s)))
    report["logf2_at_zero"] = float(rep.path.logf2[i0]) if rep.path.s[i0] == 0.0 else None
    report["rho_threshold"] = rho_threshold(grid.dim)
    report["passed"] = rep.concave
    return Outcome(report, _path_rows(rep.path), "s", _verdict_code(rep.concave))


def _run_logbm(cfg, grid, fld):
    radius = float(cfg["radius"])
    h = fld if cfg["support"] else Exp(fld)
    K = bodies.validate_support(h, grid)
    lambdas = lambda_grid(cfg["lambda_samples"])
    rep = log_bm_check(K, radius, lambdas, cfg["tolerance"])
    # lam -> |K^lam (R B)^(1-lam)| is R^n f(lam) for the path of log h - log R
    shifted = Sum([Log(h), Const(-math.log(radius), grid.dim)])
    path = volume_path(shifted, grid, lambdas)
    scale = radius**grid.dim
    rows = _path_rows(path, "lambda", rep.deficits, lambdas, rep.volumes)
    for r in rows:
        for c in ("f1", "f2", "f3"):
            r[c] *= scale
    report = rep.to_dict()
    report["path_volume_mismatch"] = float(np.max(np.abs(scale * path.f - rep.volumes)))
    return Outcome(report, rows, "lambda", _verdict_code(rep.passed))


def _run_poincare(cfg, grid, psi):
    gap = poincare_gap(psi, grid)
    passed = gap >= -cfg["tolerance"]
    return Outcome({"gap": gap, "passed": passed}, exit_code=_verdict_code(passed))


SHIPPED_IBP1 = (
    ("h=1, psi=Y20, phi=Y40", lambda: (Const(1.0, 3), Harmonic(2, 0), Harmonic(4, 0))),
    ("h=exp(0.1 Y20), psi=u1^2, phi=Y20",
     lambda: (Exp(Scale(0.1, Harmonic(2, 0))), Linear([1.0, 0, 0]) * Linear([1.0, 0, 0]), Harmonic(2, 0))),
)
SHIPPED_IBP2 = (
    ("h=1, (Y20, Y21, Y40)", lambda: (Const(1.0, 3), Harmonic(2, 0), Harmonic(2, 1), Harmonic(4, 0))),
    ("h=exp(0.05 Y20), (Y22, Y4-1, Y2-2)",
     lambda: (Exp(Scale(0.05, Harmonic(2, 0))), Harmonic(2, 2), Harmonic(4, -1), Harmonic(2, -2))),
)


def cofactor_identity_errors(seed: int = 0, count: int = 100, max_order: int = 5) -> dict:
    """Worst violations of the cofactor identities over random symmetric matrices."""
    rng = np.random.default_rng(seed)
    worst = {"euler_first": 0.0, "euler_second": 0.0, "identity": 0.0}
    for i in range(count):
        n = 2 + i % (max_order - 1)
        a = rng.uniform(-1.0, 1.0, (n, n))
        a = 0.5 * (a + a.T)
        c = cofactor(a)
        worst["euler_first"] = max(worst["euler_first"], abs(np.sum(c * a) - n * np.linalg.det(a)))
        c2 = cofactor2(a)
        e2 = np.abs(np.einsum("jkrs,rs->jk", c2, a) - (n - 1) * c).max()
        worst["euler_second"] = max(worst["euler_second"], float(e2))
        worst["identity"] = max(worst["identity"], float(np.abs(cofactor(np.eye(n)) - np.eye(n)).max()))
    return worst


def _run_identities(cfg, grid, _fld):
    tol = cfg["identity_tolerance"]
    checks = {}
    errs = cofactor_identity_errors(cfg["seed"])
    checks["cofactor_euler_first"] = (errs["euler_first"], 1e-10)
    checks["cofactor_euler_second"] = (errs["euler_second"], 1e-10)
    checks["cofactor_identity"] = (errs["identity"], 0.0)
    if grid.dim == 3:
        for name, make in SHIPPED_IBP1:
            checks[f"ibp1[{name}]"] = (ibp1_residual(*make(), grid), tol)
        for name, make in SHIPPED_IBP2:
            checks[f"ibp2[{name}]"] = (ibp2_residual(*make(), grid), tol)
    results = {k: {"value": float(v), "tolerance": t, "passed": bool(v <= t)} for k, (v, t) in checks.items()}
    passed = all(r["passed"] for r in results.values())
    return Outcome({"checks": results, "passed": passed}, exit_code=_verdict_code(passed))


def _run_cone(cfg, grid, h):
    K = bodies.validate_support(h, grid)
    radius = float(cfg["radius"])
    report = {}
    if cfg["normalize_volume"]:
        target = bodies.volume(bodies.ball(radius, grid))
        c = (target / bodies.volume(K)) ** (1.0 / grid.dim)
        K = bodies.validate_support(Scale(c, h), grid)
        report["normalization_factor"] = c
    dens = bodies.cone_densities(K)
    chain = log_minkowski_chain(K, radius, lambda_grid(cfg["lambda_samples"]))
    report.update({
        "cone_density_min": float(dens.min()),
        "cone_density_max": float(dens.max()),
        "cone_density_parity_error": float(np.abs(dens - dens[grid.antipode]).max()),
        "chain": chain.to_dict(),
    })
    passed = chain.first_gap >= -cfg["tolerance"] and chain.second_gap >= -cfg["tolerance"]
    report["passed"] = bool(passed)
    return Outcome(report, exit_code=_verdict_code(passed))


def _run_thirdratio(cfg, grid, psi):
    threshold = rho_threshold(grid.dim)
    rows = []
    consistent = True
    for t in cfg["scales"]:
        scaled = Scale(float(t), psi)
        rho = third_ratio(scaled, grid, cfg["s_samples"])
        scan = concavity_scan(scaled, grid, cfg["s_samples"], cfg["tolerance"])
        ok = scan.concave or rho >= threshold
        consistent &= ok
        rows.append({"scale": t, "rho": rho, "c2_norm": scan.c2_norm,
                     "verdict": scan.verdict, "below_threshold": rho < threshold})
    report = {"rho_threshold": threshold, "scales": rows, "passed": bool(consistent)}
    return Outcome(report, exit_code=_verdict_code(consistent))


_RUNNERS = {
    "volume": _run_volume,
    "concavity": _run_concavity,
    "logbm": _run_logbm,
    "poincare": _run_poincare,
    "identities": _run_identities,
    "cone": _run_cone,
    "thirdratio": _run_thirdratio,
}
