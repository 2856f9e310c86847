"""Command-line front end.

Every subcommand writes ``report.json`` (and, for path experiments,
``table.csv``) into ``--out``.  Exit codes: 0 all verdicts pass,
1 a verdict failed, 2 bad config, 3 a body or precondition failed
validation.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .experiments import (
    COMMANDS, EXIT_CONFIG, TABLE_COLUMNS, ConfigError, Outcome, parse_config, run,
)

TABLE_HELP = (
    "table.csv columns (fixed order): s|lambda, " + ", ".join(TABLE_COLUMNS)
    + ".  f..logf3 are the volume path and its analytic derivatives; "
    "deficit is filled by logbm only.  Empty cells mean not applicable."
)


def _jsonable(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, float) and obj != obj:
        return None
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_outputs(outcome: Outcome, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(outcome.report, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    if outcome.table is not None:
        with open(out_dir / "table.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([outcome.table_key, *TABLE_COLUMNS])
            for row in outcome.table:
                cells = [row[outcome.table_key], *(row.get(c) for c in TABLE_COLUMNS)]
                writer.writerow(["" if v is None else repr(float(v)) for v in cells])


def _load_json_arg(text: str):
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    with open(text, encoding="utf-8") as fh:
        return json.load(fh)


def load_config_file(path) -> dict:
    """Read a config, or the config embedded in a previous report."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict) and "config" in doc and "command" in doc.get("config", {}):
        doc = doc["config"]
    return doc


def _config_from_args(args) -> dict:
    cfg = {"command": args.command}
    mapping = {
        "dim": "dim", "resolution": "resolution", "grid_kind": "grid_kind", "seed": "seed",
        "radius": "radius", "s_steps": "s_samples", "lambda_steps": "lambda_samples",
        "tolerance": "tolerance", "identity_tolerance": "identity_tolerance",
        "mc_samples": "mc_samples", "scales": "scales",
    }
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "field", None):
        cfg["field"] = _load_json_arg(args.field)
    if getattr(args, "support", False):
        cfg["support"] = True
    if getattr(args, "normalize_volume", False):
        cfg["normalize_volume"] = True
    return cfg


def _execute(cfg: dict, out_dir: Path) -> int:
    try:
        outcome = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_outputs(outcome, out_dir)
    verdict = outcome.report.get("passed")
    print(f"{outcome.report['command']}: passed={verdict} exit={outcome.exit_code} -> {out_dir}")
    return outcome.exit_code


def _batch_one(args):
    path, out_root = args
    try:
        cfg = load_config_file(path)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error in {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _execute(cfg, Path(out_root) / Path(path).stem)


def worker_cap() -> int | None:
    value = os.environ.get("LOGBM_THREADS")
    return int(value) if value else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logbm",
        description="Volume-path and local log-Brunn-Minkowski experiments on support functions.",
        epilog=TABLE_HELP,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dim", type=int)
    common.add_argument("--resolution", type=int)
    common.add_argument("--grid-kind", choices=["uniform_circle", "gauss_product", "monte_carlo"])
    common.add_argument("--seed", type=int)
    common.add_argument("--field", help="field JSON file, or inline JSON starting with '{'")
    common.add_argument("--tolerance", type=float)
    common.add_argument("--out", default=".", help="output directory (default: current)")

    helps = {
        "volume": "volume, surface area and cone total of a support function h",
        "concavity": "scan (log f)'' along exp(s psi) on [-2, 2]",
        "logbm": "log-BM deficits of exp(psi) (or --support h) against the ball",
        "poincare": "Poincare gap for an even zero-mean psi",
        "identities": "cofactor identities and integration-by-parts residuals",
        "cone": "cone-measure density and the log-Minkowski chain",
        "thirdratio": "empirical third-derivative ratio rho over scales of psi",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name], epilog=TABLE_HELP)
        if name in ("concavity", "thirdratio"):
            p.add_argument("--s-steps", type=int)
        if name in ("logbm", "cone"):
            p.add_argument("--lambda-steps", type=int)
            p.add_argument("--radius", type=float)
        if name == "logbm":
            p.add_argument("--support", action="store_true", help="--field is h itself, not psi = log h")
        if name == "cone":
            p.add_argument("--normalize-volume", action="store_true")
        if name == "volume":
            p.add_argument("--mc-samples", type=int)
        if name == "identities":
            p.add_argument("--identity-tolerance", type=float)
        if name == "thirdratio":
            p.add_argument("--scales", type=float, nargs="+")

    p = sub.add_parser("run", help="run one config file (or the config embedded in a report)")
    p.add_argument("config")
    p.add_argument("--out", default=".")

    p = sub.add_parser("batch", help="run every *.json config in a directory")
    p.add_argument("directory")
    p.add_argument("--out", default=".")
    p.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    if args.command == "run":
        try:
            cfg = load_config_file(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return _execute(cfg, out)
    if args.command == "batch":
        paths = sorted(Path(args.directory).glob("*.json"))
        jobs = max(1, args.jobs)
        cap = worker_cap()
        if cap:
            jobs = min(jobs, cap)
        work = [(str(p), str(out)) for p in paths]
        if jobs == 1:
            codes = [_batch_one(w) for w in work]
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                codes = list(pool.map(_batch_one, work))
        return max(codes, default=0)
    try:
        cfg = _config_from_args(args)
        parse_config(cfg)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _execute(cfg, out)


if __name__ == "__main__":
    sys.exit(main())
