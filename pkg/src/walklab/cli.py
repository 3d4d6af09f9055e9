"""Command-line entry point: ``walklab <subcommand> [flags]``.

Exit status is 0 on success, 1 when a report contains a failed hard verdict
and 2 for invalid flags or an unwritable output path.  Diagnostic verdicts
never change the exit status.  Output goes to ``--output``, else to
``$WALKLAB_OUTPUT_DIR/<name>.<format>`` when that variable is set, else to
standard output.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

from . import mc_lab
from .constants import DEFAULT_TOLERANCE, dimension_constants
from .distributions import KINDS, PmfSpec
from .lattice import ConfigurationError, WalkConfig, direction_blocks
from .mc_lab import ExperimentPlan, format_number, reports_to_csv, reports_to_json
from .rate_geometry import RateSetDescriptor, boundary_curve, extremal_points
from .tally import TallyBoard

OUTPUT_DIR_ENV = "WALKLAB_OUTPUT_DIR"
SUITES = ("distributions", "levels", "newpoints", "containment", "fillin", "all")
DISTRIBUTION_CAP = 10**4
FILLIN_EPSILON = 0.7
DEFAULT_EPSILON = 0.5

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    dimension: int = 3
    horizon: int = 10**6
    cap: int | None = None
    replications: int = 20
    seed: int = 0
    epsilon: float | None = None
    output_path: Path | None = None
    format: str = "json"
    workers: int = 1
    significance: float = 0.01
    suite: str = "all"
    kind: str = "geometric_site"
    max_index: int = 20
    which: str = "B"
    grid: int = 200
    tolerance: float = DEFAULT_TOLERANCE
    snapshot: Path | None = None


def _positive_int(text: str) -> int:
    try:
        value = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--d", type=int, default=3, dest="dimension", help="lattice dimension, at least 3 (default 3)")
    common.add_argument("--output", type=Path, default=None,
                        help=f"output file (default: ${OUTPUT_DIR_ENV}/<name>.<format>, else stdout)")
    common.add_argument("--format", choices=("json", "csv"), default=None,
                        help="output format (default json; csv for pmf and boundary)")

    walk = argparse.ArgumentParser(add_help=False)
    walk.add_argument("--horizon", type=_positive_int, default=10**6, help="walk length n (default 1e6)")
    walk.add_argument("--cap", type=_positive_int, default=None,
                      help="cap horizon standing in for infinity (default 4*horizon; 1e4 for distributions)")
    walk.add_argument("--replications", type=_positive_int, default=20, help="independent walks (default 20)")
    walk.add_argument("--seed", type=_seed, default=0, help="64-bit master seed (default 0)")
    walk.add_argument("--workers", type=_positive_int, default=1, help="worker processes (default 1)")

    parser = argparse.ArgumentParser(prog="walklab", description="Local times of simple random walk on Z^d.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("constants", parents=[common], help="escape probability and derived constants")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE, help="absolute tolerance on gamma")

    p = sub.add_parser("pmf", parents=[common], help="tabulate an exact law")
    p.add_argument("--kind", choices=KINDS, default="geometric_site")
    p.add_argument("--max", type=int, default=20, dest="max_index",
                   help="largest index (total k+l for joint laws, l for the point/sphere law)")

    p = sub.add_parser("boundary", parents=[common], help="boundary of B or D on a uniform grid")
    p.add_argument("--set", choices=("B", "D"), default="B", dest="which")
    p.add_argument("--grid", type=_positive_int, default=200, help="number of abscissae (default 200)")

    p = sub.add_parser("simulate", parents=[common, walk], help="per-walk summary statistics")
    p.add_argument("--snapshot", type=Path, default=None, help="also write the board of replication 0 as JSON")

    p = sub.add_parser("verify", parents=[common, walk], help="Monte Carlo checks against exact laws and limits")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--epsilon", type=float, default=None,
                   help="scaling slack for containment (default 0.5) and fill-in (default 0.7)")
    p.add_argument("--significance", type=float, default=0.01, help="chi-square test level (default 0.01)")

    p = sub.add_parser("fillin", parents=[common, walk], help="fill-in fractions of the scaled sets")
    p.add_argument("--epsilon", type=float, default=None, help="scaling slack (default 0.7)")
    return parser


def config_from_args(args: argparse.Namespace) -> CliConfig:
    values = vars(args).copy()
    fmt = values.pop("format") or ("csv" if args.subcommand in ("pmf", "boundary") else "json")
    output = values.pop("output")
    known = {k: v for k, v in values.items() if k in CliConfig.__dataclass_fields__ and v is not None}
    return CliConfig(format=fmt, output_path=output, **known)


def validate(cfg: CliConfig) -> None:
    """Reject bad combinations before any computation."""
    if cfg.dimension < 3:
        raise ConfigurationError(f"dimension must be at least 3 (got {cfg.dimension})")
    if cfg.subcommand in ("simulate", "verify", "fillin"):
        WalkConfig(cfg.dimension, cfg.horizon, cfg.seed)
        if cfg.cap is not None and cfg.cap < cfg.horizon and not (
                cfg.subcommand == "verify" and cfg.suite == "distributions"):
            raise ConfigurationError("--cap must be at least --horizon")
    if cfg.epsilon is not None and cfg.epsilon <= 0:
        raise ConfigurationError("--epsilon must be positive")
    if cfg.subcommand == "fillin" and cfg.epsilon is not None and cfg.epsilon >= 1:
        raise ConfigurationError("fill-in needs --epsilon in (0, 1)")
    if not 0 < cfg.significance < 1:
        raise ConfigurationError("--significance must lie in (0, 1)")
    if cfg.subcommand == "pmf" and cfg.max_index < 0:
        raise ConfigurationError("--max must be nonnegative")
    if cfg.subcommand == "boundary" and cfg.grid < 2:
        raise ConfigurationError("--grid needs at least 2 points")
    if cfg.subcommand == "constants" and cfg.tolerance < 1e-10:
        raise ConfigurationError("--tolerance below 1e-10 is not supported")
    for path in (resolve_output(cfg), cfg.snapshot):
        if path is not None:
            _check_writable(path)


def resolve_output(cfg: CliConfig) -> Path | None:
    if cfg.output_path is not None:
        return cfg.output_path
    base = os.environ.get(OUTPUT_DIR_ENV)
    if not base:
        return None
    name = cfg.subcommand if cfg.subcommand != "verify" else f"verify-{cfg.suite}"
    return Path(base) / f"{name}.{cfg.format}"


def _check_writable(path: Path):
    parent = path.parent if str(path.parent) else Path(".")
    if path.is_dir():
        raise ConfigurationError(f"output path {path} is a directory")
    if not parent.is_dir():
        raise ConfigurationError(f"output directory {parent} does not exist")
    if not os.access(parent, os.W_OK) or (path.exists() and not os.access(path, os.W_OK)):
        raise ConfigurationError(f"output path {path} is not writable")


# -- subcommands ---------------------------------------------------------------

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(mc_lab._rounded(obj), indent=2) + "\n"


def cmd_constants(cfg: CliConfig):
    c = dimension_constants(cfg.dimension, cfg.tolerance)
    record = c.to_dict()
    record.update({"escape_sphere": c.escape_sphere, "x0_D": c.x0_D})
    budget = {"gamma_abs_error": c.gamma_error, "tolerance": cfg.tolerance,
              "method": "one-dimensional Bessel integral, adaptive quadrature"}
    if cfg.format == "csv":
        rows = [(k, v) for k, v in record.items()] + [("gamma_abs_error", c.gamma_error)]
        return _csv_text(("name", "value"), rows), EXIT_OK
    return _json_text({"constants": record, "error_budget": budget}), EXIT_OK


def cmd_pmf(cfg: CliConfig):
    spec = PmfSpec(cfg.kind, dimension_constants(cfg.dimension))
    rows = spec.table(cfg.max_index)
    if cfg.format == "json":
        return _json_text({"kind": cfg.kind, "dimension": cfg.dimension,
                           "rows": [{"k": k, "l": l, "probability": pr} for k, l, pr in rows]}), EXIT_OK
    return _csv_text(("k", "l", "probability"), [(k, "" if l is None else l, pr) for k, l, pr in rows]), EXIT_OK


def cmd_boundary(cfg: CliConfig):
    desc = RateSetDescriptor(cfg.which, dimension_constants(cfg.dimension))
    curve = boundary_curve(desc, cfg.grid)
    marks = extremal_points(desc)
    if cfg.format == "json":
        return _json_text({
            "set": cfg.which, "dimension": cfg.dimension,
            "curve": [{"x": b.x, "y_low": b.y_low, "y_high": b.y_high} for b in curve],
            "landmarks": [{"label": n, "x": x, "y": y} for n, x, y in marks],
        }), EXIT_OK
    main = _csv_text(("x", "y_low", "y_high"), [(b.x, b.y_low, b.y_high) for b in curve])
    side = _csv_text(("label", "x", "y"), marks)
    return (main, side), EXIT_OK


def _simulate_one(task):
    d, horizon, cap, seed, r = task
    board = TallyBoard.from_walk(WalkConfig(d, horizon, seed, r))
    npc = board.new_point_counters()
    lc = board.level_counts()
    row = {
        "replication": r,
        "steps": board.steps_consumed,
        "distinct_sites": board.n_sites,
        "max_local_time": board.max_local_time(),
        "max_sphere_occupation": int(board.neighbour_counts().sum(axis=1).max()),
        "zeta": npc.zeta,
        "nu": npc.nu,
    }
    for k in range(1, 5):
        row[f"Q{k}"] = lc.q.get(k, 0)
    if cap > horizon:
        ext = board.copy()
        done = 0
        for block in direction_blocks(WalkConfig(d, cap, seed, r)):
            lo = max(0, horizon - done)
            if lo < block.size:
                ext.ingest_directions(block[lo:])
            done += block.size
        u = board.level_counts(ext).u
        row["eta"] = board.eta_statistic(ext)
        for k in range(1, 5):
            row[f"U{k}"] = u.get(k, 0)
    return row, (board.to_dict() if r == 0 else None)


def cmd_simulate(cfg: CliConfig):
    cap = cfg.cap if cfg.cap is not None else 4 * cfg.horizon
    tasks = [(cfg.dimension, cfg.horizon, cap, cfg.seed, r) for r in range(cfg.replications)]
    results = mc_lab._map(_simulate_one, tasks, cfg.workers)
    rows = [row for row, _ in results]
    if cfg.snapshot is not None:
        cfg.snapshot.write_text(json.dumps(results[0][1]) + "\n")
    if cfg.format == "csv":
        header = list(rows[0])
        return _csv_text(header, [[row[h] for h in header] for row in rows]), EXIT_OK
    meta = {"dimension": cfg.dimension, "horizon": cfg.horizon, "cap": cap, "seed": cfg.seed}
    return _json_text({"schema": "walklab.simulate/1", "config": meta, "replications": rows}), EXIT_OK


def _plan(cfg: CliConfig, suite: str) -> ExperimentPlan:
    eps = cfg.epsilon
    if eps is None:
        eps = FILLIN_EPSILON if suite == "fillin" else DEFAULT_EPSILON
    cap = cfg.cap
    horizon = cfg.horizon
    if suite == "distributions":
        cap = cap or DISTRIBUTION_CAP
        horizon = min(horizon, cap)
    return ExperimentPlan(name=suite, dimension=cfg.dimension, horizon=horizon, cap=cap,
                          replications=cfg.replications, seed=cfg.seed, epsilon=eps,
                          significance=cfg.significance, workers=cfg.workers)


def run_suite(cfg: CliConfig, suite: str) -> list[mc_lab.ExperimentReport]:
    plan = _plan(cfg, suite)
    if suite == "distributions":
        data = mc_lab.origin_statistics(plan.dimension, plan.cap, plan.replications, plan.seed, plan.workers)
        out = []
        for kind in KINDS:
            named = replace(plan, name=f"distributions/{kind}")
            out.append(mc_lab.run_distribution_check(named, kind, data=data))
        return out
    runner = {
        "levels": mc_lab.run_level_count_check,
        "newpoints": mc_lab.run_newpoint_check,
        "containment": mc_lab.run_containment_check,
        "fillin": mc_lab.run_fillin_check,
    }[suite]
    return [runner(plan)]


def cmd_verify(cfg: CliConfig):
    suites = SUITES[:-1] if cfg.suite == "all" else (cfg.suite,)
    reports = [rep for s in suites for rep in run_suite(cfg, s)]
    return _render_reports(cfg, reports)


def cmd_fillin(cfg: CliConfig):
    return _render_reports(cfg, run_suite(cfg, "fillin"))


def _render_reports(cfg: CliConfig, reports):
    for rep in reports:
        print(f"{rep.plan.name}: {rep.status} ({rep.wall_time:.2f} s)", file=sys.stderr)
        for w in rep.warnings:
            print(f"  warning: {w}", file=sys.stderr)
        for v in rep.hard_failures:
            print(f"  FAIL {v.label}: {v.detail}", file=sys.stderr)
    text = reports_to_csv(reports) if cfg.format == "csv" else reports_to_json(reports)
    status = EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL
    return text, status


COMMANDS = {
    "constants": cmd_constants,
    "pmf": cmd_pmf,
    "boundary": cmd_boundary,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "fillin": cmd_fillin,
}


def _sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".landmarks" + path.suffix)


def dispatch(cfg: CliConfig) -> int:
    validate(cfg)
    text, status = COMMANDS[cfg.subcommand](cfg)
    side = None
    if isinstance(text, tuple):
        text, side = text
    path = resolve_output(cfg)
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)
        if side is not None:
            _sidecar(path).write_text(side)
    return status


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        status = dispatch(config_from_args(args))
    except (ConfigurationError, ValueError) as exc:
        print(f"walklab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"walklab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"walklab: {args.subcommand} finished in {time.perf_counter() - start:.2f} s", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
