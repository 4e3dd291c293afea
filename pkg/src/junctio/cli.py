"""Command-line front end.

Subcommands: solve, junction, converge, simulate, verify. Every run
writes the data files for the requested operation plus a manifest
listing inputs (with content hash), parameters, and outputs. Data files
are deterministic given inputs; only the manifest carries a timestamp.

Exit codes: 1 for configuration problems (bad file, bad expression, bad
flags), 2 for solver non-convergence or failed verification.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .expr import ExprError
from .hjb import Grid, SolverError, ValueField, solve_thermostatic
from .model import ScenarioError, ThermostatConfig, load_scenario, validate_scenario
from .relay import RelayError, RelayState, simulate
from .verify import (
    check_maximal_subsolution,
    check_viscosity,
    cross_check_dpp,
    generate_candidates,
    limit_report_and_field,
    run_convergence,
)

CONFIG_ERROR = 1
FAILURE = 2


@dataclass
class RunManifest:
    """Provenance record for one CLI invocation."""

    command: str
    scenario_path: str
    scenario_hash: str
    parameters: dict
    outputs: list[str] = field(default_factory=list)
    wall_time_s: float = 0.0
    version: str = __version__
    timestamp: str = ""

    def write(self, out_dir):
        path = os.path.join(out_dir, "manifest.json")
        doc = {
            "command": self.command,
            "scenario": {"path": self.scenario_path, "sha256": self.scenario_hash},
            "parameters": self.parameters,
            "outputs": sorted(self.outputs),
            "wall_time_s": round(self.wall_time_s, 3),
            "version": self.version,
            "timestamp": self.timestamp,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _file_hash(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _apply_thread_cap():
    cap = os.environ.get("JUNCTIO_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        raise ScenarioError(f"JUNCTIO_THREADS must be an integer, got {cap!r}")
    try:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except ImportError:  # pragma: no cover
        pass


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_thresholds(args, scenario):
    if args.thresholds:
        pairs = {}
        for item in args.thresholds.split(","):
            key, _, val = item.partition("=")
            pairs[int(key)] = float(val)
        return ThermostatConfig(pairs, order=_parse_order(args))
    if args.epsilon is None:
        raise ScenarioError("need --epsilon or --thresholds")
    if scenario.kind == "twofold":
        return ThermostatConfig.twofold(args.epsilon)
    return ThermostatConfig.threefold(
        args.epsilon, args.epsilon, args.epsilon, order=_parse_order(args)
    )


def _parse_order(args):
    order = getattr(args, "order", None)
    if not order:
        return (1, 2, 3)
    return tuple(int(v) for v in order.split(","))


def _parse_family(text):
    if text == "uniform":
        return "uniform"
    return tuple(int(v) for v in text.split(","))


def _parse_policy(text):
    kind, _, body = text.partition(":")
    if kind == "const":
        return float(body)
    if kind == "permode":
        return {int(k): float(v) for k, _, v in
                (item.partition("=") for item in body.split(","))}
    if kind == "sched":
        return sorted(
            (float(k), float(v))
            for k, _, v in (item.partition("=") for item in body.split(","))
        )
    raise ScenarioError(f"unknown policy {text!r} (use const:, permode:, or sched:)")


def _load_field_csv(path):
    """Read a ValueField back from its CSV export."""
    rows = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:4] != ["branch", "mode", "x", "value"]:
            raise ScenarioError(f"{path}: expected columns branch,mode,x,value")
        for line in fh:
            b, _, x, v = line.strip().split(",")[:4]
            rows.setdefault(int(b), []).append((float(x), float(v)))
    grids = {}
    values = {}
    for b, pts in rows.items():
        pts.sort()
        xs = np.array([p[0] for p in pts])
        steps = np.diff(xs)
        if len(steps) == 0 or np.max(np.abs(steps - steps[0])) > 1e-9 * max(1, abs(steps[0])):
            raise ScenarioError(f"{path}: branch {b} grid is not uniform")
        grids[b] = Grid(float(xs[0]), float(xs[-1]), float(steps[0]), len(xs))
        values[b] = np.array([p[1] for p in pts])
    return ValueField(grids=grids, values=values, metadata={"source": path})


# ---------------------------------------------------------------------------
# Subcommands


def cmd_solve(args):
    scenario = load_scenario(args.scenario)
    manifest = RunManifest(
        command="solve",
        scenario_path=args.scenario,
        scenario_hash=_file_hash(args.scenario),
        parameters={"epsilon": args.epsilon, "thresholds": args.thresholds,
                    "tol": args.tol, "h": args.h},
    )
    os.makedirs(args.out, exist_ok=True)
    config = _parse_thresholds(args, scenario)
    fld = solve_thermostatic(scenario, config, tol=args.tol, h=args.h)
    csv_path = os.path.join(args.out, "field.csv")
    fld.write_csv(csv_path)
    meta_path = os.path.join(args.out, "field.json")
    meta = dict(fld.metadata)
    meta["residual_history"] = [float(r) for r in meta.get("residual_history", [])]
    _write_json(meta_path, meta)
    manifest.outputs += [csv_path, meta_path]
    return manifest


def cmd_junction(args):
    scenario = load_scenario(args.scenario)
    manifest = RunManifest(
        command="junction",
        scenario_path=args.scenario,
        scenario_hash=_file_hash(args.scenario),
        parameters={"mode": args.mode, "h": args.h},
    )
    os.makedirs(args.out, exist_ok=True)
    report, _ = limit_report_and_field(scenario, args.mode, h=args.h)
    path = os.path.join(args.out, "junction.json")
    _write_json(path, report.to_dict())
    manifest.outputs.append(path)
    return manifest


def cmd_converge(args):
    scenario = load_scenario(args.scenario)
    epsilons = [float(v) for v in args.epsilons.split(",")]
    family = _parse_family(args.family)
    manifest = RunManifest(
        command="converge",
        scenario_path=args.scenario,
        scenario_hash=_file_hash(args.scenario),
        parameters={"mode": args.mode, "family": args.family,
                    "epsilons": epsilons, "h": args.h},
    )
    os.makedirs(args.out, exist_ok=True)
    study = run_convergence(scenario, args.mode, epsilons, family=family, h=args.h)
    csv_path = os.path.join(args.out, "study.csv")
    study.write_csv(csv_path)
    json_path = os.path.join(args.out, "study.json")
    study.write_json(json_path)
    manifest.outputs += [csv_path, json_path]
    return manifest


def cmd_simulate(args):
    scenario = load_scenario(args.scenario)
    manifest = RunManifest(
        command="simulate",
        scenario_path=args.scenario,
        scenario_hash=_file_hash(args.scenario),
        parameters={"start_mode": args.start_mode, "start_x": args.start_x,
                    "policy": args.policy, "horizon": args.horizon, "dt": args.dt,
                    "epsilon": args.epsilon, "thresholds": args.thresholds},
    )
    os.makedirs(args.out, exist_ok=True)
    config = _parse_thresholds(args, scenario)
    start = RelayState(mode=args.start_mode, position=args.start_x)
    record = simulate(
        scenario, config, start, _parse_policy(args.policy), args.horizon, args.dt
    )
    csv_path = os.path.join(args.out, "trajectory.csv")
    record.write_csv(csv_path)
    summary_path = os.path.join(args.out, "trajectory.json")
    _write_json(
        summary_path,
        {
            "discounted_cost": record.discounted_cost,
            "horizon": record.horizon,
            "n_switches": len(record.switch_events),
            "switch_events": [list(e) for e in record.switch_events],
        },
    )
    manifest.outputs += [csv_path, summary_path]
    return manifest


def cmd_verify(args):
    scenario = load_scenario(args.scenario)
    manifest = RunManifest(
        command="verify",
        scenario_path=args.scenario,
        scenario_hash=_file_hash(args.scenario),
        parameters={"mode": args.mode, "h": args.h, "field": args.field,
                    "tol": args.tol},
    )
    os.makedirs(args.out, exist_ok=True)
    if args.field:
        fld = _load_field_csv(args.field)
    else:
        _, fld = limit_report_and_field(scenario, args.mode, h=args.h)
    residuals = check_viscosity(scenario, fld)
    h = max(g.step for g in fld.grids.values())
    # robust curvature scale: a corrupted node must inflate the residual,
    # not the tolerance, so use a high percentile instead of the max
    curv = 1.0
    for b in fld.branch_ids():
        V = fld.values[b]
        if len(V) > 2:
            second = np.abs(V[2:] - 2 * V[1:-1] + V[:-2]) / h**2
            curv = max(curv, float(np.percentile(second, 95)))
    tol = args.tol if args.tol is not None else 10 * h * max(1.0, curv / 2)
    interior_ok = max(residuals.interior_residuals.values()) <= tol
    junction_ok = (
        math.isnan(residuals.junction_min)
        or (residuals.junction_min <= tol and residuals.junction_max >= -tol)
    )
    verdicts = []
    if not args.field:
        candidates = generate_candidates(scenario, fld, args.mode)
        verdicts = check_maximal_subsolution(scenario, fld, candidates, args.mode, tol)
    doc = {
        "residuals": residuals.to_dict(),
        "tolerance": tol,
        "interior_ok": bool(interior_ok),
        "junction_ok": bool(junction_ok),
        "candidates": [v.to_dict() for v in verdicts],
    }
    path = os.path.join(args.out, "verify.json")
    _write_json(path, doc)
    manifest.outputs.append(path)
    bad = [v for v in verdicts if v.subsolution_ok and not v.dominated]
    if not interior_ok or not junction_ok or bad:
        raise SolverError(
            f"verification failed: interior_ok={interior_ok} "
            f"junction_ok={junction_ok} undominated={[v.name for v in bad]}"
        )
    return manifest


def build_parser():
    parser = argparse.ArgumentParser(
        prog="junctio",
        description="Optimal control on 1-D networks with a junction via "
        "delayed-thermostat approximation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario JSON file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--h", type=float, default=None, help="grid step override")

    p = sub.add_parser("solve", help="solve the coupled thermostatic system")
    common(p)
    p.add_argument("--epsilon", type=float, default=None, help="uniform threshold")
    p.add_argument("--thresholds", default=None, help="per-branch, e.g. 1=0.1,2=0.1,3=0.01")
    p.add_argument("--order", default=None, help="threefold switching order, e.g. 1,2,3")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("junction", help="closed-form junction report")
    common(p)
    p.add_argument(
        "--mode",
        required=True,
        choices=("twofold", "threefold_uniform", "threefold_nonuniform"),
    )
    p.set_defaults(func=cmd_junction)

    p = sub.add_parser("converge", help="epsilon convergence study")
    common(p)
    p.add_argument(
        "--mode",
        required=True,
        choices=("twofold", "threefold_uniform", "threefold_nonuniform"),
    )
    p.add_argument("--family", default="uniform", help='"uniform" or exponents like 2,1,1')
    p.add_argument("--epsilons", required=True, help="comma list, e.g. 0.2,0.1,0.05")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("simulate", help="integrate one hybrid trajectory")
    common(p)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--thresholds", default=None)
    p.add_argument("--order", default=None)
    p.add_argument("--start-mode", type=int, required=True)
    p.add_argument("--start-x", type=float, required=True)
    p.add_argument("--policy", required=True, help="const:A | permode:1=A,... | sched:t=A,...")
    p.add_argument("--horizon", type=float, default=25.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="viscosity and subsolution checks")
    common(p)
    p.add_argument(
        "--mode",
        default="twofold",
        choices=("twofold", "threefold_uniform", "threefold_nonuniform"),
    )
    p.add_argument("--field", default=None, help="check an exported field CSV instead")
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.time()
    try:
        _apply_thread_cap()
        manifest = args.func(args)
    except (ScenarioError, ExprError, RelayError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE
    manifest.wall_time_s = time.time() - t0
    manifest.timestamp = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    manifest_path = manifest.write(args.out)
    print(manifest_path)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
