"""Command-line front door: single episodes, batches, and field exports.

Exit codes: 0 success, 1 configuration error (the message names the
offending field or flag), 2 collision or off-road termination, 3 timeout.
The output directory defaults to ./out, overridable with --out or the
RISKPLAN_OUT environment variable.
"""
from __future__ import annotations

import argparse
import dataclasses
import importlib.resources
import os
import sys
from typing import Dict, Optional, Sequence

from .core import Pose, VehicleState
from .costmap import CostMapParams
from .evaluate import planner_config_for, report_csv, report_table, run_batch
from .gridio import write_cycle_log_csv, write_grid_csv, write_grid_pgm, \
    write_text, write_trace_csv
from .planner import PlannerConfig, VARIANTS, replan_loop
from .prediction import PREDICTORS
from .riskeval import export_sadrf_heatmap
from .riskfield import DrfParams, GridSpec, rasterize
from .sim import ScenarioConfigError, World, load_scenario

BUILTIN_SCENARIOS = ("cruise", "cruise_empty", "left_turn", "merge",
                     "overtake")


class CliError(Exception):
    """Configuration problem; the message names the offending field."""


def _scenario_path(name: str) -> str:
    if os.path.exists(name):
        return name
    stem = name[:-5] if name.endswith(".json") else name
    if stem in BUILTIN_SCENARIOS:
        ref = importlib.resources.files("riskplan") / "scenarios" / f"{stem}.json"
        return str(ref)
    raise CliError(f"--scenario: no file or built-in scenario named {name!r} "
                   f"(built-ins: {', '.join(BUILTIN_SCENARIOS)})")


def _parse_overrides(pairs: Sequence[str]) -> Dict[str, float]:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise CliError(f"--set: expected key=value, got {pair!r}")
        key, _, val = pair.partition("=")
        try:
            out[key.strip()] = float(val)
        except ValueError:
            raise CliError(f"--set {key}: value {val!r} is not a number")
    return out


def _replace_field(obj, name: str, value: float, prefix: str):
    names = {f.name for f in dataclasses.fields(obj)}
    if name not in names:
        raise CliError(f"--set {prefix}.{name}: unknown field "
                       f"(known: {', '.join(sorted(names))})")
    cur = getattr(obj, name)
    if isinstance(cur, int) and not isinstance(cur, bool):
        value = int(value)
    return dataclasses.replace(obj, **{name: value})


def apply_overrides(overrides: Dict[str, float],
                    drf: DrfParams, cost: CostMapParams,
                    planner: PlannerConfig):
    """Layer dotted-path key=value overrides over the defaults.

    Namespaces: drf.*, cost.*, weights.*, planner.* (scalar fields only).
    """
    for key, value in overrides.items():
        ns, _, name = key.partition(".")
        if not name:
            raise CliError(f"--set {key}: expected namespace.field=value")
        if ns == "drf":
            drf = _replace_field(drf, name, value, ns)
        elif ns == "cost":
            cost = _replace_field(cost, name, value, ns)
        elif ns == "weights":
            planner = dataclasses.replace(
                planner, weights=_replace_field(planner.weights, name,
                                                value, ns))
        elif ns == "planner":
            planner = _replace_field(planner, name, value, ns)
        else:
            raise CliError(f"--set {key}: unknown namespace {ns!r} "
                           "(use drf, cost, weights, or planner)")
    return drf, cost, planner


def _out_dir(args) -> str:
    out = args.out or os.environ.get("RISKPLAN_OUT") or "out"
    os.makedirs(out, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = load_scenario(_scenario_path(args.scenario))
    pcfg = planner_config_for(cfg, args.planner, args.predictor)
    drf, cost, pcfg = apply_overrides(_parse_overrides(args.set), DrfParams(),
                                      CostMapParams(), pcfg)
    out = _out_dir(args)
    stem = os.path.join(out, f"{cfg.name}_{args.planner}_seed{args.seed}")

    heatmaps = []
    if args.heatmaps:
        grid_kw = dict(width=pcfg.grid_width, height=pcfg.grid_height,
                       resolution=pcfg.grid_resolution)

        def on_cycle(cycle, snapshot, result):
            if result.predictions is None:
                return
            spec = GridSpec.centered(snapshot.ego.x, snapshot.ego.y,
                                     **grid_kw)
            grid = export_sadrf_heatmap(result.chosen.trajectory,
                                        result.predictions, snapshot.road,
                                        drf, cost, spec, step="sum")
            heatmaps.append((cycle, grid))
    else:
        on_cycle = None

    world = World(cfg, args.seed)
    _, logs, termination = replan_loop(world, pcfg, drf, cost,
                                       on_cycle=on_cycle)
    write_trace_csv(world.trace, stem + "_trace.csv")
    write_cycle_log_csv(logs, stem + "_cycles.csv")
    for cycle, grid in heatmaps:
        write_grid_csv(grid, f"{stem}_heatmap_c{cycle:04d}.csv")
        write_grid_pgm(grid, f"{stem}_heatmap_c{cycle:04d}.pgm")

    print(f"{cfg.name}: {termination} after {world.step_index} steps "
          f"(artifacts under {out})")
    if termination == "success":
        return 0
    if termination in ("collision", "off_road"):
        return 2
    return 3


def cmd_batch(args) -> int:
    scenarios = [load_scenario(_scenario_path(s))
                 for s in args.scenario.split(",")]
    planners = args.planner.split(",")
    for p in planners:
        if p not in VARIANTS:
            raise CliError(f"--planner: unknown variant {p!r}")
    drf, cost, _ = apply_overrides(_parse_overrides(args.set), DrfParams(),
                                   CostMapParams(), PlannerConfig())
    report = run_batch(scenarios, planners, args.episodes, args.seed,
                       predictor=args.predictor, drf_params=drf,
                       cost_params=cost)
    out = _out_dir(args)
    write_text(os.path.join(out, "batch_report.csv"), report_csv(report))
    table = report_table(report)
    write_text(os.path.join(out, "batch_report.txt"), table)
    print(table, end="")
    return 0


def cmd_field(args) -> int:
    if args.v < 0:
        raise CliError("--v: speed must be non-negative")
    drf, _, _ = apply_overrides(_parse_overrides(args.set), DrfParams(),
                                CostMapParams(), PlannerConfig())
    spec = GridSpec.centered(0.0, 0.0, args.grid_width, args.grid_height,
                             args.resolution)
    state = VehicleState(Pose(0.0, 0.0, 0.0), v=args.v, delta=args.delta)
    grid = rasterize(state, drf, spec)
    out = _out_dir(args)
    stem = os.path.join(out, f"field_v{args.v:g}_d{args.delta:g}")
    write_grid_csv(grid, stem + ".csv")
    write_grid_pgm(grid, stem + ".pgm")
    print(f"total mass {grid.total_mass:.9g} -> {stem}.csv/.pgm")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="riskplan",
        description="Risk-field trajectory planning: episodes, batches, "
                    "and field exports.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None,
                        help="output directory (default: $RISKPLAN_OUT or ./out)")
        sp.add_argument("--set", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override a parameter by dotted path, e.g. "
                             "drf.p=0.01 or weights.w_risk=2 (repeatable)")

    run = sub.add_parser("run", help="run one episode")
    run.add_argument("--scenario", required=True,
                     help="scenario file or built-in name")
    run.add_argument("--planner", default="sadrf", choices=VARIANTS)
    run.add_argument("--predictor", default="interactive",
                     choices=sorted(PREDICTORS))
    run.add_argument("--heatmaps", action="store_true",
                     help="export a risk heat map per planning cycle")
    common(run)
    run.set_defaults(func=cmd_run)

    batch = sub.add_parser("batch", help="run a seeded batch and report")
    batch.add_argument("--scenario", required=True,
                       help="comma-separated scenario files or built-ins")
    batch.add_argument("--planner", default="sadrf",
                       help="comma-separated planner variants")
    batch.add_argument("--predictor", default="interactive",
                       choices=sorted(PREDICTORS))
    batch.add_argument("--episodes", type=int, default=10)
    common(batch)
    batch.set_defaults(func=cmd_batch)

    field = sub.add_parser("field",
                           help="rasterize the pure risk field (no obstacles)")
    field.add_argument("--v", type=float, required=True, help="speed, m/s")
    field.add_argument("--delta", type=float, default=0.0,
                       help="steering angle, rad")
    field.add_argument("--resolution", type=float, default=0.5)
    field.add_argument("--grid-width", type=float, default=120.0)
    field.add_argument("--grid-height", type=float, default=80.0)
    common(field)
    field.set_defaults(func=cmd_field)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ScenarioConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
