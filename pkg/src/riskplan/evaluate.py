"""Batch evaluation: episode metrics and scenario x planner reports.

Metrics per episode: success, a time metric (steps plus final distance to
goal), and a humanness cost aggregating obstacle proximity, angular jerk,
linear jerk, and lane-center offset, normalized by the number of vehicles
in the scene.  Lower humanness means smoother, more human-like driving.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import Trajectory, VehicleState
from .costmap import CostMapParams
from .planner import PlannerConfig, default_risk_threshold, replan_loop
from .riskfield import DrfParams
from .rng import mix_seed
from .road import RoadMap
from .sim import EGO_ID, ScenarioConfig, World

D_SAFE = 5.0            # m, proximity threshold for the obstacle term
W_DIST = 1.0            # steps per meter in the time metric


@dataclass(frozen=True)
class HumannessComponents:
    d_ob: float      # summed shortfall below the safe gap
    j_an: float      # angular jerk
    j_in: float      # linear jerk
    l_cen: float     # lane-center offset

    @property
    def total(self) -> float:
        return self.d_ob + self.j_an + self.j_in + self.l_cen


@dataclass(frozen=True)
class EpisodeResult:
    success: bool
    steps: int
    final_goal_distance: float
    humanness: HumannessComponents
    humanness_value: float
    fallback_count: int
    termination: str
    seed: int


def humanness(trace: Sequence[tuple], road: RoadMap,
              n_all: Optional[int] = None,
              d_safe: float = D_SAFE) -> Tuple[float, HumannessComponents]:
    """Humanness cost of one episode trace.

    trace rows are (step, agent_id, x, y, phi, v, delta).  The four
    components sum with unit weights and divide by the number of vehicles
    in the scene.
    """
    by_step: Dict[int, Dict[int, tuple]] = {}
    for row in trace:
        by_step.setdefault(row[0], {})[row[1]] = row
    steps = sorted(by_step)
    if len(steps) < 2:
        raise ValueError("trace must cover at least two steps")
    agent_ids = set()
    for d in by_step.values():
        agent_ids.update(d)
    if n_all is None:
        n_all = len(agent_ids)

    dt = 0.1
    d_ob = 0.0
    phis = []
    vs = []
    l_cen = 0.0
    for k in steps:
        ego = by_step[k][EGO_ID]
        _, _, x, y, phi, v, _ = ego
        phis.append(phi)
        vs.append(v)
        gap = math.inf
        for aid, row in by_step[k].items():
            if aid == EGO_ID:
                continue
            gap = min(gap, math.hypot(row[2] - x, row[3] - y))
        if math.isfinite(gap):
            d_ob += max(0.0, d_safe - gap)
        lane_i = road.nearest_lane(x, y)
        if lane_i is not None:
            _, lat, _ = road.lanes[lane_i].project(x, y)
            l_cen += abs(lat)

    def wrapped_diff(a, b):
        return math.remainder(a - b, 2.0 * math.pi)

    phidot = [wrapped_diff(phis[i + 1], phis[i]) / dt
              for i in range(len(phis) - 1)]
    j_an = sum(abs(phidot[i + 1] - phidot[i]) for i in
               range(len(phidot) - 1)) / dt
    accel = [(vs[i + 1] - vs[i]) / dt for i in range(len(vs) - 1)]
    j_in = sum(abs(accel[i + 1] - accel[i]) for i in
               range(len(accel) - 1)) / dt
    comps = HumannessComponents(d_ob, j_an, j_in, l_cen)
    return comps.total / n_all, comps


def time_metric(result: EpisodeResult, w_dist: float = W_DIST) -> float:
    """Steps taken plus weighted final distance to the goal."""
    return result.steps + w_dist * result.final_goal_distance


def run_episode(cfg: ScenarioConfig, seed: int, planner_cfg: PlannerConfig,
                drf_params: DrfParams = DrfParams(),
                cost_params: CostMapParams = CostMapParams(),
                risk_threshold: Optional[float] = None) -> Tuple[EpisodeResult, World, list]:
    """One seeded episode under the given planner configuration."""
    world = World(cfg, seed)
    try:
        _, logs, termination = replan_loop(world, planner_cfg, drf_params,
                                           cost_params,
                                           risk_threshold=risk_threshold)
    except Exception:
        termination = "planner_error"
        logs = []
    gx = float(np.mean(cfg.goal_polygon[:, 0]))
    gy = float(np.mean(cfg.goal_polygon[:, 1]))
    ego = world.ego_state()
    final_dist = (0.0 if termination == "success"
                  else math.hypot(ego.x - gx, ego.y - gy))
    n_all = 1 + len(cfg.hdv_spawns)
    if termination == "planner_error" and world.step_index < 1:
        h_value, comps = 0.0, HumannessComponents(0.0, 0.0, 0.0, 0.0)
    else:
        h_value, comps = humanness(world.trace, cfg.road, n_all=n_all)
    result = EpisodeResult(
        success=(termination == "success"),
        steps=world.step_index,
        final_goal_distance=final_dist,
        humanness=comps,
        humanness_value=h_value,
        fallback_count=sum(1 for lg in logs if lg.fallback_used),
        termination=termination,
        seed=seed)
    return result, world, logs


@dataclass(frozen=True)
class BatchRow:
    scenario: str
    planner: str
    success_rate: float
    mean_time: float
    mean_humanness: float
    episodes: Tuple[EpisodeResult, ...]


@dataclass(frozen=True)
class BatchReport:
    rows: Tuple[BatchRow, ...]
    base_seed: int
    n_episodes: int


def planner_config_for(cfg: ScenarioConfig, variant: str,
                       predictor: str = "interactive") -> PlannerConfig:
    return PlannerConfig(v_limit=cfg.v_limit, variant=variant,
                         predictor=predictor,
                         grid_resolution=cfg.grid_resolution,
                         grid_width=cfg.grid_width,
                         grid_height=cfg.grid_height)


def run_batch(scenarios: Sequence[ScenarioConfig],
              planners: Sequence[str],
              n_episodes: int,
              base_seed: int,
              predictor: str = "interactive",
              drf_params: DrfParams = DrfParams(),
              cost_params: CostMapParams = CostMapParams()) -> BatchReport:
    """Seeded batch: episode e of scenario s runs with
    mix_seed(base_seed, s.name, e); failures never abort the batch."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be at least 1")
    rows = []
    for cfg in scenarios:
        seeds = [mix_seed(base_seed, cfg.name, e) for e in range(n_episodes)]
        for variant in planners:
            pcfg = planner_config_for(cfg, variant, predictor)
            episodes = []
            threshold = (drf_params.risk_threshold
                         or default_risk_threshold(drf_params, cost_params,
                                                   cfg.grid_resolution))
            for seed in seeds:
                result, _, _ = run_episode(cfg, seed, pcfg, drf_params,
                                           cost_params,
                                           risk_threshold=threshold)
                episodes.append(result)
            n_succ = sum(1 for r in episodes if r.success)
            rows.append(BatchRow(
                scenario=cfg.name,
                planner=variant,
                success_rate=n_succ / n_episodes,
                mean_time=float(np.mean([time_metric(r) for r in episodes])),
                mean_humanness=float(np.mean([r.humanness_value
                                              for r in episodes])),
                episodes=tuple(episodes)))
    return BatchReport(tuple(rows), base_seed, n_episodes)


def report_csv(report: BatchReport) -> str:
    lines = ["scenario,planner,success_rate,mean_time,mean_humanness,"
             "n_episodes,base_seed"]
    for r in report.rows:
        lines.append("{},{},{:.9g},{:.9g},{:.9g},{},{}".format(
            r.scenario, r.planner, r.success_rate, r.mean_time,
            r.mean_humanness, report.n_episodes, report.base_seed))
    return "\n".join(lines) + "\n"


def report_table(report: BatchReport) -> str:
    header = "{:<12} {:<12} {:>9} {:>10} {:>11}".format(
        "scenario", "planner", "success", "time", "humanness")
    lines = [header, "-" * len(header)]
    for r in report.rows:
        lines.append("{:<12} {:<12} {:>8.1%} {:>10.2f} {:>11.3f}".format(
            r.scenario, r.planner, r.success_rate, r.mean_time,
            r.mean_humanness))
    return "\n".join(lines) + "\n"
