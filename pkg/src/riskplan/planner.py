"""Sample-filter-score-replan trajectory planning.

Each cycle: sample a lattice of candidate trajectories along the route,
predict surrounding traffic once, discard candidates whose horizon risk
exceeds the admissibility threshold, pick the lowest-cost survivor, and
execute only the first few steps before replanning.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (DEFAULT_LIMITS, KinematicLimits, Trajectory, VehicleState)
from .controllers import DEFAULT_TRACKER, TrackerConfig, track_lane
from .costmap import CostMapParams
from .prediction import (HORIZON, PREDICTORS, AgentHistory, PredictionSet,
                         freeze_predictions, predict_interactive)
from .riskeval import HorizonRisk, RiskEvaluator, step_risk
from .riskfield import (DEFAULT_GRID_HEIGHT, DEFAULT_GRID_RESOLUTION,
                        DEFAULT_GRID_WIDTH, DrfParams, GridSpec)
from .road import DrivableGridCache, Lane, RoadMap

VARIANTS = ("sadrf", "static_drf", "risk_off")


@dataclass(frozen=True)
class ScoreWeights:
    """Lower score wins; risk dominates progress by calibration."""
    w_risk: float = 1.0
    w_prog: float = 0.1
    w_jerk: float = 0.01
    w_center: float = 0.05


@dataclass(frozen=True)
class PlannerConfig:
    offsets: Tuple[float, ...] = (-1.0, -0.5, 0.0, 0.5, 1.0)   # m
    speed_fractions: Tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    v_limit: float = 10.0            # m/s
    horizon: int = HORIZON
    dt: float = 0.1
    k_exec: int = 3                  # steps executed before replanning
    weights: ScoreWeights = ScoreWeights()
    variant: str = "sadrf"
    predictor: str = "interactive"
    grid_resolution: float = DEFAULT_GRID_RESOLUTION
    grid_width: float = DEFAULT_GRID_WIDTH
    grid_height: float = DEFAULT_GRID_HEIGHT

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown planner variant {self.variant!r}")
        if self.predictor not in PREDICTORS:
            raise ValueError(f"unknown predictor {self.predictor!r}")


@dataclass(frozen=True)
class Candidate:
    trajectory: Trajectory
    actions: Tuple[Tuple[float, float], ...]
    lateral_offset: float
    target_speed: float


@dataclass
class CandidateSet:
    candidates: List[Candidate]


@dataclass(frozen=True)
class PlanSnapshot:
    """World view handed to the planner each cycle."""
    ego: VehicleState
    histories: Tuple[AgentHistory, ...]
    road: RoadMap
    route: Lane
    goal: Tuple[float, float]


@dataclass
class PlanResult:
    chosen: Candidate
    score: float
    risk: HorizonRisk
    fallback_used: bool
    candidate_scores: List[float]
    candidate_risks: List[float]
    candidates: CandidateSet
    predictions: Optional[PredictionSet] = None


def sample_candidates(ego: VehicleState, route: Lane, cfg: PlannerConfig,
                      limits: KinematicLimits = DEFAULT_LIMITS,
                      tracker: TrackerConfig = DEFAULT_TRACKER) -> CandidateSet:
    """Lattice of lateral offsets x target speeds tracked by pure pursuit.

    Controller commands are clamped to the kinematic limits, so every
    rolled-out candidate is feasible; a combination is dropped only if the
    rollout fails the feasibility check outright.
    """
    if route.min_distance(ego.x, ego.y) > route.width / 2.0 + 5.0:
        raise ValueError("ego is not within capture distance of the route")
    candidates = []
    for offset in cfg.offsets:
        path = route.offset(offset)
        for frac in cfg.speed_fractions:
            v_target = frac * cfg.v_limit
            traj, actions = track_lane(ego, path, cfg.horizon, cfg.dt,
                                       target_speed=v_target,
                                       cfg=tracker, limits=limits)
            if not traj.check_feasible(ego, limits):
                continue
            candidates.append(Candidate(traj, tuple(actions), offset,
                                        v_target))
    if not candidates:
        raise ValueError("no feasible candidate")
    return CandidateSet(candidates)


def score(candidate: Candidate, risk: HorizonRisk, route: Lane,
          weights: ScoreWeights) -> float:
    """Weighted cost: risk + remaining route length + jerk + centering."""
    arr = candidate.trajectory.state_array()
    s_arr, lat_arr = project_many(route, arr[:, 0], arr[:, 1])
    remaining = max(0.0, route.length - float(s_arr[-1]))
    accels = [a for a, _ in candidate.actions]
    dt = candidate.trajectory.dt
    jerk = sum(abs(accels[i + 1] - accels[i]) for i in
               range(len(accels) - 1)) / dt
    centering = float(np.mean(np.abs(lat_arr)))
    return (weights.w_risk * risk.total + weights.w_prog * remaining +
            weights.w_jerk * jerk + weights.w_center * centering)


def project_many(lane: Lane, xs: np.ndarray, ys: np.ndarray):
    """Vectorized lane projection: arc lengths and signed laterals."""
    px = lane.points[:-1, 0][:, None]
    py = lane.points[:-1, 1][:, None]
    sx = lane._seg[:, 0][:, None]
    sy = lane._seg[:, 1][:, None]
    ll = (lane._seg_len ** 2)[:, None]
    t = np.clip(((xs[None] - px) * sx + (ys[None] - py) * sy) / ll, 0.0, 1.0)
    cx = px + t * sx
    cy = py + t * sy
    d2 = (xs[None] - cx) ** 2 + (ys[None] - cy) ** 2
    idx = np.argmin(d2, axis=0)
    cols = np.arange(len(xs))
    seg_len = lane._seg_len[idx]
    s = lane._cum[idx] + t[idx, cols] * seg_len
    hx = lane._seg[idx, 0] / seg_len
    hy = lane._seg[idx, 1] / seg_len
    lat = -(xs - cx[idx, cols]) * hy + (ys - cy[idx, cols]) * hx
    return s, lat


def default_risk_threshold(drf_params: DrfParams,
                           cost_params: CostMapParams,
                           grid_resolution: float = DEFAULT_GRID_RESOLUTION,
                           reference_speed: float = 10.0) -> float:
    """Admissibility bound anchored to the obstacle plateau.

    Reference configuration: ego driving straight at reference_speed with a
    same-size stopped vehicle centered on the predicted path halfway to the
    look-ahead distance.  The threshold is half that configuration's
    single-step risk, so a candidate spending even one step overlapping an
    obstacle plateau at speed is inadmissible, while grazing skirt contact
    is not.
    """
    from .core import Pose, footprint_box
    ego = VehicleState(Pose(0.0, 0.0, 0.0), reference_speed, 0.0)
    s_mid = reference_speed * drf_params.t_la / 2.0
    obs_state = VehicleState(Pose(s_mid, 0.0, 0.0), 0.0, 0.0)
    # rear-axle offset so the obstacle box center sits exactly at s_mid
    box = footprint_box(obs_state)
    shift = s_mid - box.center.x
    obs_state = VehicleState(Pose(s_mid + shift, 0.0, 0.0), 0.0, 0.0)
    grid = GridSpec.centered(ego.x, ego.y, DEFAULT_GRID_WIDTH,
                             DEFAULT_GRID_HEIGHT, grid_resolution)
    offroad = np.zeros((grid.ny, grid.nx))
    agents = [[(footprint_box(obs_state), 0.0, 1.0)]]
    ref = step_risk(ego, agents, None, drf_params, cost_params, grid,
                    offroad=offroad)
    return 0.5 * ref


def _make_predictions(snapshot: PlanSnapshot, cfg: PlannerConfig,
                      previous_plan: Optional[Trajectory],
                      fallback_plan: Trajectory) -> PredictionSet:
    if not snapshot.histories:
        return PredictionSet({})
    if cfg.variant == "static_drf":
        return freeze_predictions(snapshot.histories)
    predictor = PREDICTORS[cfg.predictor]
    if cfg.predictor == "interactive":
        ego_plan = previous_plan if previous_plan is not None else fallback_plan
        return predictor(snapshot.histories, snapshot.road, ego_plan)
    return predictor(snapshot.histories, snapshot.road)


def plan(snapshot: PlanSnapshot,
         cfg: PlannerConfig,
         drf_params: DrfParams,
         cost_params: CostMapParams = CostMapParams(),
         previous_plan: Optional[Trajectory] = None,
         limits: KinematicLimits = DEFAULT_LIMITS,
         drivable_cache: Optional[DrivableGridCache] = None,
         risk_threshold: Optional[float] = None) -> PlanResult:
    """One planning cycle.

    Predictions are computed once and shared across candidates; the
    interactive predictor is conditioned on the previous cycle's chosen
    plan (the centered full-speed candidate on the first cycle).  When the
    variant ignores risk entirely (w_risk = 0 and an infinite threshold),
    risk evaluation is skipped and logged as zero.
    """
    cands = sample_candidates(snapshot.ego, snapshot.route, cfg, limits)
    if risk_threshold is None:
        risk_threshold = drf_params.risk_threshold
        if risk_threshold is None:
            risk_threshold = default_risk_threshold(
                drf_params, cost_params, cfg.grid_resolution)
    weights = cfg.weights
    if cfg.variant == "risk_off":
        weights = ScoreWeights(0.0, weights.w_prog, weights.w_jerk,
                               weights.w_center)
        risk_threshold = math.inf

    # centered candidate with the highest target speed, for conditioning
    centered = min(cands.candidates,
                   key=lambda c: (abs(c.lateral_offset), -c.target_speed))

    predictions = _make_predictions(snapshot, cfg, previous_plan,
                                    centered.trajectory)

    skip_risk = weights.w_risk == 0.0 and math.isinf(risk_threshold)
    if skip_risk:
        zero = HorizonRisk.from_steps(np.zeros(cfg.horizon))
        risks = [zero for _ in cands.candidates]
    else:
        grid = GridSpec.centered(snapshot.ego.x, snapshot.ego.y,
                                 cfg.grid_width, cfg.grid_height,
                                 cfg.grid_resolution)
        offroad = None
        if drivable_cache is not None:
            drivable = drivable_cache.window(grid.x0, grid.y0,
                                             grid.nx, grid.ny)
            offroad = np.where(drivable, 0.0, cost_params.c_road)
        evaluator = RiskEvaluator(predictions, snapshot.road, drf_params,
                                  cost_params, grid, cfg.horizon, offroad)
        risks = [evaluator.evaluate(c.trajectory) for c in cands.candidates]

    scores = [score(c, r, snapshot.route, weights)
              for c, r in zip(cands.candidates, risks)]

    best_i = None
    for i, (c, r) in enumerate(zip(cands.candidates, risks)):
        if r.total <= risk_threshold:
            if best_i is None or scores[i] < scores[best_i]:
                best_i = i
    fallback = best_i is None
    if fallback:
        # maximal-braking candidates, minimum risk among them
        min_speed = min(c.target_speed for c in cands.candidates)
        pool = [i for i, c in enumerate(cands.candidates)
                if c.target_speed == min_speed]
        best_i = min(pool, key=lambda i: risks[i].total)

    return PlanResult(cands.candidates[best_i], scores[best_i],
                      risks[best_i], fallback,
                      scores, [r.total for r in risks], cands, predictions)


@dataclass
class CycleLog:
    cycle: int
    lateral_offset: float
    target_speed: float
    score: float
    risk_total: float
    fallback_used: bool


def replan_loop(world, cfg: PlannerConfig, drf_params: DrfParams,
                cost_params: CostMapParams = CostMapParams(),
                limits: KinematicLimits = DEFAULT_LIMITS,
                risk_threshold: Optional[float] = None,
                on_cycle=None):
    """Receding-horizon loop: plan, execute k_exec steps, repeat.

    world provides observe() -> PlanSnapshot, step(action) -> termination,
    and a drivable_cache attribute (may be None).  Returns (executed
    Trajectory, [CycleLog], termination reason).  on_cycle, if given, is
    called with (cycle, snapshot, PlanResult) after each planning pass.
    """
    if risk_threshold is None:
        risk_threshold = drf_params.risk_threshold
        if risk_threshold is None:
            risk_threshold = default_risk_threshold(
                drf_params, cost_params, cfg.grid_resolution)
    executed = []
    logs = []
    previous_plan = None
    termination = None
    cycle = 0
    while termination is None:
        snapshot = world.observe()
        result = plan(snapshot, cfg, drf_params, cost_params,
                      previous_plan=previous_plan, limits=limits,
                      drivable_cache=getattr(world, "drivable_cache", None),
                      risk_threshold=risk_threshold)
        if on_cycle is not None:
            on_cycle(cycle, snapshot, result)
        logs.append(CycleLog(cycle, result.chosen.lateral_offset,
                             result.chosen.target_speed, result.score,
                             result.risk.total, result.fallback_used))
        for k in range(min(cfg.k_exec, len(result.chosen.actions))):
            termination = world.step(result.chosen.actions[k])
            executed.append(world.ego_state())
            if termination is not None:
                break
        previous_plan = result.chosen.trajectory
        cycle += 1
    return Trajectory(cfg.dt, tuple(executed)), logs, termination
