"""Pluggable predictors for surrounding vehicles.

All predictors share one interface: agent histories + road map (+
optionally the ego's planned trajectory) in, a PredictionSet of
fixed-length future trajectories out.  A learned model can be dropped in
behind the same interface without touching risk evaluation or planning.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (DEFAULT_LIMITS, KinematicLimits, Pose, Trajectory,
                   VehicleState, bicycle_step, footprint_box, boxes_overlap)
from .controllers import DEFAULT_TRACKER, TrackerConfig, track_lane
from .road import Lane, RoadMap

HISTORY_LEN = 10        # past steps kept per agent (1 s at 0.1 s)
HORIZON = 30            # predicted steps (3 s at 0.1 s)
DT = 0.1

LANE_CAPTURE = 5.0      # m, lateral distance for lane association
FORK_SOFTMAX_TEMPERATURE = 0.5
YIELD_WINDOW = 2.0      # s, conflicts inside it trigger yielding
YIELD_DECEL = 2.5       # m/s^2


@dataclass(frozen=True)
class AgentHistory:
    """Up to HISTORY_LEN past states; missing oldest entries are None.

    states is chronological and its last entry is the current state.
    """
    agent_id: int
    states: Tuple[Optional[VehicleState], ...]

    def __post_init__(self):
        states = tuple(self.states)
        if len(states) > HISTORY_LEN:
            states = states[-HISTORY_LEN:]
        pad = HISTORY_LEN - len(states)
        states = (None,) * pad + states
        # padding may only sit at the oldest end
        seen_real = False
        for st in states:
            if st is None and seen_real:
                raise ValueError("history padding only allowed at oldest end")
            seen_real = seen_real or st is not None
        object.__setattr__(self, "states", states)

    @property
    def current(self) -> Optional[VehicleState]:
        return self.states[-1]

    @property
    def is_empty(self) -> bool:
        return self.current is None


@dataclass(frozen=True)
class PredictionMode:
    trajectory: Trajectory
    weight: float


@dataclass(frozen=True)
class PredictionSet:
    """Per-agent multimodal predicted trajectories; weights sum to 1."""
    modes: Dict[int, Tuple[PredictionMode, ...]]

    def __post_init__(self):
        for aid, ms in self.modes.items():
            if not ms:
                raise ValueError(f"agent {aid} has no prediction modes")
            w = sum(m.weight for m in ms)
            if abs(w - 1.0) > 1e-9:
                raise ValueError(f"agent {aid} mode weights sum to {w}")
            for m in ms:
                if len(m.trajectory) != HORIZON:
                    raise ValueError("prediction length must equal horizon")

    def agent_ids(self) -> List[int]:
        return sorted(self.modes)


def _check_histories(histories: Sequence[AgentHistory]):
    for h in histories:
        if h.is_empty:
            raise ValueError(f"agent {h.agent_id} has an empty history")


def predict_cv(histories: Sequence[AgentHistory], road: RoadMap,
               ego_plan: Optional[Trajectory] = None) -> PredictionSet:
    """Constant speed and heading, single mode per agent."""
    _check_histories(histories)
    modes = {}
    for h in sorted(histories, key=lambda h: h.agent_id):
        cur = h.current
        states = []
        x, y = cur.x, cur.y
        dx = cur.v * math.cos(cur.phi) * DT
        dy = cur.v * math.sin(cur.phi) * DT
        for _ in range(HORIZON):
            x += dx
            y += dy
            states.append(VehicleState(Pose(x, y, cur.phi), cur.v, 0.0,
                                       cur.wheelbase, cur.width, cur.length))
        traj = Trajectory(DT, tuple(states))
        modes[h.agent_id] = (PredictionMode(traj, 1.0),)
    return PredictionSet(modes)


def _fork_weights(cur: VehicleState, road: RoadMap,
                  lane_ids: Sequence[int]) -> List[float]:
    """Softmax over heading alignment with each candidate lane."""
    scores = []
    for i in lane_ids:
        s, _, heading = road.lanes[i].project(cur.x, cur.y)
        scores.append(math.cos(heading - cur.phi))
    t = FORK_SOFTMAX_TEMPERATURE
    mx = max(scores)
    exps = [math.exp((sc - mx) / t) for sc in scores]
    z = sum(exps)
    return [e / z for e in exps]


def predict_lane_follow(histories: Sequence[AgentHistory], road: RoadMap,
                        ego_plan: Optional[Trajectory] = None) -> PredictionSet:
    """Pure-pursuit continuation along nearby lanes at current speed.

    Each lane within the capture distance becomes one mode; weights come
    from heading alignment.  Agents off every lane fall back to constant
    velocity.
    """
    _check_histories(histories)
    modes: Dict[int, Tuple[PredictionMode, ...]] = {}
    for h in sorted(histories, key=lambda h: h.agent_id):
        cur = h.current
        lane_ids = road.lanes_within(cur.x, cur.y, LANE_CAPTURE)
        if not lane_ids:
            modes[h.agent_id] = predict_cv([h], road).modes[h.agent_id]
            continue
        weights = _fork_weights(cur, road, lane_ids)
        ms = []
        for lane_id, w in zip(lane_ids, weights):
            traj, _ = track_lane(cur, road.lanes[lane_id], HORIZON, DT,
                                 target_speed=cur.v)
            ms.append(PredictionMode(traj, w))
        modes[h.agent_id] = tuple(ms)
    return PredictionSet(modes)


def _first_conflict_step(mode: PredictionMode, ego_plan: Trajectory) -> Optional[int]:
    n_window = min(int(round(YIELD_WINDOW / DT)), len(ego_plan),
                   len(mode.trajectory))
    for t in range(n_window):
        if boxes_overlap(footprint_box(mode.trajectory[t]),
                         footprint_box(ego_plan[t])):
            return t
    return None


def _braked_mode(h: AgentHistory, mode: PredictionMode, lane: Optional[Lane],
                 road: RoadMap, t_start: int) -> PredictionMode:
    """Re-integrate a mode with a braking speed profile from t_start on."""
    cur = h.current
    targets = []
    v = cur.v
    for t in range(HORIZON):
        if t >= t_start:
            v = max(0.0, v - YIELD_DECEL * DT)
        targets.append(v)
    if lane is None:
        # constant-heading agent: integrate the braked profile directly
        states = []
        x, y, vv = cur.x, cur.y, cur.v
        for t in range(HORIZON):
            a = (targets[t] - vv) / DT
            x += vv * math.cos(cur.phi) * DT
            y += vv * math.sin(cur.phi) * DT
            vv = targets[t]
            states.append(VehicleState(Pose(x, y, cur.phi), vv, 0.0,
                                       cur.wheelbase, cur.width, cur.length))
        return PredictionMode(Trajectory(DT, tuple(states)), mode.weight)
    accel = []
    v = cur.v
    for t in range(HORIZON):
        accel.append((targets[t] - v) / DT)
        v = targets[t]
    traj, _ = track_lane(cur, lane, HORIZON, DT, accel_override=accel)
    return PredictionMode(traj, mode.weight)


def predict_interactive(histories: Sequence[AgentHistory], road: RoadMap,
                        ego_plan: Trajectory) -> PredictionSet:
    """Lane following plus an analytic yielding heuristic.

    Modes whose footprints would meet the ego plan within the yield
    window brake at YIELD_DECEL from the first conflicting step onward;
    mode weights are unchanged.
    """
    if ego_plan is None:
        raise ValueError("interactive prediction requires the ego plan")
    base = predict_lane_follow(histories, road)
    by_id = {h.agent_id: h for h in histories}
    out: Dict[int, Tuple[PredictionMode, ...]] = {}
    for aid in base.agent_ids():
        h = by_id[aid]
        cur = h.current
        lane_ids = road.lanes_within(cur.x, cur.y, LANE_CAPTURE)
        new_modes = []
        for i, mode in enumerate(base.modes[aid]):
            t0 = _first_conflict_step(mode, ego_plan)
            if t0 is None:
                new_modes.append(mode)
            else:
                lane = road.lanes[lane_ids[i]] if lane_ids else None
                new_modes.append(_braked_mode(h, mode, lane, road, t0))
        out[aid] = tuple(new_modes)
    return PredictionSet(out)


def freeze_predictions(histories: Sequence[AgentHistory]) -> PredictionSet:
    """Static baseline: every agent frozen at its current pose."""
    _check_histories(histories)
    modes = {}
    for h in sorted(histories, key=lambda h: h.agent_id):
        cur = h.current
        # pose frozen across the horizon; speed kept so the cost-map
        # risk level still sees the true speed difference
        frozen = VehicleState(cur.pose, cur.v, 0.0, cur.wheelbase,
                              cur.width, cur.length)
        traj = Trajectory(DT, (frozen,) * HORIZON)
        modes[h.agent_id] = (PredictionMode(traj, 1.0),)
    return PredictionSet(modes)


PREDICTORS = {
    "cv": predict_cv,
    "lane": predict_lane_follow,
    "interactive": predict_interactive,
}
