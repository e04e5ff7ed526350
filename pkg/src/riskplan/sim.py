"""Deterministic scenario micro-simulator with scripted traffic.

Scenarios come from versioned JSON files: lane polylines, an ego spawn
and goal region, and scripted human-driven vehicles that follow their
lanes with pure pursuit and the Intelligent Driver Model.  Given the same
config and seed, every episode is bit-for-bit reproducible.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import (DEFAULT_LIMITS, KinematicLimits, Pose, VehicleState,
                   bicycle_step, boxes_overlap, footprint_box)
from .controllers import pure_pursuit_steer
from .prediction import HISTORY_LEN, AgentHistory
from .planner import PlanSnapshot
from .riskfield import DEFAULT_GRID_RESOLUTION
from .rng import Xoshiro256StarStar
from .road import DrivableGridCache, Lane, RoadMap, resample_polyline

EGO_ID = 0
DT = 0.1
SCHEMA_VERSION = 1
NEAREST_HDVS = 5
OBSERVE_WINDOW = 160.0   # m, road clip radius around the ego


class ScenarioConfigError(ValueError):
    """Malformed scenario file; the message names the offending field."""


@dataclass(frozen=True)
class IdmParams:
    time_headway: float = 1.5    # s
    max_accel: float = 2.0       # m/s^2
    comfort_decel: float = 2.5   # m/s^2
    min_gap: float = 2.0         # m
    exponent: float = 4.0


@dataclass
class HdvSpawn:
    lane: int
    s: float                 # arc length along the lane, m
    speed: float             # m/s; also the IDM desired speed


@dataclass
class ScenarioConfig:
    name: str
    road: RoadMap
    ego_spawn: Tuple[float, float, float, float]   # x, y, phi, v
    route_lane: int
    goal_polygon: np.ndarray                        # (N, 2)
    v_limit: float
    hdv_spawns: List[HdvSpawn]
    max_steps: int
    spawn_jitter: float = 0.0       # m, along-lane
    speed_jitter: float = 0.0       # m/s
    grid_resolution: float = DEFAULT_GRID_RESOLUTION
    grid_width: float = 120.0
    grid_height: float = 80.0


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise ScenarioConfigError(f"missing field '{where}{key}'")
    return obj[key]


def load_scenario(path: str) -> ScenarioConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioConfigError(f"invalid JSON in {path}: {e}") from e
    return parse_scenario(raw)


def parse_scenario(raw: dict) -> ScenarioConfig:
    version = _require(raw, "schema_version", "")
    if version != SCHEMA_VERSION:
        raise ScenarioConfigError(
            f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    name = _require(raw, "name", "")
    lanes_raw = _require(raw, "lanes", "")
    if not lanes_raw:
        raise ScenarioConfigError("field 'lanes' must list at least one lane")
    lanes = []
    for i, ln in enumerate(lanes_raw):
        pts = _require(ln, "points", f"lanes[{i}].")
        lanes.append(Lane(resample_polyline(pts),
                          float(ln.get("width", 3.5)),
                          bool(ln.get("traffic", True))))
    ego = _require(raw, "ego", "")
    spawn = _require(ego, "spawn", "ego.")
    if len(spawn) != 4:
        raise ScenarioConfigError("field 'ego.spawn' must be [x, y, phi, v]")
    route_lane = int(_require(ego, "route_lane", "ego."))
    if not (0 <= route_lane < len(lanes)):
        raise ScenarioConfigError("field 'ego.route_lane' out of range")
    goal = np.asarray(_require(ego, "goal", "ego."), dtype=float)
    if goal.ndim != 2 or goal.shape[0] < 3:
        raise ScenarioConfigError("field 'ego.goal' must be a polygon")
    hdvs = []
    for i, h in enumerate(raw.get("hdvs", [])):
        hdvs.append(HdvSpawn(int(_require(h, "lane", f"hdvs[{i}].")),
                             float(_require(h, "s", f"hdvs[{i}].")),
                             float(_require(h, "speed", f"hdvs[{i}]."))))
    jitter = raw.get("jitter", {})
    grid = raw.get("grid", {})
    return ScenarioConfig(
        name=name,
        road=RoadMap(lanes),
        ego_spawn=tuple(float(v) for v in spawn),
        route_lane=route_lane,
        goal_polygon=goal,
        v_limit=float(_require(ego, "v_limit", "ego.")),
        hdv_spawns=hdvs,
        max_steps=int(_require(raw, "max_steps", "")),
        spawn_jitter=float(jitter.get("spawn_s", 0.0)),
        speed_jitter=float(jitter.get("speed", 0.0)),
        grid_resolution=float(grid.get("resolution", DEFAULT_GRID_RESOLUTION)),
        grid_width=float(grid.get("width", 120.0)),
        grid_height=float(grid.get("height", 80.0)),
    )


def point_in_polygon(x: float, y: float, poly: np.ndarray) -> bool:
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xi = x1 + (y - y1) / (y2 - y1) * (x2 - x1)
            if x < xi:
                inside = not inside
    return inside


def idm_accel(v: float, v_desired: float, gap: Optional[float],
              dv: float, params: IdmParams = IdmParams()) -> float:
    """Intelligent Driver Model acceleration.

    gap is the net distance to the leader (None for free road); dv is the
    approach speed v - v_leader.
    """
    free = 1.0 - (v / v_desired) ** params.exponent if v_desired > 0 else 1.0
    if gap is None:
        return params.max_accel * free
    gap = max(gap, 0.1)
    s_star = params.min_gap + max(
        0.0, v * params.time_headway +
        v * dv / (2.0 * math.sqrt(params.max_accel * params.comfort_decel)))
    return params.max_accel * (free - (s_star / gap) ** 2)


@dataclass
class _Agent:
    state: VehicleState
    lane: int
    desired_speed: float
    history: List[VehicleState] = field(default_factory=list)


class World:
    """Mutable episode state; stepping is synchronous in fixed id order."""

    def __init__(self, cfg: ScenarioConfig, seed: int,
                 limits: KinematicLimits = DEFAULT_LIMITS,
                 allow_overlapping_spawns: bool = False,
                 idm: IdmParams = IdmParams(),
                 build_drivable_cache: bool = True):
        self.cfg = cfg
        self.limits = limits
        self.idm = idm
        self.step_index = 0
        self.terminated: Optional[str] = None
        rng = Xoshiro256StarStar(seed)

        x, y, phi, v = cfg.ego_spawn
        self.ego = _Agent(VehicleState(Pose(x, y, phi), v), cfg.route_lane,
                          cfg.v_limit)
        self.hdvs: Dict[int, _Agent] = {}
        for i, spawn in enumerate(cfg.hdv_spawns):
            # jitter draws happen in fixed order: s first, then speed
            s = spawn.s + rng.uniform(-cfg.spawn_jitter, cfg.spawn_jitter)
            speed = max(0.0, spawn.speed +
                        rng.uniform(-cfg.speed_jitter, cfg.speed_jitter))
            lane = cfg.road.lanes[spawn.lane]
            px, py, heading = lane.point_at(s)
            st = VehicleState(Pose(px, py, heading), speed)
            self.hdvs[i + 1] = _Agent(st, spawn.lane, speed)

        boxes = [(EGO_ID, footprint_box(self.ego.state))]
        boxes += [(aid, footprint_box(a.state)) for aid, a in self.hdvs.items()]
        if not allow_overlapping_spawns:
            for i in range(len(boxes)):
                for j in range(i + 1, len(boxes)):
                    if boxes_overlap(boxes[i][1], boxes[j][1]):
                        raise ValueError(
                            f"overlapping spawns: agents {boxes[i][0]} "
                            f"and {boxes[j][0]}")

        for agent in self._all_agents().values():
            agent.history.append(agent.state)
        self.trace: List[Tuple] = []
        self._record_trace()
        # the rasterized drivable region depends only on the scenario, so
        # reuse it across episodes of the same config
        self.drivable_cache = None
        if build_drivable_cache:
            cache = getattr(cfg, "_drivable_cache", None)
            if cache is None or cache.resolution != cfg.grid_resolution:
                cache = DrivableGridCache(cfg.road, cfg.grid_resolution)
                cfg._drivable_cache = cache
            self.drivable_cache = cache

    def _all_agents(self) -> Dict[int, _Agent]:
        out = {EGO_ID: self.ego}
        out.update(self.hdvs)
        return out

    def ego_state(self) -> VehicleState:
        return self.ego.state

    def _record_trace(self):
        for aid in sorted(self._all_agents()):
            st = self._all_agents()[aid].state
            self.trace.append((self.step_index, aid, st.x, st.y, st.phi,
                               st.v, st.delta))

    def _leader(self, aid: int) -> Optional[Tuple[float, float]]:
        """(net gap, leader speed) for the nearest same-lane agent ahead."""
        me = self._all_agents()[aid]
        lane = self.cfg.road.lanes[me.lane]
        s_me, _, _ = lane.project(me.state.x, me.state.y)
        best = None
        for other_id, other in self._all_agents().items():
            if other_id == aid:
                continue
            lat = lane.min_distance(other.state.x, other.state.y)
            if lat > lane.width / 2.0 + 0.5:
                continue
            s_o, _, _ = lane.project(other.state.x, other.state.y)
            ahead = s_o - s_me
            if ahead <= 0:
                continue
            if best is None or ahead < best[0]:
                gap = ahead - other.state.length
                best = (ahead, gap, other.state.v)
        if best is None:
            return None
        return best[1], best[2]

    def hdv_step(self, aid: int) -> Tuple[float, float]:
        """(accel, steering) command for one scripted vehicle."""
        agent = self.hdvs[aid]
        leader = self._leader(aid)
        if leader is None:
            a = idm_accel(agent.state.v, agent.desired_speed, None, 0.0,
                          self.idm)
        else:
            gap, v_lead = leader
            a = idm_accel(agent.state.v, agent.desired_speed, gap,
                          agent.state.v - v_lead, self.idm)
        a = min(max(a, self.limits.accel_min), self.limits.accel_max)
        delta = pure_pursuit_steer(agent.state, self.cfg.road.lanes[agent.lane],
                                   DT, limits=self.limits)
        return a, delta

    def step(self, ego_action: Tuple[float, float]) -> Optional[str]:
        """Advance one tick; returns the termination reason, if any."""
        if self.terminated is not None:
            raise RuntimeError("cannot step a terminated world")
        hdv_actions = {aid: self.hdv_step(aid) for aid in sorted(self.hdvs)}
        accel, delta_cmd = ego_action
        delta_cmd = min(max(delta_cmd, -self.limits.delta_max),
                        self.limits.delta_max)
        self.ego.state = bicycle_step(self.ego.state, accel, delta_cmd, DT,
                                      self.limits)
        for aid in sorted(self.hdvs):
            a, d = hdv_actions[aid]
            agent = self.hdvs[aid]
            agent.state = bicycle_step(agent.state, a, d, DT, self.limits)
        self.step_index += 1
        for agent in self._all_agents().values():
            agent.history.append(agent.state)
            if len(agent.history) > HISTORY_LEN:
                agent.history.pop(0)
        self._record_trace()

        ego_box = footprint_box(self.ego.state)
        for agent in self.hdvs.values():
            if boxes_overlap(ego_box, footprint_box(agent.state)):
                self.terminated = "collision"
                return self.terminated
        if point_in_polygon(ego_box.center.x, ego_box.center.y,
                            self.cfg.goal_polygon):
            self.terminated = "success"
            return self.terminated
        if not self.cfg.road.is_drivable(ego_box.center.x, ego_box.center.y):
            self.terminated = "off_road"
            return self.terminated
        if self.step_index >= self.cfg.max_steps:
            self.terminated = "timeout"
            return self.terminated
        return None

    def observe(self) -> PlanSnapshot:
        """Snapshot for the planner: the NEAREST_HDVS closest vehicles with
        zero-padded histories, and the road clipped to the window."""
        ex, ey = self.ego.state.x, self.ego.state.y
        order = sorted(self.hdvs,
                       key=lambda aid: (math.hypot(self.hdvs[aid].state.x - ex,
                                                   self.hdvs[aid].state.y - ey),
                                        aid))
        nearest = order[:NEAREST_HDVS]
        histories = tuple(AgentHistory(aid, tuple(self.hdvs[aid].history))
                          for aid in nearest)
        road = self._clipped_road(ex, ey)
        route = self.cfg.road.lanes[self.cfg.route_lane]
        gx = float(np.mean(self.cfg.goal_polygon[:, 0]))
        gy = float(np.mean(self.cfg.goal_polygon[:, 1]))
        return PlanSnapshot(self.ego.state, histories, road, route, (gx, gy))

    def _clipped_road(self, ex: float, ey: float) -> RoadMap:
        lanes = []
        for lane in self.cfg.road.lanes:
            pts = lane.points
            near = (np.abs(pts[:, 0] - ex) <= OBSERVE_WINDOW) & \
                   (np.abs(pts[:, 1] - ey) <= OBSERVE_WINDOW)
            if near.any():
                lanes.append(lane)
        return RoadMap(lanes) if lanes else self.cfg.road


def build_scenario(cfg: ScenarioConfig, seed: int, **kwargs) -> World:
    """Deterministic world for (config, seed)."""
    return World(cfg, seed, **kwargs)
