"""Pure-pursuit steering and proportional speed control.

Shared by candidate generation, the lane-following predictor, and the
scripted traffic.  All commands are clamped to the kinematic limits so
rolled-out trajectories are feasible by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import (DEFAULT_LIMITS, KinematicLimits, Pose, Trajectory,
                   VehicleState, bicycle_step, normalize_angle)
from ._kernels import track_lane_kernel
from .road import Lane


@dataclass(frozen=True)
class TrackerConfig:
    lookahead_min: float = 3.0    # m
    lookahead_gain: float = 0.5   # s (distance grows with speed)
    # soft gain: when replanning flips between adjacent target speeds the
    # accel step stays small, keeping executed jerk low
    speed_kp: float = 0.6         # 1/s


DEFAULT_TRACKER = TrackerConfig()


def _lane_target(lane: Lane, s_target: float) -> Tuple[float, float]:
    """Point at arc length s_target, extrapolating past the lane end."""
    if s_target <= lane.length:
        x, y, _ = lane.point_at(s_target)
        return x, y
    x, y, h = lane.point_at(lane.length)
    extra = s_target - lane.length
    return x + extra * math.cos(h), y + extra * math.sin(h)


def pure_pursuit_steer(state: VehicleState, lane: Lane, dt: float = 0.1,
                       cfg: TrackerConfig = DEFAULT_TRACKER,
                       limits: KinematicLimits = DEFAULT_LIMITS) -> float:
    """Steering command toward a look-ahead point on the lane.

    Clamped to the steering range and rate-limited against the current
    steering angle.
    """
    ld = max(cfg.lookahead_min, cfg.lookahead_gain * state.v)
    s, _, _ = lane.project(state.x, state.y)
    tx, ty = _lane_target(lane, s + ld)
    dx = tx - state.x
    dy = ty - state.y
    alpha = normalize_angle(math.atan2(dy, dx) - state.phi)
    delta = math.atan2(2.0 * state.wheelbase * math.sin(alpha), ld)
    delta = min(max(delta, -limits.delta_max), limits.delta_max)
    max_change = limits.steer_rate_max * dt
    return min(max(delta, state.delta - max_change), state.delta + max_change)


def speed_accel(v: float, v_target: float,
                cfg: TrackerConfig = DEFAULT_TRACKER,
                limits: KinematicLimits = DEFAULT_LIMITS) -> float:
    a = cfg.speed_kp * (v_target - v)
    return min(max(a, limits.accel_min), limits.accel_max)


def track_lane(state: VehicleState, lane: Lane, n_steps: int, dt: float,
               target_speed: Optional[float] = None,
               speed_targets: Optional[Sequence[float]] = None,
               accel_override: Optional[Sequence[float]] = None,
               cfg: TrackerConfig = DEFAULT_TRACKER,
               limits: KinematicLimits = DEFAULT_LIMITS):
    """Roll the bicycle model along a lane under pure pursuit.

    Longitudinal control comes from exactly one of target_speed (held
    constant), speed_targets (per step), or accel_override (per step).
    Returns (Trajectory, actions list).  The loop runs compiled; it is
    the planner's second hot path after risk evaluation (25 candidates
    per cycle).
    """
    if accel_override is not None:
        ctrl = np.asarray(accel_override, dtype=float)
        is_accel = True
    elif speed_targets is not None:
        ctrl = np.asarray(speed_targets, dtype=float)
        is_accel = False
    else:
        ctrl = np.full(n_steps, float(target_speed))
        is_accel = False
    out_states = np.empty((n_steps, 5))
    out_actions = np.empty((n_steps, 2))
    track_lane_kernel(state.x, state.y, state.phi, state.v, state.delta,
                      state.wheelbase,
                      lane.points, lane._segx, lane._segy,
                      lane._seg_len, lane._cum,
                      ctrl, is_accel,
                      cfg.lookahead_min, cfg.lookahead_gain, cfg.speed_kp,
                      limits.delta_max, limits.accel_min, limits.accel_max,
                      limits.steer_rate_max, dt, out_states, out_actions)
    actions = [(out_actions[k, 0], out_actions[k, 1])
               for k in range(n_steps)]
    return Trajectory.from_array(dt, out_states, state), actions
