"""Geometric primitives, vehicle state, and the kinematic bicycle model.

Everything here is a pure function on immutable value types; the rest of
the package builds on these.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

TAU = 2.0 * math.pi


def normalize_angle(phi: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.remainder(phi, TAU)
    if r <= -math.pi:
        r += TAU
    return r


@dataclass(frozen=True)
class Pose:
    """2D pose: position in meters, heading in radians CCW from +x."""
    x: float
    y: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "phi", normalize_angle(self.phi))


@dataclass(frozen=True)
class KinematicLimits:
    """Actuation bounds shared by the planner, predictors, and simulator."""
    delta_max: float = 0.6          # rad
    accel_min: float = -6.0         # m/s^2
    accel_max: float = 3.0          # m/s^2
    steer_rate_max: float = 0.8     # rad/s


DEFAULT_LIMITS = KinematicLimits()

# Rear-axle reference point; the footprint box sits ahead of it by
# length/2 - rear_overhang.
DEFAULT_REAR_OVERHANG = 0.8


@dataclass(frozen=True)
class VehicleState:
    """Pose, speed, steering, and body dimensions of one agent."""
    pose: Pose
    v: float                 # m/s, >= 0
    delta: float = 0.0       # front steering angle, rad
    wheelbase: float = 2.8   # m
    width: float = 1.8       # m
    length: float = 4.5      # m

    def __post_init__(self):
        if self.v < 0:
            raise ValueError("speed must be non-negative")
        if self.wheelbase <= 0 or self.width <= 0 or self.length <= 0:
            raise ValueError("vehicle dimensions must be positive")

    @property
    def x(self) -> float:
        return self.pose.x

    @property
    def y(self) -> float:
        return self.pose.y

    @property
    def phi(self) -> float:
        return self.pose.phi


@dataclass(frozen=True)
class OrientedBox:
    """Axis-oriented rectangle: center pose plus half dimensions."""
    center: Pose
    half_length: float
    half_width: float

    def __post_init__(self):
        if self.half_length <= 0 or self.half_width <= 0:
            raise ValueError("half dimensions must be positive")

    def corners(self) -> Tuple[Tuple[float, float], ...]:
        c, s = math.cos(self.center.phi), math.sin(self.center.phi)
        out = []
        for dx, dy in ((self.half_length, self.half_width),
                       (self.half_length, -self.half_width),
                       (-self.half_length, -self.half_width),
                       (-self.half_length, self.half_width)):
            out.append((self.center.x + dx * c - dy * s,
                        self.center.y + dx * s + dy * c))
        return tuple(out)


def footprint_box(state: VehicleState,
                  rear_overhang: float = DEFAULT_REAR_OVERHANG) -> OrientedBox:
    """Body rectangle of a vehicle whose pose is the rear axle."""
    ahead = state.length / 2.0 - rear_overhang
    c, s = math.cos(state.phi), math.sin(state.phi)
    center = Pose(state.x + ahead * c, state.y + ahead * s, state.phi)
    return OrientedBox(center, state.length / 2.0, state.width / 2.0)


def _project_interval(corners, ax, ay):
    lo = hi = corners[0][0] * ax + corners[0][1] * ay
    for cx, cy in corners[1:]:
        d = cx * ax + cy * ay
        if d < lo:
            lo = d
        elif d > hi:
            hi = d
    return lo, hi


def boxes_overlap(a: OrientedBox, b: OrientedBox) -> bool:
    """Separating-axis test; boundary contact counts as overlap."""
    dx = b.center.x - a.center.x
    dy = b.center.y - a.center.y
    ra = math.hypot(a.half_length, a.half_width)
    rb = math.hypot(b.half_length, b.half_width)
    if dx * dx + dy * dy > (ra + rb) ** 2:
        return False
    ca = a.corners()
    cb = b.corners()
    for phi in (a.center.phi, a.center.phi + math.pi / 2,
                b.center.phi, b.center.phi + math.pi / 2):
        ax, ay = math.cos(phi), math.sin(phi)
        lo1, hi1 = _project_interval(ca, ax, ay)
        lo2, hi2 = _project_interval(cb, ax, ay)
        if hi1 < lo2 or hi2 < lo1:
            return False
    return True


def bicycle_step(s: VehicleState, accel: float, delta_cmd: float,
                 dt: float, limits: KinematicLimits = DEFAULT_LIMITS) -> VehicleState:
    """One forward-Euler step of the kinematic bicycle model.

    The heading update uses the commanded steering (first-order hold).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not (math.isfinite(accel) and math.isfinite(delta_cmd)):
        raise ValueError("non-finite control input")
    if abs(delta_cmd) > limits.delta_max + 1e-12:
        raise ValueError(f"steering command {delta_cmd} exceeds limit "
                         f"{limits.delta_max}")
    x = s.x + s.v * math.cos(s.phi) * dt
    y = s.y + s.v * math.sin(s.phi) * dt
    phi = normalize_angle(s.phi + (s.v / s.wheelbase) * math.tan(delta_cmd) * dt)
    v = max(0.0, s.v + accel * dt)
    return VehicleState(Pose(x, y, phi), v, delta_cmd,
                        s.wheelbase, s.width, s.length)


class Trajectory:
    """Fixed-timestep state sequence; index 0 is current time + dt.

    Backed by an (n, 5) array of x, y, phi, v, delta rows; the
    VehicleState view is built on first access.  The planner rolls out
    dozens of candidates per cycle and scores them numerically, so most
    trajectories never need per-state objects.
    """

    def __init__(self, dt: float, states: Sequence[VehicleState] = (), *,
                 array=None, dims: Tuple[float, float, float] = None):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.dt = dt
        if array is not None:
            if dims is None:
                raise ValueError("array form needs (wheelbase, width, length)")
            self._arr = np.asarray(array, dtype=float)
            self._dims = dims
            self._states = None
        else:
            self._states = tuple(states)
            self._arr = None
            self._dims = None

    @classmethod
    def from_array(cls, dt: float, array,
                   template: VehicleState) -> "Trajectory":
        """Wrap an (n, 5) state array; body dimensions come from template."""
        return cls(dt, array=array,
                   dims=(template.wheelbase, template.width, template.length))

    @property
    def states(self) -> Tuple[VehicleState, ...]:
        if self._states is None:
            wb, wd, ln = self._dims
            self._states = tuple(
                VehicleState(Pose(r[0], r[1], r[2]), r[3], r[4], wb, wd, ln)
                for r in self._arr)
        return self._states

    @property
    def wheelbase(self) -> float:
        if self._dims is not None:
            return self._dims[0]
        return self._states[0].wheelbase

    def state_array(self):
        """(n, 5) array of x, y, phi, v, delta rows (cached)."""
        if self._arr is None:
            self._arr = np.array([(st.x, st.y, st.phi, st.v, st.delta)
                                  for st in self._states])
        return self._arr

    def __len__(self) -> int:
        if self._states is not None:
            return len(self._states)
        return self._arr.shape[0]

    def __getitem__(self, i) -> VehicleState:
        return self.states[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.dt == other.dt and
                np.array_equal(self.state_array(), other.state_array()))

    def check_feasible(self, start: VehicleState,
                       limits: KinematicLimits = DEFAULT_LIMITS,
                       tol: float = 1e-6) -> bool:
        """Consecutive states stay within accel and steering-rate bounds."""
        arr = self.state_array()
        v = np.concatenate(([start.v], arr[:, 3]))
        d = np.concatenate(([start.delta], arr[:, 4]))
        dv = np.diff(v)
        lo = limits.accel_min * self.dt - tol
        hi = limits.accel_max * self.dt + tol
        # speed floor at zero allows smaller decrements than accel_min*dt
        if np.any(dv > hi) or np.any((dv < lo) & (arr[:, 3] > tol)):
            return False
        if np.any(np.abs(np.diff(d)) > limits.steer_rate_max * self.dt + tol):
            return False
        return not np.any(np.abs(arr[:, 4]) > limits.delta_max + tol)


def rollout(s: VehicleState, actions: Sequence[Tuple[float, float]],
            dt: float, limits: KinematicLimits = DEFAULT_LIMITS) -> Trajectory:
    """Apply a sequence of (accel, steering) commands through bicycle_step."""
    if len(actions) == 0:
        raise ValueError("action sequence must be non-empty")
    states = []
    cur = s
    for accel, delta_cmd in actions:
        cur = bicycle_step(cur, accel, delta_cmd, dt, limits)
        states.append(cur)
    return Trajectory(dt, tuple(states))
