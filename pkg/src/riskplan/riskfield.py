"""Subjective driving risk field along the vehicle's predicted arc.

The field places a Gaussian cross-section on every point of the circular
path the vehicle would follow at its current steering angle.  Height
decays parabolically with arc length and vanishes at the look-ahead
distance v*t_la; width grows linearly with arc length and is asymmetric
between the side facing the rotation center (inner) and the far side
(outer).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import Pose, VehicleState

# Steering magnitudes below this are treated as straight driving; the
# resulting arc radius would exceed ~3000 m, indistinguishable from a
# line over any look-ahead distance at grid resolution.
STRAIGHT_DELTA = 1e-3

# Lateral support cutoff, in units of the local cross-section sigma.
# Beyond it the field is zero by definition (peak fraction < 4e-6);
# this bounds the support so evaluation cost stays proportional to the
# field's footprint rather than the whole grid.
LATERAL_CUTOFF_SIGMA = 5.0

# Absolute lateral support cap, meters.  At large steering angles the
# outer sigma grows past the road scale and 5*sigma would cover entire
# grids; the field is defined as zero beyond this offset regardless of
# sigma.  Total mass still grows strictly with sigma inside a fixed
# window, so the expansion ordering in v and |delta| is preserved.
LATERAL_CUTOFF_MAX = 15.0


@dataclass(frozen=True)
class DrfParams:
    """Risk-field shape parameters plus the planner's admissibility bound."""
    p: float = 0.0064            # parabola steepness, 1/m^2
    t_la: float = 3.5            # look-ahead time, s
    c: float = 0.5               # width at the vehicle (car width / 4), m
    m_slope: float = 0.05        # straight-driving widening slope
    k1: float = 0.5              # inner-edge widening gain
    k2: float = 1.38             # outer-edge widening gain
    risk_threshold: Optional[float] = None  # None: calibrate at startup

    def __post_init__(self):
        if self.p < 0 or self.t_la <= 0 or self.c <= 0 or self.m_slope < 0:
            raise ValueError("invalid risk-field parameters")
        if self.risk_threshold is not None and self.risk_threshold <= 0:
            raise ValueError("risk_threshold must be positive")


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned 2D grid; origin is the lower-left cell corner."""
    x0: float
    y0: float
    resolution: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.nx <= 0 or self.ny <= 0:
            raise ValueError("grid must have at least one cell")

    @property
    def cell_area(self) -> float:
        return self.resolution * self.resolution

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """(X, Y) arrays of shape (ny, nx)."""
        xs = self.x0 + (np.arange(self.nx) + 0.5) * self.resolution
        ys = self.y0 + (np.arange(self.ny) + 0.5) * self.resolution
        return np.meshgrid(xs, ys)

    @classmethod
    def centered(cls, cx: float, cy: float, width: float, height: float,
                 resolution: float, snap: bool = True) -> "GridSpec":
        """Grid window centered on a point.

        With snap=True the origin lands on a multiple of the resolution so
        grids built around nearby centers share exact cell-center
        coordinates (lets cost-map layers be cached and sliced).
        """
        nx = max(1, int(round(width / resolution)))
        ny = max(1, int(round(height / resolution)))
        x0 = cx - nx * resolution / 2.0
        y0 = cy - ny * resolution / 2.0
        if snap:
            x0 = math.floor(x0 / resolution) * resolution
            y0 = math.floor(y0 / resolution) * resolution
        return cls(x0, y0, resolution, nx, ny)


# Default evaluation window: covers the 52.5 m look-ahead at 15 m/s plus
# lateral margin at about 38k cells.
DEFAULT_GRID_RESOLUTION = 0.5
DEFAULT_GRID_WIDTH = 120.0
DEFAULT_GRID_HEIGHT = 80.0


def default_grid(ego: VehicleState) -> GridSpec:
    return GridSpec.centered(ego.x, ego.y, DEFAULT_GRID_WIDTH,
                             DEFAULT_GRID_HEIGHT, DEFAULT_GRID_RESOLUTION)


@dataclass(frozen=True)
class RiskGrid:
    """Rasterized scalar field over a GridSpec; values (ny, nx), >= 0."""
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.spec.ny, self.spec.nx):
            raise ValueError("values shape does not match grid spec")
        object.__setattr__(self, "values", v)

    @property
    def total_mass(self) -> float:
        """Sum of cell values times cell area."""
        return float(np.sum(self.values)) * self.spec.cell_area


@dataclass(frozen=True)
class ArcPath:
    """Predicted path: circular arc (or line) of length v*t_la."""
    start: Pose
    s_max: float
    signed_radius: float = math.inf      # +inf for straight; sign = turn side
    center: Optional[Tuple[float, float]] = None

    @property
    def straight(self) -> bool:
        return self.center is None


def arc_path(s: VehicleState, params: DrfParams) -> ArcPath:
    """Path the vehicle follows at fixed steering: R = wheelbase / tan(delta).

    The rotation center sits perpendicular to the heading at the rear
    axle, offset by R on the turn side.  |delta| below STRAIGHT_DELTA
    resolves to a straight path (absorbs the tan singularity).
    """
    s_max = s.v * params.t_la
    if abs(s.delta) < STRAIGHT_DELTA:
        return ArcPath(s.pose, s_max)
    radius = s.wheelbase / math.tan(s.delta)   # signed: + means turn left
    cx = s.x - radius * math.sin(s.phi)
    cy = s.y + radius * math.cos(s.phi)
    return ArcPath(s.pose, s_max, radius, (cx, cy))


def height_a(s: float, v: float, params: DrfParams) -> float:
    """Parabolic height profile p*(s - v*t_la)^2, zero at the far end."""
    s_la = v * params.t_la
    if s < -1e-12 or s > s_la + 1e-12:
        raise ValueError(f"arc length {s} outside [0, {s_la}]")
    return params.p * (s - s_la) ** 2


def width_sigma(s: float, delta: float, side: str, params: DrfParams) -> float:
    """Cross-section half-width: (m + k_i*|delta|)*s + c.

    side is 'inner' (toward the rotation center; left for straight paths)
    or 'outer'.
    """
    if s < 0:
        raise ValueError("arc length must be non-negative")
    if side == "inner":
        k = params.k1
    elif side == "outer":
        k = params.k2
    else:
        raise ValueError(f"side must be 'inner' or 'outer', got {side!r}")
    return (params.m_slope + k * abs(delta)) * s + params.c


def _path_coordinates(path: ArcPath, X: np.ndarray, Y: np.ndarray):
    """Arc coordinate s, signed deviation d, and inner-side mask.

    d is distance-to-rotation-center minus |R| (signed lateral offset for
    straight paths, positive on the left).  The inner side is toward the
    rotation center; for straight paths inner = left by convention.
    """
    p0 = path.start
    dx = X - p0.x
    dy = Y - p0.y
    if path.straight:
        ch, sh = math.cos(p0.phi), math.sin(p0.phi)
        s = dx * ch + dy * sh
        d = -dx * sh + dy * ch
        inner = d > 0
        return s, d, inner
    cx, cy = path.center
    R = abs(path.signed_radius)
    rx = X - cx
    ry = Y - cy
    r = np.hypot(rx, ry)
    d = r - R
    inner = d < 0
    direction = 1.0 if path.signed_radius > 0 else -1.0
    a0 = math.atan2(p0.y - cy, p0.x - cx)
    ang = (np.arctan2(ry, rx) - a0) * direction
    ang = np.mod(ang, 2.0 * math.pi)
    s = ang * R
    return s, d, inner


def eval_field_grid(state: VehicleState, params: DrfParams,
                    X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Vectorized field evaluation at arbitrary points."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    path = arc_path(state, params)
    out = np.zeros(np.broadcast(X, Y).shape)
    if path.s_max <= 0:
        return out
    s, d, inner = _path_coordinates(path, X, Y)
    s_ok = (s >= 0) & (s <= path.s_max)
    if not np.any(s_ok):
        return out
    k = np.where(inner, params.k1, params.k2)
    sigma = (params.m_slope + k * abs(state.delta)) * s + params.c
    cut = np.minimum(LATERAL_CUTOFF_SIGMA * sigma, LATERAL_CUTOFF_MAX)
    lat_ok = s_ok & (np.abs(d) <= cut)
    if not np.any(lat_ok):
        return out
    a = params.p * (s - path.s_max) ** 2
    g = a * np.exp(-(d * d) / (2.0 * sigma * sigma))
    out[lat_ok] = g[lat_ok]
    return out


def eval_field(state: VehicleState, params: DrfParams,
               point: Tuple[float, float]) -> float:
    """Field value at one point (see eval_field_grid)."""
    return float(eval_field_grid(state, params,
                                 np.array([point[0]]),
                                 np.array([point[1]]))[0])


def rasterize(state: VehicleState, params: DrfParams,
              grid_spec: GridSpec) -> RiskGrid:
    """Evaluate the field at every cell center."""
    X, Y = grid_spec.cell_centers()
    return RiskGrid(grid_spec, eval_field_grid(state, params, X, Y))
