"""Objective environment cost map: obstacle stamps plus off-road cost.

Each obstacle contributes a plateau of height C_obs inside its inflated
footprint, decaying as exp(-g^2 / (2 sigma_obs^2)) with the gap g outside
it, truncated to zero beyond OBSTACLE_CUTOFF_SIGMA * sigma_obs.  Cells
outside the drivable region carry C_road.  Per-cell values combine by max
so the nearest threat is neither diluted nor double-counted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import OrientedBox, VehicleState
from .riskfield import GridSpec, RiskGrid
from .road import RoadMap

# Gap beyond which an obstacle stamp is zero by definition, in units of
# sigma_obs (value fraction there < 4e-6). Bounds the stamp support.
OBSTACLE_CUTOFF_SIGMA = 5.0


@dataclass(frozen=True)
class CostMapParams:
    """Magnitudes of the cost-map ingredients (engineering defaults)."""
    c_obs: float = 1.0         # plateau height inside an obstacle footprint
    c_road: float = 0.5        # cost of leaving the drivable region
    sigma_obs: float = 1.0     # m, decay scale of the stamp skirt
    inflation: float = 0.9     # m, footprint inflation (ego half-width)
    w_v: float = 1.0           # risk-level gain on speed difference
    v_ref: float = 10.0        # m/s, speed difference normalization
    d_ref: float = 20.0        # m, risk-level distance decay


CostMap = RiskGrid  # same grid layout; values are cost-units


def risk_level(obstacle_speed: float, ego: VehicleState, distance: float,
               params: CostMapParams = CostMapParams()) -> float:
    """Per-obstacle scale in [1, 2]: faster relative speed and proximity
    raise the obstacle's cost."""
    if distance < 0:
        raise ValueError("distance must be non-negative")
    dv = abs(obstacle_speed - ego.v)
    return 1.0 + params.w_v * min(1.0, dv / params.v_ref) * math.exp(
        -distance / params.d_ref)


def box_gap_grid(box: OrientedBox, inflation: float,
                 X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Distance from each point to the inflated box (0 inside)."""
    c, s = math.cos(box.center.phi), math.sin(box.center.phi)
    dx = X - box.center.x
    dy = Y - box.center.y
    lx = np.abs(dx * c + dy * s) - (box.half_length + inflation)
    ly = np.abs(-dx * s + dy * c) - (box.half_width + inflation)
    return np.hypot(np.maximum(lx, 0.0), np.maximum(ly, 0.0))


def obstacle_stamp_grid(box: OrientedBox, amplitude: float,
                        params: CostMapParams,
                        X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Plateau-plus-Gaussian-skirt stamp evaluated at points."""
    g = box_gap_grid(box, params.inflation, X, Y)
    out = amplitude * np.exp(-(g * g) / (2.0 * params.sigma_obs ** 2))
    out[g > OBSTACLE_CUTOFF_SIGMA * params.sigma_obs] = 0.0
    return out


def build_cost_map(road: RoadMap,
                   obstacles: Sequence[Tuple[OrientedBox, float]],
                   ego: VehicleState,
                   grid_spec: GridSpec,
                   params: CostMapParams = CostMapParams(),
                   drivable: Optional[np.ndarray] = None) -> CostMap:
    """Cost map from current obstacle boxes (with speeds) and the road.

    drivable may carry a precomputed boolean mask for grid_spec's cell
    centers; otherwise it is derived from the road geometry.
    """
    X, Y = grid_spec.cell_centers()
    if drivable is None:
        drivable = road.drivable_mask(X, Y)
    values = np.where(drivable, 0.0, params.c_road)
    for box, speed in obstacles:
        dist = math.hypot(box.center.x - ego.x, box.center.y - ego.y)
        amp = params.c_obs * risk_level(speed, ego, dist, params)
        np.maximum(values, obstacle_stamp_grid(box, amp, params, X, Y),
                   out=values)
    return CostMap(grid_spec, values)
