"""Horizon risk: per-step products of the ego risk field and cost maps.

The per-step risk is the grid sum of field(cell) * cost(cell) * cell
area, where the cost map is rebuilt at each future step from the
predicted obstacle poses (stamps weighted by mode probability, expectation
over a single agent's modes, max across agents) and the horizon risk is
the sum over the planning horizon.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels
from .core import (DEFAULT_REAR_OVERHANG, OrientedBox, Trajectory,
                   VehicleState, footprint_box)
from .costmap import (OBSTACLE_CUTOFF_SIGMA, CostMapParams,
                      obstacle_stamp_grid, risk_level)
from .riskfield import (LATERAL_CUTOFF_MAX, LATERAL_CUTOFF_SIGMA,
                        DrfParams, GridSpec, RiskGrid,
                        eval_field_grid)
from .road import RoadMap
from .prediction import PredictionSet

# One agent's predicted occupancy at one step: footprint box, speed, and
# the probability weight of the mode it came from.
AgentStamps = Sequence[Tuple[OrientedBox, float, float]]


@dataclass(frozen=True)
class HorizonRisk:
    total: float
    per_step: np.ndarray
    peak_step: int

    @classmethod
    def from_steps(cls, per_step: np.ndarray) -> "HorizonRisk":
        per_step = np.asarray(per_step, dtype=float)
        return cls(float(np.sum(per_step)), per_step,
                   int(np.argmax(per_step)))


def offroad_layer(road: RoadMap, grid_spec: GridSpec,
                  params: CostMapParams,
                  drivable: Optional[np.ndarray] = None) -> np.ndarray:
    if drivable is None:
        X, Y = grid_spec.cell_centers()
        drivable = road.drivable_mask(X, Y)
    return np.where(drivable, 0.0, params.c_road)


def _cost_grid_at_step(ego_state_t: VehicleState,
                       agents_at_t: Sequence[AgentStamps],
                       grid_spec: GridSpec,
                       cost_params: CostMapParams,
                       offroad: np.ndarray) -> np.ndarray:
    """Cost map for one step: max(off-road, per-agent expected stamps)."""
    X, Y = grid_spec.cell_centers()
    values = offroad.copy()
    for agent in agents_at_t:
        layer = np.zeros_like(values)
        for box, speed, weight in agent:
            dist = math.hypot(box.center.x - ego_state_t.x,
                              box.center.y - ego_state_t.y)
            amp = weight * cost_params.c_obs * risk_level(
                speed, ego_state_t, dist, cost_params)
            layer += obstacle_stamp_grid(box, amp, cost_params, X, Y)
        np.maximum(values, layer, out=values)
    return values


def step_risk(ego_state_t: VehicleState,
              agents_at_t: Sequence[AgentStamps],
              road: RoadMap,
              drf_params: DrfParams,
              cost_params: CostMapParams,
              grid_spec: GridSpec,
              offroad: Optional[np.ndarray] = None) -> float:
    """Grid sum of field * cost * cell area for one step (reference path)."""
    if offroad is None:
        offroad = offroad_layer(road, grid_spec, cost_params)
    if offroad.shape != (grid_spec.ny, grid_spec.nx):
        raise ValueError("off-road layer does not match the grid spec")
    cost = _cost_grid_at_step(ego_state_t, agents_at_t, grid_spec,
                              cost_params, offroad)
    X, Y = grid_spec.cell_centers()
    field = eval_field_grid(ego_state_t, drf_params, X, Y)
    return float(np.sum(field * cost)) * grid_spec.cell_area


class RiskEvaluator:
    """Shared per-cycle state for evaluating many candidates.

    Prepares the predicted obstacle stamps and the off-road layer once,
    then evaluates each candidate trajectory with the compiled kernel.
    """

    def __init__(self, predictions: PredictionSet, road: RoadMap,
                 drf_params: DrfParams, cost_params: CostMapParams,
                 grid_spec: GridSpec, horizon: int,
                 offroad: Optional[np.ndarray] = None):
        self.drf_params = drf_params
        self.cost_params = cost_params
        self.grid_spec = grid_spec
        self.horizon = horizon
        if offroad is None:
            offroad = offroad_layer(road, grid_spec, cost_params)
        if offroad.shape != (grid_spec.ny, grid_spec.nx):
            raise ValueError("off-road layer does not match the grid spec")
        self.offroad = np.ascontiguousarray(offroad, dtype=float)

        T = horizon
        mode_list = [(rank, mode)
                     for rank, aid in enumerate(predictions.agent_ids())
                     for mode in predictions.modes[aid]]
        M = len(mode_list)
        self.stamp_count = np.full(T, M, dtype=np.int64)
        self.stamp_agent = np.zeros((T, max(1, M)), dtype=np.int64)
        self.stamp_geom = np.zeros((T, max(1, M), 7))
        self.stamp_weight = np.zeros((T, max(1, M)))
        self.stamp_speed = np.zeros((T, max(1, M)))
        infl = cost_params.inflation
        cut = OBSTACLE_CUTOFF_SIGMA * cost_params.sigma_obs
        for m, (rank, mode) in enumerate(mode_list):
            arr = mode.trajectory.state_array()
            if arr.shape[0] < T:
                raise ValueError("prediction shorter than the horizon")
            st0 = mode.trajectory[0]
            ahead = st0.length / 2.0 - DEFAULT_REAR_OVERHANG
            ehl = st0.length / 2.0 + infl
            ehw = st0.width / 2.0 + infl
            c = np.cos(arr[:T, 2])
            s = np.sin(arr[:T, 2])
            self.stamp_agent[:, m] = rank
            self.stamp_geom[:, m, 0] = arr[:T, 0] + ahead * c
            self.stamp_geom[:, m, 1] = arr[:T, 1] + ahead * s
            self.stamp_geom[:, m, 2] = c
            self.stamp_geom[:, m, 3] = s
            self.stamp_geom[:, m, 4] = ehl
            self.stamp_geom[:, m, 5] = ehw
            self.stamp_geom[:, m, 6] = math.hypot(ehl, ehw) + cut
            self.stamp_weight[:, m] = mode.weight
            self.stamp_speed[:, m] = arr[:T, 3]

        # Off-road cells, listed once: row-major, px ascending per row,
        # with row offsets so the kernel can restrict to the grid rows a
        # field's support box can touch.
        g = grid_spec
        jj, ii = np.nonzero(self.offroad > 0.0)
        self.off_px = g.x0 + (ii + 0.5) * g.resolution
        self.off_val = self.offroad[jj, ii]
        self.off_ii = ii.astype(np.int64)
        self.off_row_ptr = np.zeros(g.ny + 1, dtype=np.int64)
        np.cumsum(np.bincount(jj, minlength=g.ny), out=self.off_row_ptr[1:])

        # Stamp-neighborhood cells per step: bounding boxes of the stamps
        # (any box rounding only adds cells with zero stamp value).  The
        # mask also tells the kernel which off-road cells are already
        # covered by these lists.
        self.act_mask = np.zeros((T, g.ny, g.nx), dtype=np.uint8)
        starts = np.zeros(T + 1, dtype=np.int64)
        px_parts, py_parts, off_parts = [], [], []
        for t in range(T):
            mask = self.act_mask[t]
            for m in range(M):
                sx, sy, bb = (self.stamp_geom[t, m, 0],
                              self.stamp_geom[t, m, 1],
                              self.stamp_geom[t, m, 6])
                i0 = max(0, int(math.floor((sx - bb - g.x0) / g.resolution
                                           - 0.5)))
                i1 = min(g.nx, int(math.ceil((sx + bb - g.x0) / g.resolution
                                             - 0.5)) + 2)
                j0 = max(0, int(math.floor((sy - bb - g.y0) / g.resolution
                                           - 0.5)))
                j1 = min(g.ny, int(math.ceil((sy + bb - g.y0) / g.resolution
                                             - 0.5)) + 2)
                if i1 > i0 and j1 > j0:
                    mask[j0:j1, i0:i1] = 1
            ajj, aii = np.nonzero(mask)
            starts[t + 1] = starts[t] + ajj.size
            px_parts.append(g.x0 + (aii + 0.5) * g.resolution)
            py_parts.append(g.y0 + (ajj + 0.5) * g.resolution)
            off_parts.append(self.offroad[ajj, aii])
        self.cell_px = np.concatenate(px_parts) if px_parts else np.zeros(0)
        self.cell_py = np.concatenate(py_parts) if py_parts else np.zeros(0)
        self.cell_off = (np.concatenate(off_parts) if off_parts
                         else np.zeros(0))
        self.cell_start = starts
        self.cell_sval = np.zeros((self.cell_px.size, max(1, M)))
        _kernels.stamp_values_kernel(
            self.cell_px, self.cell_py, self.cell_start, starts[1:],
            self.stamp_count, self.stamp_geom, self.stamp_weight,
            cost_params.sigma_obs, OBSTACLE_CUTOFF_SIGMA, self.cell_sval)

        # drop bounding-box cells whose cost is exactly zero (off-road
        # cells always stay, keeping the lists consistent with act_mask)
        nz = (self.cell_off > 0.0) | np.any(self.cell_sval > 0.0, axis=1)
        new_start = np.zeros(T + 1, dtype=np.int64)
        for t in range(T):
            new_start[t + 1] = new_start[t] + int(
                np.count_nonzero(nz[starts[t]:starts[t + 1]]))
        self.cell_px = np.ascontiguousarray(self.cell_px[nz])
        self.cell_py = np.ascontiguousarray(self.cell_py[nz])
        self.cell_off = np.ascontiguousarray(self.cell_off[nz])
        self.cell_sval = np.ascontiguousarray(self.cell_sval[nz])
        self.cell_start = new_start

    def evaluate_states(self, states: np.ndarray,
                        wheelbase: float) -> HorizonRisk:
        """states: (T, 5) rows of x, y, phi, v, delta."""
        if states.shape[0] != self.horizon:
            raise ValueError("candidate length does not match the horizon")
        d = self.drf_params
        cp = self.cost_params
        g = self.grid_spec
        per_step = np.zeros(self.horizon)
        _kernels.horizon_risk_kernel(
            np.ascontiguousarray(states, dtype=float), wheelbase,
            d.p, d.t_la, d.c, d.m_slope, d.k1, d.k2,
            LATERAL_CUTOFF_SIGMA, LATERAL_CUTOFF_MAX,
            self.cell_px, self.cell_py, self.cell_off, self.cell_sval,
            self.cell_start,
            self.off_px, self.off_val, self.off_ii, self.off_row_ptr,
            self.act_mask, g.y0, g.resolution, g.cell_area,
            self.stamp_count, self.stamp_agent, self.stamp_geom,
            self.stamp_speed,
            cp.c_obs, cp.w_v, cp.v_ref, cp.d_ref,
            per_step)
        return HorizonRisk.from_steps(per_step)

    def evaluate(self, candidate: Trajectory) -> HorizonRisk:
        return self.evaluate_states(candidate.state_array(),
                                    candidate.wheelbase)


def trajectory_state_array(traj: Trajectory) -> np.ndarray:
    return traj.state_array()


def horizon_risk(candidate: Trajectory, predictions: PredictionSet,
                 road: RoadMap, drf_params: DrfParams,
                 cost_params: CostMapParams, grid_spec: GridSpec,
                 offroad: Optional[np.ndarray] = None) -> HorizonRisk:
    """Risk of one candidate across the whole horizon."""
    horizon = len(candidate)
    for aid in predictions.agent_ids():
        for mode in predictions.modes[aid]:
            if len(mode.trajectory) != horizon:
                raise ValueError("prediction/candidate length mismatch")
    ev = RiskEvaluator(predictions, road, drf_params, cost_params,
                       grid_spec, horizon, offroad)
    return ev.evaluate(candidate)


def _stamps_at_step(predictions: PredictionSet, t: int) -> List[AgentStamps]:
    agents = []
    for aid in predictions.agent_ids():
        stamps = []
        for mode in predictions.modes[aid]:
            st = mode.trajectory[t]
            stamps.append((footprint_box(st), st.v, mode.weight))
        agents.append(stamps)
    return agents


def export_sadrf_heatmap(candidate: Trajectory, predictions: PredictionSet,
                         road: RoadMap, drf_params: DrfParams,
                         cost_params: CostMapParams, grid_spec: GridSpec,
                         step: Union[int, str] = "sum") -> RiskGrid:
    """Per-cell field * cost grid at one step, or summed over all steps."""
    T = len(candidate)
    if step == "sum":
        steps = range(T)
    else:
        if not isinstance(step, int) or not (0 <= step < T):
            raise ValueError(f"step must be 'sum' or an index in [0, {T})")
        steps = [step]
    offroad = offroad_layer(road, grid_spec, cost_params)
    X, Y = grid_spec.cell_centers()
    total = np.zeros((grid_spec.ny, grid_spec.nx))
    for t in steps:
        cost = _cost_grid_at_step(candidate[t], _stamps_at_step(predictions, t),
                                  grid_spec, cost_params, offroad)
        total += eval_field_grid(candidate[t], drf_params, X, Y) * cost
    return RiskGrid(grid_spec, total)
