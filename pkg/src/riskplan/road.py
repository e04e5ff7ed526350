"""Road geometry: lane polylines, projections, and the drivable region."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

WAYPOINT_SPACING = 1.0       # m
SPACING_TOLERANCE = 0.2      # m


def resample_polyline(points: Sequence[Sequence[float]],
                      spacing: float = WAYPOINT_SPACING) -> np.ndarray:
    """Resample a polyline to (approximately) uniform waypoint spacing."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("polyline needs at least two 2D points")
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    n = max(2, int(round(total / spacing)) + 1)
    s_new = np.linspace(0.0, total, n)
    x = np.interp(s_new, cum, pts[:, 0])
    y = np.interp(s_new, cum, pts[:, 1])
    return np.column_stack([x, y])


@dataclass
class Lane:
    """Centerline polyline (waypoints ~1 m apart) with a corridor width.

    traffic=False marks plain pavement (shoulders, junction aprons): it
    widens the drivable region but carries no traffic, so predictors and
    lane-offset metrics skip it.
    """
    points: np.ndarray
    width: float = 3.5
    traffic: bool = True

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] < 2:
            raise ValueError("lane polyline needs at least two waypoints")
        if self.width <= 0:
            raise ValueError("lane width must be positive")
        seg = np.diff(self.points, axis=0)
        self._seg = seg
        self._seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(self._seg_len <= 0):
            raise ValueError("degenerate lane segment")
        self._cum = np.concatenate([[0.0], np.cumsum(self._seg_len)])
        # contiguous copies for the compiled tracking loop
        self._segx = np.ascontiguousarray(seg[:, 0])
        self._segy = np.ascontiguousarray(seg[:, 1])

    @property
    def length(self) -> float:
        return float(self._cum[-1])

    def project(self, x: float, y: float) -> Tuple[float, float, float]:
        """Project a point onto the centerline.

        Returns (s, lateral, heading): arc length of the closest point,
        signed lateral offset (positive left of travel direction), and the
        tangent heading there.
        """
        px = self.points[:-1, 0]
        py = self.points[:-1, 1]
        t = ((x - px) * self._seg[:, 0] + (y - py) * self._seg[:, 1])
        t = np.clip(t / (self._seg_len ** 2), 0.0, 1.0)
        cx = px + t * self._seg[:, 0]
        cy = py + t * self._seg[:, 1]
        d2 = (x - cx) ** 2 + (y - cy) ** 2
        i = int(np.argmin(d2))
        s = float(self._cum[i] + t[i] * self._seg_len[i])
        hx, hy = self._seg[i] / self._seg_len[i]
        lat = float(-(x - cx[i]) * hy + (y - cy[i]) * hx)
        return s, lat, math.atan2(hy, hx)

    def min_distance(self, x: float, y: float) -> float:
        px = self.points[:-1, 0]
        py = self.points[:-1, 1]
        t = ((x - px) * self._seg[:, 0] + (y - py) * self._seg[:, 1])
        t = np.clip(t / (self._seg_len ** 2), 0.0, 1.0)
        cx = px + t * self._seg[:, 0]
        cy = py + t * self._seg[:, 1]
        return float(np.sqrt(np.min((x - cx) ** 2 + (y - cy) ** 2)))

    def point_at(self, s: float) -> Tuple[float, float, float]:
        """(x, y, heading) at arc length s, clamped to the lane extent."""
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(max(i, 0), len(self._seg) - 1)
        t = (s - self._cum[i]) / self._seg_len[i]
        x = self.points[i, 0] + t * self._seg[i, 0]
        y = self.points[i, 1] + t * self._seg[i, 1]
        hx, hy = self._seg[i] / self._seg_len[i]
        return float(x), float(y), math.atan2(hy, hx)

    def min_distance_grid(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Minimum distance from each grid point to the centerline."""
        best = np.full(np.broadcast(X, Y).shape, np.inf)
        for i in range(len(self._seg)):
            px, py = self.points[i]
            sx, sy = self._seg[i]
            ll = self._seg_len[i] ** 2
            t = np.clip(((X - px) * sx + (Y - py) * sy) / ll, 0.0, 1.0)
            d2 = (X - (px + t * sx)) ** 2 + (Y - (py + t * sy)) ** 2
            np.minimum(best, d2, out=best)
        return np.sqrt(best)

    def offset(self, lateral: float) -> "Lane":
        """Parallel lane shifted laterally (positive = left of travel)."""
        if lateral == 0.0:
            return self
        # vertex normals averaged from adjacent segment normals
        n = np.zeros_like(self.points)
        segn = np.column_stack([-self._seg[:, 1], self._seg[:, 0]])
        segn /= self._seg_len[:, None]
        n[:-1] += segn
        n[1:] += segn
        norm = np.hypot(n[:, 0], n[:, 1])
        n /= norm[:, None]
        return Lane(self.points + lateral * n, self.width, self.traffic)


@dataclass
class RoadMap:
    """Set of lanes; the drivable region is the union of lane corridors."""
    lanes: List[Lane]

    def __post_init__(self):
        if not self.lanes:
            raise ValueError("road map needs at least one lane")

    def nearest_lane(self, x: float, y: float,
                     capture: float = math.inf) -> Optional[int]:
        """Index of the closest traffic lane within capture, else None."""
        best_i, best_d = None, capture
        for i, lane in enumerate(self.lanes):
            if not lane.traffic:
                continue
            d = lane.min_distance(x, y)
            if d <= best_d:
                best_i, best_d = i, d
        return best_i

    def lanes_within(self, x: float, y: float, capture: float) -> List[int]:
        """Traffic lanes whose centerline passes within capture."""
        return [i for i, lane in enumerate(self.lanes)
                if lane.traffic and lane.min_distance(x, y) <= capture]

    def is_drivable(self, x: float, y: float) -> bool:
        return any(lane.min_distance(x, y) <= lane.width / 2.0
                   for lane in self.lanes)

    def drivable_mask(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        mask = np.zeros(np.broadcast(X, Y).shape, dtype=bool)
        for lane in self.lanes:
            mask |= lane.min_distance_grid(X, Y) <= lane.width / 2.0
        return mask

    def bounds(self, margin: float = 0.0):
        pts = np.vstack([lane.points for lane in self.lanes])
        w = max(lane.width for lane in self.lanes) / 2.0 + margin
        return (float(pts[:, 0].min() - w), float(pts[:, 1].min() - w),
                float(pts[:, 0].max() + w), float(pts[:, 1].max() + w))


class DrivableGridCache:
    """Precomputed drivable mask reusable across planning cycles.

    Planning grids are snapped to multiples of the resolution, so any such
    window is an integer-offset sub-rectangle of this static grid and its
    cell centers coincide exactly.  Cells outside the cached extent count
    as off-road.
    """

    def __init__(self, road: RoadMap, resolution: float, margin: float = 80.0):
        self.road = road
        self.resolution = resolution
        xmin, ymin, xmax, ymax = road.bounds(margin)
        self.x0 = math.floor(xmin / resolution) * resolution
        self.y0 = math.floor(ymin / resolution) * resolution
        self.nx = int(math.ceil((xmax - self.x0) / resolution))
        self.ny = int(math.ceil((ymax - self.y0) / resolution))
        xs = self.x0 + (np.arange(self.nx) + 0.5) * resolution
        ys = self.y0 + (np.arange(self.ny) + 0.5) * resolution
        X, Y = np.meshgrid(xs, ys)
        self.mask = road.drivable_mask(X, Y)

    def window(self, x0: float, y0: float, nx: int, ny: int) -> np.ndarray:
        """Drivable mask for a snapped sub-window (False outside extent)."""
        di = (x0 - self.x0) / self.resolution
        dj = (y0 - self.y0) / self.resolution
        i0, j0 = int(round(di)), int(round(dj))
        if abs(di - i0) > 1e-9 or abs(dj - j0) > 1e-9:
            raise ValueError("grid window is not aligned with the cache")
        out = np.zeros((ny, nx), dtype=bool)
        si0, sj0 = max(0, i0), max(0, j0)
        si1, sj1 = min(self.nx, i0 + nx), min(self.ny, j0 + ny)
        if si0 < si1 and sj0 < sj1:
            out[sj0 - j0:sj1 - j0, si0 - i0:si1 - i0] = \
                self.mask[sj0:sj1, si0:si1]
        return out
