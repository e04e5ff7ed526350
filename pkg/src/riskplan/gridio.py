"""Grid and episode artifact export: CSV, binary PGM, trace logs.

Every writer goes through write-then-rename so interrupted runs never
leave partial files behind.
"""
from __future__ import annotations

import os
import tempfile
from typing import Iterable, Sequence

import numpy as np

from .riskfield import RiskGrid


def _atomic_write(path: str, data: bytes):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sidecar_text(grid: RiskGrid) -> str:
    s = grid.spec
    return ("origin_x {:.9g}\norigin_y {:.9g}\nresolution {:.9g}\n"
            "nx {}\nny {}\ntotal_mass {:.9g}\n").format(
                s.x0, s.y0, s.resolution, s.nx, s.ny, grid.total_mass)


def write_grid_csv(grid: RiskGrid, path: str):
    """Row-major CSV at 9 significant digits plus a .meta sidecar."""
    lines = []
    for row in grid.values:
        lines.append(",".join("{:.9g}".format(v) for v in row))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())
    _atomic_write(path + ".meta", _sidecar_text(grid).encode())


def write_grid_pgm(grid: RiskGrid, path: str):
    """Binary PGM (P5), min-max normalized to 0..255, plus sidecar."""
    v = grid.values
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        img = np.round((v - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        img = np.zeros(v.shape, dtype=np.uint8)
    # PGM rows run top to bottom; grid rows run bottom to top
    img = img[::-1]
    header = f"P5\n{grid.spec.nx} {grid.spec.ny}\n255\n".encode()
    _atomic_write(path, header + img.tobytes())
    _atomic_write(path + ".meta", _sidecar_text(grid).encode())


def write_trace_csv(trace: Sequence[tuple], path: str):
    """Episode trace: step, agent id, x, y, phi, v, delta."""
    lines = ["step,agent_id,x,y,phi,v,delta"]
    for step, aid, x, y, phi, v, delta in trace:
        lines.append("{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}".format(
            step, aid, x, y, phi, v, delta))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def write_cycle_log_csv(logs, path: str):
    """Planner cycle log: one row per replanning cycle."""
    lines = ["cycle,lateral_offset,target_speed,score,risk_total,fallback"]
    for lg in logs:
        lines.append("{},{:.9g},{:.9g},{:.9g},{:.9g},{}".format(
            lg.cycle, lg.lateral_offset, lg.target_speed, lg.score,
            lg.risk_total, int(lg.fallback_used)))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def write_text(path: str, text: str):
    _atomic_write(path, text.encode())
