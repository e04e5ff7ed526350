"""Compiled inner loops for risk evaluation and trajectory rollout.

The per-step sum over grid cells of field * cost is the planner's hot
path (25 candidates x 30 steps per cycle).  Only cells where the cost
map can be nonzero matter: the off-road cells and the cells near a
predicted obstacle stamp.  Those lists are precomputed once per cycle
and shared across candidates, so each candidate-step visits a few
hundred cells instead of the grid.  Cells are visited in a fixed order,
so sums are deterministic.
"""
import math

import numpy as np
from numba import njit

STRAIGHT_DELTA = 1e-3


@njit(cache=True)
def _stamp_value(cx, cy, cpx, cpy, cph, sph, ehl, ehw,
                 sigma_obs, obs_cut):
    """Unit obstacle stamp at a point: plateau 1 inside the inflated box,
    Gaussian skirt outside, zero beyond the cutoff gap."""
    dx = cx - cpx
    dy = cy - cpy
    lx = abs(dx * cph + dy * sph) - ehl
    ly = abs(-dx * sph + dy * cph) - ehw
    gx = lx if lx > 0.0 else 0.0
    gy = ly if ly > 0.0 else 0.0
    g = math.sqrt(gx * gx + gy * gy)
    if g > obs_cut * sigma_obs:
        return 0.0
    return math.exp(-(g * g) / (2.0 * sigma_obs * sigma_obs))


@njit(cache=True, inline='always')
def _field_value(px, py, ex, ey, ch, sh, straight,
                 cx_c, cy_c, radius, a0, direction,
                 s_max, inner_coef, outer_coef, c_w,
                 p, lat_cut, lat_max):
    """Risk-field value at one cell center (0 outside the support)."""
    if straight:
        dx = px - ex
        dy = py - ey
        s = dx * ch + dy * sh
        d = -dx * sh + dy * ch
        is_inner = d > 0.0
    else:
        rx = px - cx_c
        ry = py - cy_c
        r = math.hypot(rx, ry)
        d = r - radius
        is_inner = d < 0.0
        ang = (math.atan2(ry, rx) - a0) * direction
        ang = ang % (2.0 * math.pi)
        s = ang * radius
    if s < 0.0 or s > s_max:
        return 0.0
    sigma = (inner_coef if is_inner else outer_coef) * s + c_w
    cut = lat_cut * sigma
    if cut > lat_max:
        cut = lat_max
    if abs(d) > cut:
        return 0.0
    a_h = p * (s - s_max) * (s - s_max)
    return a_h * math.exp(-(d * d) / (2.0 * sigma * sigma))


@njit(cache=True)
def stamp_values_kernel(cell_px, cell_py, cell_start, act_end,
                        stamp_count, stamp_geom, stamp_weight,
                        sigma_obs, obs_cut, sval):
    """Weight-scaled unit stamp value at every stamp-neighborhood cell.

    Shared across all candidates of a cycle; sval[n, m] is mode weight
    times the unit stamp of mode m at cell n.  Rows past act_end[t] are
    off-road-only cells and stay zero.
    """
    T = cell_start.shape[0] - 1
    for t in range(T):
        for n in range(cell_start[t], act_end[t]):
            px = cell_px[n]
            py = cell_py[n]
            for m in range(stamp_count[t]):
                bb = stamp_geom[t, m, 6]
                if (abs(px - stamp_geom[t, m, 0]) > bb or
                        abs(py - stamp_geom[t, m, 1]) > bb):
                    continue
                sval[n, m] = stamp_weight[t, m] * _stamp_value(
                    px, py,
                    stamp_geom[t, m, 0], stamp_geom[t, m, 1],
                    stamp_geom[t, m, 2], stamp_geom[t, m, 3],
                    stamp_geom[t, m, 4], stamp_geom[t, m, 5],
                    sigma_obs, obs_cut)


@njit(cache=True)
def horizon_risk_kernel(states, wheelbase,
                        p, t_la, c_w, m_slope, k1, k2, lat_cut, lat_max,
                        cell_px, cell_py, cell_off, cell_sval, cell_start,
                        off_px, off_val, off_ii, off_row_ptr,
                        act_mask, y0, res, cell_area,
                        stamp_count, stamp_agent, stamp_geom, stamp_speed,
                        c_obs, w_v, v_ref, d_ref,
                        per_step):
    """Per-step risk for one candidate trajectory.

    states: (T, 5) rows x, y, phi, v, delta.
    cell_* arrays list the stamp-neighborhood cells per step (rows
    cell_start[t]:cell_start[t+1]); cell_off holds their off-road cost
    and cell_sval the precomputed weight-scaled stamp values, which the
    per-candidate amplitude multiplies here.  off_* arrays list the
    off-road cells once, row-major with px ascending inside each grid
    row (off_row_ptr indexes rows); act_mask marks cells already in the
    per-step lists so they are not counted twice.
    per_step: (T,) output, already scaled by cell area.
    """
    T = states.shape[0]
    ny = off_row_ptr.shape[0] - 1
    for t in range(T):
        ex = states[t, 0]
        ey = states[t, 1]
        ephi = states[t, 2]
        ev = states[t, 3]
        edelta = states[t, 4]
        s_max = ev * t_la
        per_step[t] = 0.0
        if s_max <= 0.0:
            continue

        straight = abs(edelta) < STRAIGHT_DELTA
        ch = math.cos(ephi)
        sh = math.sin(ephi)
        kmax = k1 if k1 > k2 else k2
        wlat = lat_cut * ((m_slope + kmax * abs(edelta)) * s_max + c_w)
        if wlat > lat_max:
            wlat = lat_max

        # support bounding box in world coordinates
        if straight:
            cx_c = 0.0
            cy_c = 0.0
            radius = 0.0
            a0 = 0.0
            direction = 1.0
            xa = ex
            xb = ex + s_max * ch
            ya = ey
            yb = ey + s_max * sh
            xmin = (xa if xa < xb else xb) - wlat
            xmax = (xa if xa > xb else xb) + wlat
            ymin = (ya if ya < yb else yb) - wlat
            ymax = (ya if ya > yb else yb) + wlat
        else:
            R = wheelbase / math.tan(edelta)
            cx_c = ex - R * sh
            cy_c = ey + R * ch
            radius = abs(R)
            direction = 1.0 if R > 0.0 else -1.0
            a0 = math.atan2(ey - cy_c, ex - cx_c)
            xmin = ex
            xmax = ex
            ymin = ey
            ymax = ey
            n_samp = 16
            for q in range(1, n_samp + 1):
                sq = s_max * q / n_samp
                ang = a0 + direction * sq / radius
                px = cx_c + radius * math.cos(ang)
                py = cy_c + radius * math.sin(ang)
                if px < xmin:
                    xmin = px
                if px > xmax:
                    xmax = px
                if py < ymin:
                    ymin = py
                if py > ymax:
                    ymax = py
            # margin covers lateral width plus arc sag between samples
            xmin -= wlat + 2.0
            xmax += wlat + 2.0
            ymin -= wlat + 2.0
            ymax += wlat + 2.0

        # per-stamp amplitudes for this candidate state
        n_stamps = stamp_count[t]
        amps = np.empty(n_stamps)
        for m in range(n_stamps):
            dist = math.hypot(stamp_geom[t, m, 0] - ex,
                              stamp_geom[t, m, 1] - ey)
            dv = abs(stamp_speed[t, m] - ev)
            ratio = dv / v_ref
            if ratio > 1.0:
                ratio = 1.0
            amps[m] = c_obs * (1.0 + w_v * ratio * math.exp(-dist / d_ref))

        inner_coef = m_slope + k1 * abs(edelta)
        outer_coef = m_slope + k2 * abs(edelta)
        acc = 0.0
        for n in range(cell_start[t], cell_start[t + 1]):
            px = cell_px[n]
            py = cell_py[n]
            if px < xmin or px > xmax or py < ymin or py > ymax:
                continue
            g_val = _field_value(px, py, ex, ey, ch, sh, straight,
                                 cx_c, cy_c, radius, a0, direction,
                                 s_max, inner_coef, outer_coef, c_w,
                                 p, lat_cut, lat_max)
            if g_val == 0.0:
                continue
            m_val = cell_off[n]
            agent_sum = 0.0
            cur_agent = -1
            for m in range(n_stamps):
                aid = stamp_agent[t, m]
                if aid != cur_agent:
                    if agent_sum > m_val:
                        m_val = agent_sum
                    agent_sum = 0.0
                    cur_agent = aid
                agent_sum += amps[m] * cell_sval[n, m]
            if agent_sum > m_val:
                m_val = agent_sum
            acc += g_val * m_val

        # off-road cells: only the grid rows the support box can touch
        j0 = int(math.floor((ymin - y0) / res - 0.5))
        j1 = int(math.ceil((ymax - y0) / res - 0.5))
        if j0 < 0:
            j0 = 0
        if j1 > ny - 1:
            j1 = ny - 1
        for j in range(j0, j1 + 1):
            a = off_row_ptr[j]
            b = off_row_ptr[j + 1]
            if a == b:
                continue
            py = y0 + (j + 0.5) * res
            if py < ymin or py > ymax:
                continue
            lo = a
            hi = b
            while lo < hi:
                mid = (lo + hi) // 2
                if off_px[mid] < xmin:
                    lo = mid + 1
                else:
                    hi = mid
            for n in range(lo, b):
                px = off_px[n]
                if px > xmax:
                    break
                if act_mask[t, j, off_ii[n]]:
                    continue
                g_val = _field_value(px, py, ex, ey, ch, sh, straight,
                                     cx_c, cy_c, radius, a0, direction,
                                     s_max, inner_coef, outer_coef, c_w,
                                     p, lat_cut, lat_max)
                if g_val != 0.0:
                    acc += g_val * off_val[n]
        per_step[t] = acc * cell_area


@njit(cache=True)
def _wrap_angle(a):
    r = a - 6.283185307179586 * round(a / 6.283185307179586)
    if r <= -math.pi:
        r += 6.283185307179586
    return r


@njit(cache=True)
def track_lane_kernel(sx, sy, sphi, sv, sdelta, wheelbase,
                      pts, segx, segy, seg_len, cum,
                      ctrl, ctrl_is_accel,
                      lookahead_min, lookahead_gain, speed_kp,
                      delta_max, accel_min, accel_max, steer_rate_max,
                      dt, out_states, out_actions):
    """Pure-pursuit + proportional-speed rollout along a lane polyline.

    ctrl holds per-step speed targets, or accel commands when
    ctrl_is_accel.  out_states rows are (x, y, phi, v, delta); out_actions
    rows are (accel, steering command).
    """
    T = out_states.shape[0]
    n_seg = segx.shape[0]
    length = cum[n_seg]
    x = sx
    y = sy
    phi = sphi
    v = sv
    delta = sdelta
    for k in range(T):
        # project onto the centerline (first minimum wins, as in argmin)
        best_d2 = 1e300
        best_i = 0
        best_t = 0.0
        for i in range(n_seg):
            px = pts[i, 0]
            py = pts[i, 1]
            t = ((x - px) * segx[i] + (y - py) * segy[i]) / \
                (seg_len[i] * seg_len[i])
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            dx = x - (px + t * segx[i])
            dy = y - (py + t * segy[i])
            d2 = dx * dx + dy * dy
            if d2 < best_d2:
                best_d2 = d2
                best_i = i
                best_t = t
        s = cum[best_i] + best_t * seg_len[best_i]

        ld = lookahead_gain * v
        if ld < lookahead_min:
            ld = lookahead_min
        s_t = s + ld
        if s_t <= length:
            sc = s_t
            if sc < 0.0:
                sc = 0.0
            i = np.searchsorted(cum, sc, side='right') - 1
            if i < 0:
                i = 0
            elif i > n_seg - 1:
                i = n_seg - 1
            t = (sc - cum[i]) / seg_len[i]
            tx = pts[i, 0] + t * segx[i]
            ty = pts[i, 1] + t * segy[i]
        else:
            hx = segx[n_seg - 1] / seg_len[n_seg - 1]
            hy = segy[n_seg - 1] / seg_len[n_seg - 1]
            extra = s_t - length
            tx = pts[n_seg, 0] + extra * hx
            ty = pts[n_seg, 1] + extra * hy

        alpha = _wrap_angle(math.atan2(ty - y, tx - x) - phi)
        dcmd = math.atan2(2.0 * wheelbase * math.sin(alpha), ld)
        if dcmd > delta_max:
            dcmd = delta_max
        elif dcmd < -delta_max:
            dcmd = -delta_max
        max_change = steer_rate_max * dt
        if dcmd > delta + max_change:
            dcmd = delta + max_change
        elif dcmd < delta - max_change:
            dcmd = delta - max_change

        if ctrl_is_accel:
            a = ctrl[k]
        else:
            a = speed_kp * (ctrl[k] - v)
        if a > accel_max:
            a = accel_max
        elif a < accel_min:
            a = accel_min

        x = x + v * math.cos(phi) * dt
        y = y + v * math.sin(phi) * dt
        phi = _wrap_angle(phi + (v / wheelbase) * math.tan(dcmd) * dt)
        v = v + a * dt
        if v < 0.0:
            v = 0.0
        delta = dcmd
        out_states[k, 0] = x
        out_states[k, 1] = y
        out_states[k, 2] = phi
        out_states[k, 3] = v
        out_states[k, 4] = delta
        out_actions[k, 0] = a
        out_actions[k, 1] = dcmd
