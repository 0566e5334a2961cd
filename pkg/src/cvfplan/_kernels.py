"""Compiled numerical kernels.

Everything here is scalar float math compiled with numba so that the
closed-loop simulator and the Monte-Carlo harness run at native speed.
The public modules wrap these kernels; they are not part of the API.

Conventions: the blended field is rotationally symmetric, so all radial
profiles take the distance ``r`` to the singular point. World-frame
quantities take the offset (dx, dy) = p - p_delta. Angles are wrapped to
(-pi, pi].
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi

# Status codes returned by the simulation/tracing kernels.
SIM_HIT_TMAX = 0
SIM_CONVERGED = 1
SIM_SINGULAR_ABORT = 2

TRACE_HIT_MAXLEN = 0
TRACE_CLOSED = 1
TRACE_SINGULAR_ABORT = 2

# Relative guard absorbing the rounding of the gain chain when deciding
# whether the unsaturated command exceeds the saturation bound. At the
# k(r) = A(r) boundary the exact comparison is a tie; without the guard
# the tie resolves to either side at ulp level.
_SAT_GUARD = 1e-12


@njit(cache=True, nogil=True)
def wrap_angle(a):
    """Wrap an angle to (-pi, pi]."""
    a = a % TWO_PI
    if a > math.pi:
        a -= TWO_PI
    return a


@njit(cache=True, nogil=True)
def region_of(r, r1, r2, r3):
    """Region index 1..4 for a radius; boundaries go to the outer region."""
    if r < r1:
        return 1
    elif r < r2:
        return 2
    elif r < r3:
        return 3
    return 4


@njit(cache=True, nogil=True)
def field_polar(r, r1, r2, r3):
    """Blended flow field profile at radius r.

    Returns (f_r, f_phi, df_r/dr, df_phi/dr, dtheta_r/dr, |F|).
    The angular partials vanish by rotational symmetry. At r = 0 the
    field is zero and all derived quantities are returned as 0.
    """
    if r == 0.0:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    if r < r1:
        # pure source
        return 1.0, 0.0, 0.0, 0.0, 0.0, 1.0
    elif r < r2:
        # source blended into vortex
        d = r2 - r1
        s = (r - r1) / d
        lam = (2.0 * s - 3.0) * s * s + 1.0
        dlam = 6.0 * s * (s - 1.0) / d
        fr = lam
        fp = 1.0 - lam
        n2 = fr * fr + fp * fp
        return fr, fp, dlam, -dlam, -dlam / n2, math.sqrt(n2)
    elif r < r3:
        # vortex blended into sink
        d = r3 - r2
        s = (r - r2) / d
        lam = (2.0 * s - 3.0) * s * s + 1.0
        dlam = 6.0 * s * (s - 1.0) / d
        fr = lam - 1.0
        fp = lam
        n2 = fr * fr + fp * fp
        return fr, fp, dlam, dlam, -dlam / n2, math.sqrt(n2)
    # pure sink
    return -1.0, 0.0, 0.0, 0.0, 0.0, 1.0


@njit(cache=True, nogil=True)
def curvature_polar(r, r1, r2, r3):
    """Integral-curve curvature of the blended field at radius r > 0."""
    fr, fp, dfr, dfp, _tp, n = field_polar(r, r1, r2, r3)
    num = fr * fr * dfp - fr * fp * dfr + (fp / r) * (fr * fr + fp * fp)
    return abs(num) / (n * n * n)


@njit(cache=True, nogil=True)
def cvf_world(dx, dy, r1, r2, r3, guard):
    """Unit field vector in world coordinates for the offset p - p_delta.

    Returns (Tx, Ty, r_delta). Inside the guard disk the zero vector is
    returned (the singular-point branch).
    """
    rd = math.hypot(dx, dy)
    if rd <= guard:
        return 0.0, 0.0, rd
    fr, fp, _dfr, _dfp, _tp, n = field_polar(rd, r1, r2, r3)
    c = dx / rd
    s = dy / rd
    return (fr * c - fp * s) / n, (fr * s + fp * c) / n, rd


@njit(cache=True, nogil=True)
def gain_profile(rd, rho, r1, r2, r3):
    """Curvature-budget profile k(r_delta) used by the dynamic gain."""
    if rd < rho:
        return rd / (rho * rho)
    _fr, _fp, _dfr, _dfp, tp, _n = field_polar(rd, r1, r2, r3)
    return 1.0 / rd + tp


@njit(cache=True, nogil=True)
def control_core(x, y, th, t,
                 pdx, pdy, sx, sy, r1, r2, r3, kappa, rho,
                 vmin, kv, cp, cth, kwmax, ramp):
    """Saturated control law with dynamic gain, fully expanded.

    Returns (v_x, omega, omega_unsat, omega_ff, k_omega, theta_e,
    r_delta, theta_r, saturated_flag). The caller guarantees the state
    is outside the singular guard disk.
    """
    dx = x - sx
    dy = y - sy
    rd = math.hypot(dx, dy)
    fr, fp, _dfr, _dfp, tp, _n = field_polar(rd, r1, r2, r3)
    phid = math.atan2(dy, dx)
    theta_r = wrap_angle(phid + math.atan2(fp, fr))
    te = wrap_angle(th - theta_r)

    # linear velocity, optionally ramped from zero
    dist = math.hypot(x - pdx, y - pdy)
    kv_eff = kv
    if ramp > 0.0:
        kv_eff = kv * (1.0 - math.exp(-ramp * t))
    vx = vmin + kv_eff * math.tanh(dist / cp + abs(te) / cth)

    # reference-orientation gradient and feedforward
    hx = math.cos(th)
    hy = math.sin(th)
    erx = dx / rd
    ery = dy / rd
    h_par = hx * erx + hy * ery
    h_perp = hy * erx - hx * ery
    invr = 1.0 / rd
    amp = math.hypot(invr, tp)
    grad_dot_h = tp * h_par + invr * h_perp
    omega_ff = vx * grad_dot_h
    cosd = grad_dot_h / amp
    if cosd > 1.0:
        cosd = 1.0
    elif cosd < -1.0:
        cosd = -1.0

    # dynamic gain; the budget slack is nonnegative for feasible fields
    if rd < rho:
        k = rd / (rho * rho)
    else:
        k = invr + tp
    slack = kappa - k * abs(cosd)
    if slack < 0.0:
        slack = 0.0
    ate = abs(te)
    kw = kwmax
    if ate > 0.0:
        kw_state = vx * slack / ate
        if kw_state < kw:
            kw = kw_state

    w0 = -kw * te + omega_ff
    wbar = vx * kappa
    aw0 = abs(w0)
    saturated = aw0 > wbar * (1.0 + _SAT_GUARD)
    if aw0 > wbar:
        w = math.copysign(wbar, w0)
    else:
        w = w0
    # keep |omega| / v_x <= kappa true in the divided form as well
    if vx > 0.0:
        while abs(w) / vx > kappa:
            w = math.nextafter(w, 0.0)
    return vx, w, w0, omega_ff, kw, te, rd, theta_r, saturated


@njit(cache=True, nogil=True)
def simulate_core(x0, y0, th0, dt, n_max,
                  pdx, pdy, sx, sy, r1, r2, r3, kappa, rho,
                  vmin, kv, cp, cth, kwmax, ramp,
                  eps_pos, eps_ang, loiter, rk4, guard, stride,
                  out, sat_starts, sat_ends):
    """Closed-loop simulation with per-step diagnostics.

    The control law is evaluated at every integrator stage, so the
    integrated system is the continuous closed loop. Samples are stored
    every `stride` steps (plus the final step) into `out`, one row per
    sample: t, x, y, theta, v_x, omega, omega_unsat, k_omega, theta_e,
    r_delta, saturated, kappa_step.

    Returns (n_samples, status, n_steps, t_end, max_te_increase,
    max_abs_te, sat_rd_max, n_sat_intervals, kappa_violations,
    kappa_ratio_max, kappa_sum, kappa_count, domega_sq_sum, domega_count,
    d_e_final, te_final, dist_final).
    """
    x = x0
    y = y0
    th = th0
    t = 0.0
    m = 0              # stored samples
    step = 0
    status = SIM_HIT_TMAX

    prev_ate = -1.0
    max_te_inc = -1.0e300
    max_abs_te = 0.0
    sat_prev = False
    sat_rd_max = 0.0
    n_int = 0
    cap = sat_starts.shape[0]
    kappa_viol = 0
    kappa_ratio_max = -1.0e300
    ksum = 0.0
    kcnt = 0
    w_prev = 0.0
    dwsq = 0.0
    dwcnt = 0
    vx = 0.0
    w = 0.0
    te = 0.0
    rd = 0.0
    dist = 0.0

    while True:
        dx = x - sx
        dy = y - sy
        rd = math.hypot(dx, dy)
        if rd <= guard:
            status = SIM_SINGULAR_ABORT
            break
        vx, w, w0, om_ff, kw, te, rd, theta_r, sat = control_core(
            x, y, th, t, pdx, pdy, sx, sy, r1, r2, r3, kappa, rho,
            vmin, kv, cp, cth, kwmax, ramp)

        # per-step diagnostics at full rate
        ate = abs(te)
        if ate > max_abs_te:
            max_abs_te = ate
        if prev_ate >= 0.0 and ate - prev_ate > max_te_inc:
            max_te_inc = ate - prev_ate
        prev_ate = ate
        if sat:
            if rd > sat_rd_max:
                sat_rd_max = rd
            if not sat_prev and n_int < cap:
                sat_starts[n_int] = t
        else:
            if sat_prev:
                if n_int < cap:
                    sat_ends[n_int] = t
                n_int += 1
        sat_prev = sat
        if vx > 0.0:
            ratio = abs(w) / vx
            ksum += ratio
            kcnt += 1
            if ratio - kappa > 0.0:
                kappa_viol += 1
            if ratio - kappa > kappa_ratio_max:
                kappa_ratio_max = ratio - kappa
        if step > 0:
            dw = w - w_prev
            dwsq += dw * dw
            dwcnt += 1
        w_prev = w

        store = (step % stride == 0)
        dist = math.hypot(x - pdx, y - pdy)
        if loiter:
            conv = abs(rd - r2) < eps_pos and ate < eps_ang
        else:
            conv = dist < eps_pos and ate < eps_ang
        if conv:
            status = SIM_CONVERGED
            store = True
        elif step >= n_max:
            status = SIM_HIT_TMAX
            store = True
        if store:
            out[m, 0] = t
            out[m, 1] = x
            out[m, 2] = y
            out[m, 3] = th
            out[m, 4] = vx
            out[m, 5] = w
            out[m, 6] = w0
            out[m, 7] = kw
            out[m, 8] = te
            out[m, 9] = rd
            out[m, 10] = 1.0 if sat else 0.0
            out[m, 11] = abs(w) / vx if vx > 0.0 else 0.0
            m += 1
        if status != SIM_HIT_TMAX or step >= n_max:
            break

        # advance one step; control re-evaluated at each stage
        if rk4:
            k1x = vx * math.cos(th)
            k1y = vx * math.sin(th)
            k1t = w
            xa = x + 0.5 * dt * k1x
            ya = y + 0.5 * dt * k1y
            tha = th + 0.5 * dt * k1t
            va, wa = _stage_vw(xa, ya, tha, t + 0.5 * dt, pdx, pdy, sx, sy,
                               r1, r2, r3, kappa, rho, vmin, kv, cp, cth,
                               kwmax, ramp)
            k2x = va * math.cos(tha)
            k2y = va * math.sin(tha)
            k2t = wa
            xb = x + 0.5 * dt * k2x
            yb = y + 0.5 * dt * k2y
            thb = th + 0.5 * dt * k2t
            vb, wb = _stage_vw(xb, yb, thb, t + 0.5 * dt, pdx, pdy, sx, sy,
                               r1, r2, r3, kappa, rho, vmin, kv, cp, cth,
                               kwmax, ramp)
            k3x = vb * math.cos(thb)
            k3y = vb * math.sin(thb)
            k3t = wb
            xc = x + dt * k3x
            yc = y + dt * k3y
            thc = th + dt * k3t
            vc, wc = _stage_vw(xc, yc, thc, t + dt, pdx, pdy, sx, sy,
                               r1, r2, r3, kappa, rho, vmin, kv, cp, cth,
                               kwmax, ramp)
            k4x = vc * math.cos(thc)
            k4y = vc * math.sin(thc)
            k4t = wc
            x += dt * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
            y += dt * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
            th = wrap_angle(th + dt * (k1t + 2.0 * k2t + 2.0 * k3t + k4t) / 6.0)
        else:
            x += dt * vx * math.cos(th)
            y += dt * vx * math.sin(th)
            th = wrap_angle(th + dt * w)
        step += 1
        t = step * dt

    if sat_prev:
        if n_int < cap:
            sat_ends[n_int] = t
        n_int += 1
    return (m, status, step, t, max_te_inc, max_abs_te, sat_rd_max, n_int,
            kappa_viol, kappa_ratio_max, ksum, kcnt, dwsq, dwcnt,
            rd - r2, te, dist)


@njit(cache=True, nogil=True)
def _stage_vw(x, y, th, t, pdx, pdy, sx, sy, r1, r2, r3, kappa, rho,
              vmin, kv, cp, cth, kwmax, ramp):
    vx, w, _w0, _ff, _kw, _te, _rd, _thr, _sat = control_core(
        x, y, th, t, pdx, pdy, sx, sy, r1, r2, r3, kappa, rho,
        vmin, kv, cp, cth, kwmax, ramp)
    return vx, w


@njit(cache=True, nogil=True)
def trace_core(x0, y0, sx, sy, r1, r2, r3, h, n_max, guard, xs, ys):
    """Trace an integral curve of the unit field with fixed arc steps.

    Classic four-stage one-step advance on the normalized field; the
    step size h is the arc increment. Stops at n_max points, when the
    curve self-closes on the limit cycle (one full revolution inside an
    h-band of it), or on singular-guard entry.

    Returns (n_points, status).
    """
    x = x0
    y = y0
    in_band = False
    acc_phi = 0.0
    prev_phi = 0.0
    n = 0
    status = TRACE_HIT_MAXLEN
    while n < n_max:
        dx = x - sx
        dy = y - sy
        rd = math.hypot(dx, dy)
        if rd <= guard:
            status = TRACE_SINGULAR_ABORT
            break
        xs[n] = x
        ys[n] = y
        n += 1
        phi = math.atan2(dy, dx)
        if abs(rd - r2) <= h:
            if in_band:
                acc_phi += abs(wrap_angle(phi - prev_phi))
                if acc_phi >= TWO_PI:
                    status = TRACE_CLOSED
                    break
            in_band = True
            prev_phi = phi
        else:
            in_band = False
            acc_phi = 0.0

        tx, ty, _ = cvf_world(dx, dy, r1, r2, r3, guard)
        xa = x + 0.5 * h * tx
        ya = y + 0.5 * h * ty
        t2x, t2y, r2a = cvf_world(xa - sx, ya - sy, r1, r2, r3, guard)
        xb = x + 0.5 * h * t2x
        yb = y + 0.5 * h * t2y
        t3x, t3y, r2b = cvf_world(xb - sx, yb - sy, r1, r2, r3, guard)
        xc = x + h * t3x
        yc = y + h * t3y
        t4x, t4y, r2c = cvf_world(xc - sx, yc - sy, r1, r2, r3, guard)
        if r2a <= guard or r2b <= guard or r2c <= guard:
            status = TRACE_SINGULAR_ABORT
            break
        x += h * (tx + 2.0 * t2x + 2.0 * t3x + t4x) / 6.0
        y += h * (ty + 2.0 * t2y + 2.0 * t3y + t4y) / 6.0
    return n, status


@njit(cache=True, nogil=True)
def max_curvature_radii(rr, r1, r2, r3):
    """Largest integral-curve curvature over an array of radii."""
    m = 0.0
    for i in range(rr.shape[0]):
        k = curvature_polar(rr[i], r1, r2, r3)
        if k > m:
            m = k
    return m


@njit(cache=True, nogil=True)
def grid_eval(xs, ys, sx, sy, r1, r2, r3, guard,
              tx, ty, theta_r, kap, region):
    """Evaluate field direction, reference orientation, curvature and
    region for flattened grid coordinates. Singular cells get a zero
    vector and NaN angle/curvature."""
    n = xs.shape[0]
    for i in range(n):
        dx = xs[i] - sx
        dy = ys[i] - sy
        rd = math.hypot(dx, dy)
        region[i] = region_of(rd, r1, r2, r3)
        if rd <= guard:
            tx[i] = 0.0
            ty[i] = 0.0
            theta_r[i] = np.nan
            kap[i] = np.nan
            continue
        fr, fp, _dfr, _dfp, _tp, nn = field_polar(rd, r1, r2, r3)
        c = dx / rd
        s = dy / rd
        tx[i] = (fr * c - fp * s) / nn
        ty[i] = (fr * s + fp * c) / nn
        theta_r[i] = wrap_angle(math.atan2(dy, dx) + math.atan2(fp, fr))
        kap[i] = curvature_polar(rd, r1, r2, r3)


@njit(cache=True, nogil=True)
def step_fixed(x, y, th, vx, w, dt, rk4):
    """One kinematics step under constant (v_x, omega) (zero-order hold)."""
    if rk4:
        k1x = vx * math.cos(th)
        k1y = vx * math.sin(th)
        tha = th + 0.5 * dt * w
        k2x = vx * math.cos(tha)
        k2y = vx * math.sin(tha)
        k3x = k2x
        k3y = k2y
        thc = th + dt * w
        k4x = vx * math.cos(thc)
        k4y = vx * math.sin(thc)
        x += dt * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
        y += dt * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
    else:
        x += dt * vx * math.cos(th)
        y += dt * vx * math.sin(th)
    return x, y, wrap_angle(th + dt * w)
