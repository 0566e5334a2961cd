"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest -s tests/test_acceptance.py`` to see
them inline).

Criterion 4's first clause measures the limit cycle's attraction rate.
The blend polynomial has zero slope at the cycle, so the radial gap g
shrinks along arc length s as d(1/g)/ds = 3/width^2; closing from the
ring width (4 rho) to 1e-3*r2 = 8e-3 rho therefore needs roughly
(width^2/3) / 8e-3 = 667 rho = 56*r3 of arc, which exceeds the stated
20*r3 budget for every start point. The test asserts the stated budget
faithfully and is expected to fail; see the project notes.
"""

import math
import time

import numpy as np
import pytest

from cvfplan import (Configuration, CvfParams, NonConvergingStateError,
                     UavParams, Vec2, attitude_error, base_field_polar,
                     bundled_scenario, check_curvature_condition,
                     check_stabilization_condition, control, cvf,
                     field_geometry, integral_curve, k_func, load_scenario,
                     roll_setpoint, run_monte_carlo, sample_grid, simulate,
                     thrust_setpoint)
from cvfplan.scenario_io import save_report

from test_fixedwing import quat_angle, random_rotation
from test_vfield import menger_curvature


def _verdict(num: int, ok: bool, detail: str):
    line = f"ACCEPTANCE {num:02d} [{'PASS' if ok else 'FAIL'}] {detail}"
    print(line, flush=True)
    assert ok, line


@pytest.fixture(scope="module")
def reference(desk_params, desk_ctrl):
    return desk_params, desk_ctrl


def test_criterion_01_feasibility_checks(reference):
    """Reference radii pass both checkers; single-inequality
    perturbations are rejected by name; checker runtime < 1 ms."""
    params, _ = reference
    ok = check_curvature_condition(params).passed \
        and check_stabilization_condition(params).passed

    # each perturbation violates exactly one inequality of its family
    perturbations = [
        (dict(r1=3.9), "r1 >= r2 - r1"),
        (dict(r1=6.0, r2=8.5), "r2 - r1 >= 3*rho"),
        (dict(r3=17.0), "r2 >= r3 - r2"),
        (dict(r3=10.5), "r3 - r2 >= 3*rho"),
    ]
    for overrides, expected_name in perturbations:
        fields = dict(target_position=Vec2(8.0, 0.0),
                      target_heading=math.pi / 2,
                      r1=4.0, r2=8.0, r3=12.0, kappa_max=1.0)
        fields.update(overrides)
        report = check_curvature_condition(CvfParams(**fields))
        names = [c.name for c in report.violations]
        ok = ok and names == [expected_name]
    # the gain inequality, violated via a too-close inner radius
    bad = CvfParams(Vec2(8.0, 0.0), math.pi / 2, 0.9, 8.0, 12.0, 1.0)
    gain_names = [c.name for c in check_stabilization_condition(bad).violations]
    ok = ok and gain_names == ["1/r1 + 1/(r2 - r1) <= kappa_max"]

    best = math.inf
    for _ in range(5):
        t0 = time.perf_counter()
        check_curvature_condition(params)
        check_stabilization_condition(params)
        best = min(best, time.perf_counter() - t0)
    ok = ok and best < 1e-3
    _verdict(1, ok, f"feasibility checkers correct, runtime {best * 1e6:.0f} us")


def test_criterion_02_curvature_bound_and_oracle(reference):
    """Closed-form curvature bounded on a 400x400 grid; matches the
    polyline finite-difference oracle at random points; < 10 s."""
    params, _ = reference
    t0 = time.perf_counter()
    lim = 1.5 * params.r3
    sp = params.singular_point
    grid = sample_grid(params, sp.x - lim, sp.x + lim,
                       sp.y - lim, sp.y + lim, 400)
    rd = np.hypot(grid.x - sp.x, grid.y - sp.y)
    mask = rd > params.rho / 100.0
    kmax = float(np.max(grid.kappa[mask]))
    ok = kmax <= params.kappa_max + 1e-9

    # oracle comparison away from the partition circles, where the
    # three-point stencil's own error stays below the tolerance
    rng = np.random.default_rng(2024)
    h = params.rho / 100.0
    worst = 0.0
    checked = 0
    while checked < 100:
        r = rng.uniform(0.2, 1.4 * params.r3)
        if min(abs(r - rc) for rc in (params.r1, params.r2, params.r3)) < 0.05:
            continue
        ang = rng.uniform(0.0, 2.0 * math.pi)
        p = Vec2(sp.x + r * math.cos(ang), sp.y + r * math.sin(ang))
        pts = integral_curve(p, params, arc_step=h, max_len=2.5 * h).points
        k_fd = menger_curvature(pts[0], pts[1], pts[2])
        k_an = float(np.nan_to_num(
            _analytic_kappa(Vec2(*pts[1]), params)))
        worst = max(worst, abs(k_fd - k_an))
        checked += 1
    elapsed = time.perf_counter() - t0
    ok = ok and worst <= 1e-4 and elapsed < 10.0
    _verdict(2, ok, f"grid max kappa {kmax:.12f} (bound 1), oracle gap "
                    f"{worst:.2e}, runtime {elapsed:.2f} s")


def _analytic_kappa(p, params):
    from cvfplan import curvature
    return curvature(p, params)


def test_criterion_03_c1_continuity(reference):
    """One-sided radial difference quotients of both field components
    agree across every partition circle within 1e-6."""
    params, _ = reference
    h = 1e-7 * params.r2
    worst = 0.0
    for r_i in (params.r1, params.r2, params.r3):
        lo = base_field_polar(r_i - h, params)
        mid = base_field_polar(r_i, params)
        hi = base_field_polar(r_i + h, params)
        for c in (0, 1):
            below = (mid[c] - lo[c]) / h
            above = (hi[c] - mid[c]) / h
            worst = max(worst, abs(above - below))
    ok = worst < 1e-6
    _verdict(3, ok, f"worst derivative jump {worst:.2e}")


def test_criterion_04_limit_cycle_convergence(reference):
    """50 random integral curves must close to within 1e-3*r2 of the
    cycle inside 20*r3 of arc; a curve started on the cycle must stay
    within 1e-3*r2. The first clause exceeds what the field's algebraic
    attraction rate allows (see module docstring) and is expected red."""
    params, _ = reference
    sp = params.singular_point
    band = 1e-3 * params.r2
    budget = 20.0 * params.r3

    on_cycle = integral_curve(Vec2(sp.x + params.r2, sp.y), params,
                              max_len=budget)
    rr = np.hypot(on_cycle.points[:, 0] - sp.x, on_cycle.points[:, 1] - sp.y)
    stay_ok = bool(np.max(np.abs(rr - params.r2)) <= band)

    rng = np.random.default_rng(404)
    worst_gap = 0.0
    for _ in range(50):
        r = rng.uniform(0.1 * params.rho, 2.0 * params.r3)
        ang = rng.uniform(0.0, 2.0 * math.pi)
        p0 = Vec2(sp.x + r * math.cos(ang), sp.y + r * math.sin(ang))
        curve = integral_curve(p0, params, max_len=budget)
        gaps = np.abs(np.hypot(curve.points[:, 0] - sp.x,
                               curve.points[:, 1] - sp.y) - params.r2)
        worst_gap = max(worst_gap, float(np.min(gaps)))
    reach_ok = worst_gap < band
    ok = stay_ok and reach_ok
    _verdict(4, ok,
             f"on-cycle stay {'ok' if stay_ok else 'failed'}; worst closing "
             f"gap {worst_gap:.4f} vs required {band:.4f} within arc {budget:.0f}")


def test_criterion_05_alignment_at_target():
    """The field at the target position points along the target heading
    for arbitrary target configurations."""
    rng = np.random.default_rng(505)
    worst = 1.0
    for _ in range(100):
        params = CvfParams(
            target_position=Vec2(rng.uniform(-20, 20), rng.uniform(-20, 20)),
            target_heading=rng.uniform(0.0, 2.0 * math.pi),
            r1=4.0, r2=8.0, r3=12.0, kappa_max=1.0)
        t = cvf(params.target_position, params)
        dot = t.x * math.cos(params.target_heading) \
            + t.y * math.sin(params.target_heading)
        worst = min(worst, dot)
    ok = worst >= 1.0 - 1e-12
    _verdict(5, ok, f"worst alignment 1 - {1.0 - worst:.2e}")


def test_criterion_06_reference_experiments():
    """The seven bundled desk-scale experiments reproduce the published
    behavior: convergence, exact curvature compliance, saturation
    confined to runs 1-3 inside one turning radius, monotone heading
    error, and run 7 holding zero heading error. < 60 s at dt = 1e-3."""
    t0 = time.perf_counter()
    ok = True
    notes = []
    for i in range(1, 8):
        sc = load_scenario(bundled_scenario(f"table1_exp{i}"))
        assert sc.sim.dt == 1e-3
        traj, rep = simulate(sc.initial, sc.cvf, sc.ctrl, sc.sim,
                             loiter=sc.loiter)
        rho = sc.cvf.rho
        conv = rep.converged and rep.final_position_error < 1e-2 * rho \
            and abs(rep.final_theta_e) < 1e-2
        exact = rep.kappa_violation_count == 0
        monotone = rep.theta_e_max_increase <= 1e-9
        if i <= 3:
            sat_ok = rep.saturated_r_delta_max < rho
        else:
            sat_ok = len(rep.saturation_intervals) == 0
        run_ok = conv and exact and monotone and sat_ok
        if i == 7:
            run_ok = run_ok and rep.theta_e_max_abs <= 1e-9
            notes.append(f"exp7 |theta_e|max {rep.theta_e_max_abs:.1e}")
        if not run_ok:
            notes.append(
                f"exp{i}: conv={conv} exact={exact} monotone={monotone} "
                f"sat={sat_ok}")
        ok = ok and run_ok
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 60.0
    _verdict(6, ok, f"seven experiments in {elapsed:.1f} s; " + "; ".join(notes))


def test_criterion_07_monte_carlo_table():
    """1000 seeded trials reproduce the published batch row: perfect
    curvature/input compliance, average curvature 0.1415 +/- 0.02,
    relative length 4.1448 +/- 10 %, average time within 2x of 28.52.
    < 10 min."""
    t0 = time.perf_counter()
    sc = load_scenario(bundled_scenario("montecarlo_unicycle"))
    report, _ = run_monte_carlo(sc.cvf, sc.ctrl, sc.sim, sc.trials,
                                n_trials=1000, master_seed=0)
    elapsed = time.perf_counter() - t0
    ok = (report.pct_curvature_ok == 1.0
          and report.pct_input_ok == 1.0
          and abs(report.avg_curvature - 0.1415) <= 0.02
          and abs(report.relative_length - 4.1448) <= 0.10 * 4.1448
          and 28.5228 / 2.0 <= report.avg_time <= 28.5228 * 2.0
          and elapsed < 600.0)
    _verdict(7, ok,
             f"pct_k={report.pct_curvature_ok:.4f} pct_in={report.pct_input_ok:.4f} "
             f"avg_k={report.avg_curvature:.4f} L_r={report.relative_length:.4f} "
             f"avg_t={report.avg_time:.2f}, runtime {elapsed:.0f} s")


def test_criterion_08_dynamic_gain_properties(reference):
    """Over 1e5 random states the clamp engages only inside one turning
    radius of the singular point; the gain's curvature-budget profile
    never exceeds the bound and dominates the orientation-gradient
    magnitude beyond one turning radius."""
    params, ctrl = reference
    sp = params.singular_point
    rng = np.random.default_rng(808)
    n = 100_000
    sat_ok = True
    for _ in range(n):
        x = rng.uniform(-1.5 * params.r3, 1.5 * params.r3)
        y = rng.uniform(-1.5 * params.r3, 1.5 * params.r3)
        if math.hypot(x - sp.x, y - sp.y) <= params.singular_guard:
            continue
        g = Configuration(Vec2(x, y), rng.uniform(-math.pi, math.pi))
        try:
            out = control(g, params, ctrl)
        except NonConvergingStateError:
            continue
        if out.saturated and out.r_delta >= params.rho:
            sat_ok = False
            break

    rr = np.concatenate([
        np.linspace(1e-6, 3.0 * params.r3, 20_000),
        rng.uniform(1e-6, 3.0 * params.r3, 10_000)])
    k_ok = True
    dom_ok = True
    for r in rr:
        k = k_func(float(r), params)
        if not 0.0 < k <= params.kappa_max:
            k_ok = False
            break
        if r >= params.rho:
            geom = field_geometry(Vec2(sp.x + float(r), sp.y), params)
            if k < geom.amplitude:
                dom_ok = False
                break
    ok = sat_ok and k_ok and dom_ok
    _verdict(8, ok, f"saturation confinement {sat_ok}, profile bound {k_ok}, "
                    f"profile dominates gradient {dom_ok}")


def test_criterion_09_fixed_wing_setpoints():
    """Coordinated-turn round trip exact to 1e-12; attitude error agrees
    with an independent quaternion oracle to 1e-9; equilibrium thrust
    balances drag."""
    rng = np.random.default_rng(909)
    worst_rt = 0.0
    for _ in range(1000):
        v = rng.uniform(5.0, 30.0)
        w = rng.uniform(-1.0, 1.0)
        back = -(9.81 / v) * math.tan(roll_setpoint(w, v, 9.81))
        worst_rt = max(worst_rt, abs(back - w))
    rt_ok = worst_rt <= 1e-12

    worst_att = 0.0
    for _ in range(500):
        r1 = random_rotation(rng)
        r2 = random_rotation(rng)
        worst_att = max(worst_att,
                        abs(attitude_error(r1, r2) - quat_angle(r1, r2)))
    att_ok = worst_att <= 1e-9

    uav = UavParams(v_min=16.0, v_max=18.0, mass=2.5, k_beta=0.5,
                    k_thrust=1.2, h_d=50.0, drag_coeff=0.04)
    eq_ok = all(thrust_setpoint(v, v, 0.0, uav) == uav.drag(v)
                for v in (5.0, 16.0, 23.5))
    ok = rt_ok and att_ok and eq_ok
    _verdict(9, ok, f"round-trip err {worst_rt:.1e}, attitude oracle gap "
                    f"{worst_att:.1e}, equilibrium thrust {eq_ok}")


def test_criterion_10_determinism():
    """Identical seeds give byte-identical serialized reports, for
    repeated runs and independent of the worker count."""
    sc = load_scenario(bundled_scenario("montecarlo_unicycle"))

    def run(workers):
        rep, _ = run_monte_carlo(sc.cvf, sc.ctrl, sc.sim, sc.trials,
                                 n_trials=40, master_seed=123,
                                 workers=workers)
        return rep

    reports = [run(1), run(1), run(4)]
    import os
    import tempfile

    blobs = []
    for rep in reports:
        with tempfile.NamedTemporaryFile("r+", suffix=".txt",
                                         delete=False) as fh:
            path = fh.name
        save_report(rep, path)
        with open(path, "rb") as fh:
            blobs.append(fh.read())
        os.unlink(path)
    ok = blobs[0] == blobs[1] == blobs[2]
    _verdict(10, ok, f"three runs, {len(blobs[0])} bytes each, "
                     f"byte-identical={ok}")
