"""Scenario parsing, validation and serialization round-trips."""

import math

import numpy as np
import pytest

from cvfplan import (Configuration, ControlParams, FeasibilityError,
                     SimConfig, TrialBatchSpec, Vec2, bundled_scenario,
                     bundled_scenario_names, load_scenario, save_scenario,
                     save_trajectory, simulate)
from cvfplan.errors import ScenarioFormatError
from cvfplan.metrics import MetricsReport
from cvfplan import sample_grid
from cvfplan.scenario_io import (load_report, load_trajectory,
                                 load_uav_params, parse_number,
                                 report_csv_lines, save_grid, save_report,
                                 save_report_csv, Scenario)


class TestParseNumber:
    @pytest.mark.parametrize("text,value", [
        ("1.5", 1.5),
        ("-3", -3.0),
        ("pi", math.pi),
        ("5pi/4", 5 * math.pi / 4),
        ("-pi/2", -math.pi / 2),
        ("2pi/3", 2 * math.pi / 3),
        ("4*sqrt(3)", 4 * math.sqrt(3)),
        ("-4*sqrt(2)", -4 * math.sqrt(2)),
        ("1e-3", 1e-3),
        ("3 + 0.5", 3.5),
        ("2**3", 8.0),
    ])
    def test_values(self, text, value):
        assert parse_number(text) == pytest.approx(value, rel=1e-15)

    @pytest.mark.parametrize("text", [
        "import os", "__import__('os')", "x", "sqrt(2, 3)", "foo(1)", "",
    ])
    def test_rejects_junk(self, text):
        with pytest.raises(ScenarioFormatError):
            parse_number(text)


class TestBundledScenarios:
    def test_inventory(self):
        names = bundled_scenario_names()
        for i in range(1, 8):
            assert f"table1_exp{i}" in names
        assert "montecarlo_unicycle" in names
        assert "uav_loiter" in names

    def test_experiment_one_values(self):
        sc = load_scenario(bundled_scenario("table1_exp1"))
        assert sc.initial.p == Vec2(0.0, 0.5)
        # headings compare modulo 2*pi (poses are stored wrapped)
        assert math.cos(sc.initial.theta) \
            == pytest.approx(math.cos(5 * math.pi / 4), abs=1e-15)
        assert math.sin(sc.initial.theta) \
            == pytest.approx(math.sin(5 * math.pi / 4), abs=1e-15)
        assert sc.cvf.target_position.x == 4.0
        assert sc.cvf.target_position.y == pytest.approx(4 * math.sqrt(3))
        assert sc.cvf.target_heading == pytest.approx(5 * math.pi / 6)
        assert sc.cvf.r1 == 4.0 and sc.cvf.r2 == 8.0 and sc.cvf.r3 == 12.0

    def test_all_experiments_share_origin_singularity(self):
        # every reference target pose puts the field's singular point at
        # the origin
        for i in range(1, 8):
            sc = load_scenario(bundled_scenario(f"table1_exp{i}"))
            assert sc.cvf.singular_point.norm() < 1e-12

    def test_missing_name_raises(self):
        with pytest.raises(FileNotFoundError):
            bundled_scenario("table9_exp0")


class TestValidation:
    def write(self, tmp_path, r1="4", r2="8", r3="12", kappa="1"):
        p = tmp_path / "sc.cfg"
        p.write_text(f"""
[scenario]
name = t
[cvf]
target_x_m = {r2}
target_y_m = 0
target_heading_rad = pi/2
r1_m = {r1}
r2_m = {r2}
r3_m = {r3}
kappa_max_per_m = {kappa}
[control]
v_min_mps = 0
v_max_mps = 1
c_p_m = 12
c_theta_rad = pi
k_omega_max_per_s = 1
[sim]
dt_s = 1e-3
t_max_s = 10
[initial]
x_m = 1
y_m = 1
theta_rad = 0
""")
        return p

    def test_feasible_loads(self, tmp_path):
        sc = load_scenario(self.write(tmp_path))
        assert sc.cvf.r1 == 4.0

    def test_narrow_ring_rejected_by_name(self, tmp_path):
        p = self.write(tmp_path, r1="6", r2="8.5")
        with pytest.raises(FeasibilityError) as err:
            load_scenario(p)
        assert "r2 - r1 >= 3*rho" in str(err.value)

    def test_gain_violation_named(self, tmp_path):
        p = self.write(tmp_path, r1="0.9")
        with pytest.raises(FeasibilityError) as err:
            load_scenario(p)
        assert "1/r1 + 1/(r2 - r1) <= kappa_max" in str(err.value)

    def test_allow_infeasible_bypasses(self, tmp_path):
        p = self.write(tmp_path, r1="6", r2="8.5")
        sc = load_scenario(p, allow_infeasible=True)
        assert not sc.feasibility()[0].passed

    def test_missing_key_reported(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("[scenario]\nname = x\n[cvf]\nr1_m = 4\n")
        with pytest.raises(ScenarioFormatError):
            load_scenario(p)

    def test_malformed_file_reported(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("this is not an ini file\n")
        with pytest.raises(ScenarioFormatError):
            load_scenario(p)

    def test_needs_initial_or_trials(self, tmp_path):
        p = self.write(tmp_path)
        text = p.read_text().split("[initial]")[0]
        p.write_text(text)
        with pytest.raises(ScenarioFormatError):
            load_scenario(p)


class TestRoundTrips:
    def test_scenario_round_trip(self, tmp_path, desk_params):
        sc = Scenario(
            name="rt", variant="loiter", cvf=desk_params,
            ctrl=ControlParams(v_min=0.25, v_max=2.75, c_p=11.5,
                               c_theta=2.9, k_omega_max=1.25, ramp_rate=0.3),
            sim=SimConfig(dt=2e-3, t_max=123.0, convergence_eps_pos=0.02,
                          convergence_eps_ang=0.015, integrator="euler",
                          sample_stride=5),
            initial=Configuration(Vec2(-3.25, 4.5), 0.7),
            trials=TrialBatchSpec(x_min=-7.0, x_max=7.0, y_min=-6.0,
                                  y_max=6.0, n_targets=3, target_phase=0.4,
                                  loiter=True, passage_tol=0.3,
                                  curve_arc_step=0.02, curve_max_len=100.0))
        path = tmp_path / "rt.cfg"
        save_scenario(sc, path)
        back = load_scenario(path)
        assert back == sc

    def test_trajectory_round_trip(self, tmp_path, desk_params, desk_ctrl):
        cfg = SimConfig(dt=1e-3, t_max=0.05, convergence_eps_pos=1e-12,
                        convergence_eps_ang=1e-12)
        traj, _ = simulate(Configuration(Vec2(-6.0, 2.0), 0.5),
                           desk_params, desk_ctrl, cfg)
        path = tmp_path / "traj.csv"
        save_trajectory(traj, path)
        back = load_trajectory(path)
        assert np.array_equal(back.data, traj.data)

    def test_empty_trajectory_header_only(self, tmp_path):
        from cvfplan import Trajectory
        traj = Trajectory(data=np.zeros((0, 12)), dt=1e-3, sample_stride=1)
        path = tmp_path / "empty.csv"
        save_trajectory(traj, path)
        lines = path.read_text().splitlines()
        assert lines == ["t,x,y,theta,v_x,omega,omega_unsat,k_omega,"
                         "theta_e,r_delta,saturated,kappa"]

    def test_report_round_trip(self, tmp_path):
        rep = MetricsReport(pct_curvature_ok=1.0,
                            relative_length=4.123456789012345,
                            pct_input_ok=1.0,
                            avg_curvature=0.14151617181920212,
                            avg_time=28.522822232425262,
                            omega_rmse=0.0589,
                            n_trials=1000, n_converged=1000, n_redrawn=2,
                            master_seed=42)
        path = tmp_path / "rep.txt"
        save_report(rep, path)
        assert load_report(path) == rep
        header, row = report_csv_lines(rep)
        assert header.split(",")[0] == "pct_curvature_ok"
        assert len(row.split(",")) == len(header.split(","))
        save_report_csv(rep, tmp_path / "rep.csv")
        lines = (tmp_path / "rep.csv").read_text().splitlines()
        assert lines == [header, row]

    def test_grid_file_format(self, tmp_path, desk_params):
        grid = sample_grid(desk_params, -1.0, 1.0, -1.0, 1.0, 3)
        path = tmp_path / "grid.txt"
        save_grid(grid, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x y Tx Ty theta_r kappa region"
        assert len(lines) == 1 + 9
        first = lines[1].split(" ")
        assert len(first) == 7
        # 17 significant digits survive a float round-trip
        assert float(first[2]) == grid.tx[0]

    def test_uav_params_loaded(self):
        uav = load_uav_params(bundled_scenario("uav_loiter"))
        assert uav.v_min == 3.0
        assert uav.mass == 2.0
        assert uav.h_d == 50.0
