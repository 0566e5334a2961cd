"""Command-line entry point.

Subcommands cover the full reproduction workflow: feasibility checking,
field sampling, integral-curve tracing, closed-loop simulation, the
Monte-Carlo metric suite and fixed-wing setpoint conversion. Progress
goes to stderr, data to files; exit code 0 on success, 1 on domain or
validation failures, 2 on usage or parse failures. All randomness flows
from --seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import fixedwing, metrics, scenario_io, simulator, vfield
from .errors import (FeasibilityError, NoPassageError,
                     NonConvergingStateError, ScenarioFormatError,
                     SingularityError)
from .vfield import Vec2

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def _log(msg: str):
    print(msg, file=sys.stderr)


def _load(args, allow_infeasible=False):
    return scenario_io.load_scenario(args.scenario,
                                     allow_infeasible=allow_infeasible)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_check_params(args) -> int:
    scenario = _load(args, allow_infeasible=True)
    curv, stab = scenario.feasibility()
    print("curvature-bound condition:")
    print(curv.describe())
    print("gain-feasibility condition:")
    print(stab.describe())
    if curv.passed and stab.passed:
        print("feasible")
        return EXIT_OK
    print("infeasible")
    return EXIT_DOMAIN


def _parse_grid(text: str):
    parts = text.split(":")
    if len(parts) != 5:
        raise argparse.ArgumentTypeError(
            "grid must be XMIN:XMAX:YMIN:YMAX:RES")
    xmin, xmax, ymin, ymax = (float(p) for p in parts[:4])
    return xmin, xmax, ymin, ymax, int(parts[4])


def _cmd_sample_field(args) -> int:
    scenario = _load(args, allow_infeasible=args.allow_infeasible)
    xmin, xmax, ymin, ymax, res = args.grid
    grid = vfield.sample_grid(scenario.cvf, xmin, xmax, ymin, ymax, res)
    out = _out_dir(args) / f"{scenario.name}_grid.txt"
    scenario_io.save_grid(grid, out)
    _log(f"wrote {res}x{res} field grid to {out}")
    return EXIT_OK


def _cmd_integral_curve(args) -> int:
    scenario = _load(args, allow_infeasible=args.allow_infeasible)
    x, y = (float(v) for v in args.start.split(","))
    curve = vfield.integral_curve(Vec2(x, y), scenario.cvf,
                                  arc_step=args.arc_step,
                                  max_len=args.max_len)
    out = _out_dir(args) / f"{scenario.name}_curve.csv"
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("arc,x,y\n")
        for s, (px, py) in zip(curve.arc_lengths(), curve.points):
            fh.write(f"{s:.17g},{px:.17g},{py:.17g}\n")
    _log(f"traced {len(curve.points)} points "
         f"({'closed loop' if curve.closed else 'length budget'}) to {out}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    scenario = _load(args, allow_infeasible=args.allow_infeasible)
    if args.allow_infeasible:
        curv, stab = scenario.feasibility()
        if not (curv.passed and stab.passed):
            _log("warning: running with infeasible parameters; "
                 "guidance guarantees do not apply")
    if scenario.initial is None:
        _log("scenario has no [initial] pose; use montecarlo for batches")
        return EXIT_DOMAIN
    sim = scenario.sim
    if args.dt is not None:
        sim = simulator.SimConfig(
            dt=args.dt, t_max=sim.t_max,
            convergence_eps_pos=sim.convergence_eps_pos,
            convergence_eps_ang=sim.convergence_eps_ang,
            integrator=sim.integrator, sample_stride=sim.sample_stride)
    traj, report = simulator.simulate(scenario.initial, scenario.cvf,
                                      scenario.ctrl, sim,
                                      loiter=scenario.loiter)
    out = _out_dir(args)
    traj_path = out / f"{scenario.name}_trajectory.csv"
    scenario_io.save_trajectory(traj, traj_path)
    rep_path = out / f"{scenario.name}_report.txt"
    with open(rep_path, "w", encoding="utf-8") as fh:
        fh.write(f"converged = {report.converged}\n")
        fh.write(f"t_converge = {report.t_converge:.17g}\n")
        fh.write(f"final_position_error = {report.final_position_error:.17g}\n")
        fh.write(f"final_theta_e = {report.final_theta_e:.17g}\n")
        fh.write(f"d_limit_set = {report.d_limit_set:.17g}\n")
        fh.write(f"theta_e_max_increase = {report.theta_e_max_increase:.17g}\n")
        fh.write(f"saturation_intervals = {report.saturation_intervals}\n")
        fh.write(f"kappa_violation_count = {report.kappa_violation_count}\n")
        fh.write(f"n_steps = {report.n_steps}\n")
    _log(f"simulated {report.n_steps} steps "
         f"({'converged at t=%.6g' % report.t_converge if report.converged else 'did not converge'})")
    _log(f"wrote {traj_path} and {rep_path}")
    return EXIT_OK if report.converged else EXIT_DOMAIN


def _cmd_montecarlo(args) -> int:
    scenario = _load(args, allow_infeasible=args.allow_infeasible)
    if scenario.trials is None:
        _log("scenario has no [trials] section")
        return EXIT_DOMAIN
    _log(f"running {args.trials} trials (seed {args.seed}, "
         f"{args.workers} worker(s))")
    dump_dir = _out_dir(args) / "trials" if args.dump_trajectories else None
    report, _results = metrics.run_monte_carlo(
        scenario.cvf, scenario.ctrl, scenario.sim, scenario.trials,
        n_trials=args.trials, master_seed=args.seed, workers=args.workers,
        dump_dir=dump_dir)
    out = _out_dir(args)
    txt = out / f"{scenario.name}_metrics.txt"
    csvp = out / f"{scenario.name}_metrics.csv"
    scenario_io.save_report(report, txt)
    scenario_io.save_report_csv(report, csvp)
    for name, value in report.items():
        _log(f"  {name} = {value}")
    _log(f"wrote {txt} and {csvp}")
    return EXIT_OK


def _cmd_setpoints(args) -> int:
    scenario = _load(args, allow_infeasible=args.allow_infeasible)
    uav = scenario_io.load_uav_params(args.uav if args.uav else args.scenario)
    traj = scenario_io.load_trajectory(args.traj)
    rows = []
    t = traj.column("t")
    xs = traj.column("x")
    ys = traj.column("y")
    vx = traj.column("v_x")
    om = traj.column("omega")
    for i in range(len(traj)):
        airspeed = max(vx[i], uav.v_min)
        # level flight at the reference height; rate from the logged
        # speed command by differencing
        if i + 1 < len(traj) and t[i + 1] > t[i]:
            vrate = (vx[i + 1] - vx[i]) / (t[i + 1] - t[i])
        elif i > 0 and t[i] > t[i - 1]:
            vrate = (vx[i] - vx[i - 1]) / (t[i] - t[i - 1])
        else:
            vrate = 0.0
        alpha = fixedwing.yaw_setpoint(Vec2(xs[i], ys[i]), scenario.cvf)
        beta = fixedwing.pitch_setpoint(uav.h_d, airspeed, uav)
        gamma = fixedwing.roll_setpoint(om[i], airspeed, uav.gravity)
        thrust = fixedwing.thrust_setpoint(airspeed, vx[i], vrate, uav)
        rows.append((t[i], alpha, beta, gamma, thrust))
    out = _out_dir(args) / f"{scenario.name}_setpoints.csv"
    scenario_io.save_setpoints(rows, out)
    _log(f"wrote {len(rows)} setpoints to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvfplan",
        description="Curvature-constrained vector-field guidance toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_out=True):
        p.add_argument("--scenario", required=True, help="scenario file path")
        p.add_argument("--allow-infeasible", action="store_true",
                       help="run even if feasibility checks fail")
        if needs_out:
            p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("check-params",
                       help="evaluate the feasibility inequalities")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=_cmd_check_params)

    p = sub.add_parser("sample-field", help="write a field-sample grid")
    add_common(p)
    p.add_argument("--grid", type=_parse_grid, required=True,
                   metavar="XMIN:XMAX:YMIN:YMAX:RES")
    p.set_defaults(func=_cmd_sample_field)

    p = sub.add_parser("integral-curve", help="trace one integral curve")
    add_common(p)
    p.add_argument("--start", required=True, metavar="X,Y")
    p.add_argument("--arc-step", type=float, default=None)
    p.add_argument("--max-len", type=float, default=None)
    p.set_defaults(func=_cmd_integral_curve)

    p = sub.add_parser("simulate", help="run the closed loop once")
    add_common(p)
    p.add_argument("--dt", type=float, default=None,
                   help="override the scenario step size")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("montecarlo", help="run a seeded trial batch")
    add_common(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--dump-trajectories", action="store_true",
                   help="write every trial's trajectory CSV under OUT/trials/")
    p.set_defaults(func=_cmd_montecarlo)

    p = sub.add_parser("setpoints",
                       help="convert a trajectory CSV to attitude/thrust "
                            "setpoints")
    add_common(p)
    p.add_argument("--traj", required=True, help="trajectory CSV path")
    p.add_argument("--uav", default=None,
                   help="file with the [uav] section (defaults to the "
                        "scenario file)")
    p.set_defaults(func=_cmd_setpoints)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioFormatError, FileNotFoundError, OSError) as exc:
        _log(f"error: {exc}")
        return EXIT_USAGE
    except (FeasibilityError, SingularityError, NonConvergingStateError,
            NoPassageError, ValueError) as exc:
        _log(f"error: {exc}")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
