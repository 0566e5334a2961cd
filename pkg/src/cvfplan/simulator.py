"""Closed-loop unicycle simulation and convergence reporting.

Integrates the planar nonholonomic kinematics (x' = v cos theta,
y' = v sin theta, theta' = omega) under the tracking controller with a
fixed step, logs time-stamped samples with full control diagnostics, and
detects convergence to the target (or to the loiter cycle for robots
with a positive speed floor).

The default integrator evaluates the control law at every integrator
stage, so the integrated system is the continuous closed loop the
convergence analysis describes; `step` applies a fixed input over one
step (zero-order hold) for callers that supply their own command
schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .controller import Configuration, ControlOutput, ControlParams
from .errors import NonConvergingStateError, SingularityError
from .vfield import CvfParams, Vec2, field_geometry

__all__ = [
    "SimConfig",
    "Trajectory",
    "ConvergenceReport",
    "step",
    "simulate",
    "distance_to_limit_set",
    "passage_events",
]

TRAJECTORY_COLUMNS = ("t", "x", "y", "theta", "v_x", "omega", "omega_unsat",
                      "k_omega", "theta_e", "r_delta", "saturated", "kappa")


@dataclass(frozen=True)
class SimConfig:
    """Integration settings and stopping thresholds.

    ``convergence_eps_pos`` / ``convergence_eps_ang`` default to one
    percent of the turning radius and 0.01 rad when left as None.
    ``sample_stride`` stores every n-th step in the trajectory (the final
    step is always stored); per-step diagnostics are computed at full
    rate regardless.
    """

    dt: float = 1e-3
    t_max: float = 600.0
    convergence_eps_pos: float | None = None
    convergence_eps_ang: float | None = None
    integrator: str = "rk4"
    sample_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_max <= 0.0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.integrator not in ("euler", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be at least 1")

    def eps_pos(self, params: CvfParams) -> float:
        return (0.01 * params.rho if self.convergence_eps_pos is None
                else self.convergence_eps_pos)

    def eps_ang(self) -> float:
        return 0.01 if self.convergence_eps_ang is None else self.convergence_eps_ang


@dataclass(frozen=True)
class Trajectory:
    """Columnar log of a run; one row per stored sample."""

    data: np.ndarray            # (n, 12), TRAJECTORY_COLUMNS order
    dt: float
    sample_stride: int

    def __len__(self) -> int:
        return len(self.data)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, TRAJECTORY_COLUMNS.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    def configuration(self, i: int) -> Configuration:
        row = self.data[i]
        return Configuration(Vec2(row[1], row[2]), row[3])

    def control_output(self, i: int) -> ControlOutput:
        row = self.data[i]
        # the feedforward and reference orientation are not logged
        # columns but follow exactly from the logged ones
        omega_ff = row[6] + row[7] * row[8]
        theta_r = _k.wrap_angle(row[3] - row[8])
        return ControlOutput(v_x=row[4], omega=row[5], omega_unsat=row[6],
                             k_omega=row[7], theta_e=row[8], r_delta=row[9],
                             saturated=bool(row[10]), omega_ff=omega_ff,
                             theta_r=theta_r)

    @property
    def kappa(self) -> np.ndarray:
        """Per-sample commanded curvature |omega|/v_x (0 where v_x = 0)."""
        return self.data[:, 11]


@dataclass(frozen=True)
class ConvergenceReport:
    """Aggregated diagnostics of a run, computed at full step rate."""

    converged: bool
    t_converge: float                       # NaN if not converged
    final_position_error: float
    final_theta_e: float
    d_limit_set: float                      # signed r_delta - r2 at the end
    theta_e_max_increase: float             # worst per-step growth of |theta_e|
    theta_e_max_abs: float
    saturation_intervals: tuple[tuple[float, float], ...]
    saturated_r_delta_max: float            # largest r_delta while saturated
    kappa_violation_count: int              # samples with |omega|/v_x > kappa_max
    kappa_ratio_margin_max: float           # max of |omega|/v_x - kappa_max
    mean_abs_kappa: float                   # time-average of |omega|/v_x
    omega_rmse: float                       # RMS of successive omega differences
    n_steps: int
    t_end: float
    aborted_singular: bool = False


def step(g: Configuration, u: tuple[float, float], dt: float,
         integrator: str = "rk4") -> Configuration:
    """Advance the kinematics one step under a fixed input u = (v_x, omega).

    The input is held constant across the step (zero-order hold); the
    heading is re-wrapped to (-pi, pi].
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if integrator not in ("euler", "rk4"):
        raise ValueError(f"unknown integrator {integrator!r}")
    x, y, th = _k.step_fixed(g.p.x, g.p.y, g.theta, u[0], u[1], dt,
                             integrator == "rk4")
    return Configuration(Vec2(x, y), th)


def _check_initial_state(g0: Configuration, cvf_params: CvfParams,
                         ctrl_params: ControlParams, eps_n: float = 1e-12):
    sp = cvf_params.singular_point
    rd = (g0.p - sp).norm()
    if rd <= cvf_params.singular_guard:
        raise NonConvergingStateError("initial position is the singular point")
    geom = field_geometry(g0.p, cvf_params)
    te = _k.wrap_angle(g0.theta - geom.theta_r)
    if math.pi - abs(te) < eps_n:
        raise NonConvergingStateError(
            f"initial heading error |{te:.15g}| lies on the non-converging set")
    if (abs(rd - cvf_params.rho) < eps_n
            and abs(abs(te) - 0.5 * math.pi) < eps_n):
        raise NonConvergingStateError(
            "initial state circulates the saturation disk with vanishing gain")


def simulate(g0: Configuration, cvf_params: CvfParams,
             ctrl_params: ControlParams, sim_config: SimConfig,
             loiter: bool = False) -> tuple[Trajectory, ConvergenceReport]:
    """Run the closed loop from ``g0`` until convergence or ``t_max``.

    Parameters
    ----------
    g0 : Configuration
        Initial pose; membership of the non-converging set is rejected.
    loiter : bool
        When True the stop rule tracks the limit cycle (|r_delta - r2|
        and heading gap) instead of the target configuration; use for
        robots with v_min > 0 that pass through the target repeatedly.

    Returns (Trajectory, ConvergenceReport). Raises SingularityError if
    the trajectory enters the singular guard disk (a measure-zero event
    under feasible parameters).
    """
    _check_initial_state(g0, cvf_params, ctrl_params)
    # resolve the heading across one turning circle with >= 10 samples
    dt_guard = cvf_params.rho / (10.0 * ctrl_params.v_max) \
        if ctrl_params.v_max > 0.0 else math.inf
    if sim_config.dt > dt_guard:
        raise ValueError(
            f"dt={sim_config.dt} too coarse for rho/(10*v_max)={dt_guard:.6g}")

    n_max = int(round(sim_config.t_max / sim_config.dt))
    stride = sim_config.sample_stride
    cap = n_max // stride + 3
    out = np.empty((cap, 12), dtype=np.float64)
    # feasible runs saturate on a handful of intervals; overflow beyond
    # the cap is still counted, just not stored
    sat_starts = np.empty(64, dtype=np.float64)
    sat_ends = np.empty(64, dtype=np.float64)
    sp = cvf_params.singular_point

    (m, status, n_steps, t_end, te_inc, te_max, sat_rd_max, n_int,
     kappa_viol, kappa_margin, ksum, kcnt, dwsq, dwcnt,
     d_e, te_final, dist_final) = _k.simulate_core(
        g0.p.x, g0.p.y, g0.theta, sim_config.dt, n_max,
        cvf_params.target_position.x, cvf_params.target_position.y,
        sp.x, sp.y, cvf_params.r1, cvf_params.r2, cvf_params.r3,
        cvf_params.kappa_max, cvf_params.rho,
        ctrl_params.v_min, ctrl_params.k_v, ctrl_params.c_p,
        ctrl_params.c_theta, ctrl_params.k_omega_max, ctrl_params.ramp_rate,
        sim_config.eps_pos(cvf_params), sim_config.eps_ang(),
        loiter, sim_config.integrator == "rk4",
        cvf_params.singular_guard, stride, out, sat_starts, sat_ends)

    if status == _k.SIM_SINGULAR_ABORT:
        raise SingularityError(
            f"trajectory entered the singular guard disk at t={t_end:.6g}")

    traj = Trajectory(data=out[:m].copy(), dt=sim_config.dt,
                      sample_stride=stride)
    n_stored_int = min(n_int, len(sat_starts))
    intervals = tuple((float(sat_starts[i]), float(sat_ends[i]))
                      for i in range(n_stored_int))
    converged = status == _k.SIM_CONVERGED
    report = ConvergenceReport(
        converged=converged,
        t_converge=t_end if converged else math.nan,
        final_position_error=dist_final,
        final_theta_e=te_final,
        d_limit_set=d_e,
        theta_e_max_increase=te_inc,
        theta_e_max_abs=te_max,
        saturation_intervals=intervals,
        saturated_r_delta_max=sat_rd_max,
        kappa_violation_count=int(kappa_viol),
        kappa_ratio_margin_max=kappa_margin,
        mean_abs_kappa=ksum / kcnt if kcnt else 0.0,
        omega_rmse=math.sqrt(dwsq / dwcnt) if dwcnt else 0.0,
        n_steps=int(n_steps),
        t_end=t_end,
    )
    return traj, report


def distance_to_limit_set(g: Configuration,
                          cvf_params: CvfParams) -> tuple[float, float]:
    """Signed radial gap to the loiter cycle and the heading gap.

    Returns (d_e, theta_gap) with d_e = r_delta - r2 (negative inside the
    cycle) and theta_gap the wrapped difference between the heading and
    the reference orientation.
    """
    geom = field_geometry(g.p, cvf_params)
    return geom.r_delta - cvf_params.r2, _k.wrap_angle(g.theta - geom.theta_r)


def passage_events(traj: Trajectory, g_d: Configuration,
                   eps: float) -> list[float]:
    """Times of close approaches to a configuration.

    An event is a local minimum of the configuration distance
    sqrt(|p - p_d|^2 + wrap(theta - theta_d)^2) that falls below ``eps``;
    for loiter runs these recur once per revolution. Endpoints count as
    local minima on their open side.
    """
    if len(traj) == 0:
        return []
    dx = traj.column("x") - g_d.p.x
    dy = traj.column("y") - g_d.p.y
    dth = np.mod(traj.column("theta") - g_d.theta + math.pi,
                 2.0 * math.pi) - math.pi
    d = np.sqrt(dx * dx + dy * dy + dth * dth)
    t = traj.t
    events: list[float] = []
    n = len(d)
    if n == 1:
        return [float(t[0])] if d[0] < eps else []
    for i in range(n):
        if d[i] >= eps:
            continue
        # strict decrease on the left makes a plateau yield one event,
        # at its first sample
        left_ok = i == 0 or d[i] < d[i - 1]
        right_ok = i == n - 1 or d[i] <= d[i + 1]
        if left_ok and right_ok:
            events.append(float(t[i]))
    return events
