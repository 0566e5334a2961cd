"""Scenario files, result serialization and bundled reference scenarios.

Scenario files are flat INI-style key/value sections with units spelled
in the key names (``r1_m``, ``kappa_max_per_m``, ...). Numeric values
accept arithmetic expressions over ``pi`` and ``sqrt`` (``5pi/4``,
``4*sqrt(3)``, ``-pi/2``) so angle tables can be written verbatim.
Loading validates the feasibility inequalities unless explicitly asked
not to. Writers emit the CSV/text formats consumed by external plotting
tools; all floats carry 17 significant digits so round-trips are exact.
"""

from __future__ import annotations

import ast
import configparser
import csv
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

from .controller import Configuration, ControlParams
from .errors import FeasibilityError, ScenarioFormatError
from .fixedwing import UavParams
from .metrics import MetricsReport, TrialBatchSpec
from .simulator import TRAJECTORY_COLUMNS, SimConfig, Trajectory
from .vfield import (CvfParams, FeasibilityReport, GridSample, Vec2,
                     check_curvature_condition, check_stabilization_condition)

__all__ = [
    "Scenario",
    "load_scenario",
    "save_scenario",
    "load_uav_params",
    "save_trajectory",
    "load_trajectory",
    "save_report",
    "load_report",
    "report_csv_lines",
    "save_report_csv",
    "save_grid",
    "save_setpoints",
    "bundled_scenario",
    "bundled_scenario_names",
    "parse_number",
]

_FLOAT_FMT = "%.17g"

# "5pi/4" and friends: insert the multiplication the shorthand omits.
_IMPLICIT_PI = re.compile(r"(\d(?:\.\d*)?)\s*(pi|sqrt)\b")


def parse_number(text: str) -> float:
    """Evaluate a numeric scenario value: literals and arithmetic over
    ``pi`` and ``sqrt(...)``."""
    src = _IMPLICIT_PI.sub(r"\1*\2", text.strip())
    try:
        node = ast.parse(src, mode="eval").body
        return _eval_node(node)
    except (SyntaxError, ValueError) as exc:
        raise ScenarioFormatError(f"cannot parse number {text!r}: {exc}") from exc


def _eval_node(node: ast.AST) -> float:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and isinstance(
            node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)):
        a = _eval_node(node.left)
        b = _eval_node(node.right)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        if isinstance(node.op, ast.Mult):
            return a * b
        if isinstance(node.op, ast.Div):
            return a / b
        return a ** b
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id == "sqrt" and len(node.args) == 1
            and not node.keywords):
        return math.sqrt(_eval_node(node.args[0]))
    raise ValueError(f"unsupported expression element {ast.dump(node)}")


@dataclass(frozen=True)
class Scenario:
    """A complete run description: field and control parameters, the
    integration setup, and either a single initial pose or a trial-batch
    distribution."""

    name: str
    variant: str                      # "converge" or "loiter"
    cvf: CvfParams
    ctrl: ControlParams
    sim: SimConfig
    initial: Configuration | None = None
    trials: TrialBatchSpec | None = None

    @property
    def loiter(self) -> bool:
        return self.variant == "loiter"

    def feasibility(self) -> tuple[FeasibilityReport, FeasibilityReport]:
        return (check_curvature_condition(self.cvf),
                check_stabilization_condition(self.cvf))


class _SectionReader:
    def __init__(self, parser: configparser.ConfigParser, section: str,
                 path: str):
        self._p = parser
        self._s = section
        self._path = path

    def has(self, key: str) -> bool:
        return self._p.has_option(self._s, key)

    def raw(self, key: str, default: str | None = None) -> str:
        if not self._p.has_option(self._s, key):
            if default is not None:
                return default
            raise ScenarioFormatError(
                f"{self._path}: missing key {key!r} in section [{self._s}]")
        return self._p.get(self._s, key)

    def number(self, key: str, default: float | None = None) -> float:
        if not self._p.has_option(self._s, key) and default is not None:
            return default
        return parse_number(self.raw(key))

    def integer(self, key: str, default: int | None = None) -> int:
        if not self._p.has_option(self._s, key) and default is not None:
            return default
        return int(self.raw(key))


def load_scenario(path: str | Path, allow_infeasible: bool = False) -> Scenario:
    """Load and validate a scenario file.

    Raises ScenarioFormatError on parse problems and FeasibilityError
    (naming every violated inequality) when the parameters fail the
    curvature or gain conditions, unless ``allow_infeasible`` is set.
    """
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except OSError:
        raise
    except configparser.Error as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc

    def section(name: str, required: bool = True) -> _SectionReader | None:
        if not parser.has_section(name):
            if required:
                raise ScenarioFormatError(f"{path}: missing section [{name}]")
            return None
        return _SectionReader(parser, name, str(path))

    meta = section("scenario")
    name = meta.raw("name", default=path.stem)
    variant = meta.raw("variant", default="converge").strip()
    if variant not in ("converge", "loiter"):
        raise ScenarioFormatError(
            f"{path}: variant must be converge or loiter, got {variant!r}")

    c = section("cvf")
    try:
        cvf = CvfParams(
            target_position=Vec2(c.number("target_x_m"), c.number("target_y_m")),
            target_heading=c.number("target_heading_rad"),
            r1=c.number("r1_m"), r2=c.number("r2_m"), r3=c.number("r3_m"),
            kappa_max=c.number("kappa_max_per_m"))
    except ValueError as exc:
        raise ScenarioFormatError(f"{path}: [cvf] {exc}") from exc

    k = section("control")
    try:
        ctrl = ControlParams(
            v_min=k.number("v_min_mps"), v_max=k.number("v_max_mps"),
            c_p=k.number("c_p_m"), c_theta=k.number("c_theta_rad"),
            k_omega_max=k.number("k_omega_max_per_s"),
            ramp_rate=k.number("ramp_rate_per_s", default=0.0))
    except ValueError as exc:
        raise ScenarioFormatError(f"{path}: [control] {exc}") from exc

    s = section("sim")
    eps_pos = s.number("eps_pos_m") if s.has("eps_pos_m") else None
    eps_ang = s.number("eps_ang_rad") if s.has("eps_ang_rad") else None
    try:
        sim = SimConfig(
            dt=s.number("dt_s", default=1e-3),
            t_max=s.number("t_max_s", default=600.0),
            convergence_eps_pos=eps_pos,
            convergence_eps_ang=eps_ang,
            integrator=s.raw("integrator", default="rk4").strip(),
            sample_stride=s.integer("sample_stride", default=1))
    except ValueError as exc:
        raise ScenarioFormatError(f"{path}: [sim] {exc}") from exc

    initial = None
    init = section("initial", required=False)
    if init is not None:
        initial = Configuration(
            Vec2(init.number("x_m"), init.number("y_m")),
            init.number("theta_rad"))

    trials = None
    tr = section("trials", required=False)
    if tr is not None:
        rho = cvf.rho
        trials = TrialBatchSpec(
            x_min=tr.number("x_min_m", default=-15.0 * rho),
            x_max=tr.number("x_max_m", default=15.0 * rho),
            y_min=tr.number("y_min_m", default=-15.0 * rho),
            y_max=tr.number("y_max_m", default=15.0 * rho),
            n_targets=tr.integer("n_targets", default=4),
            target_phase=tr.number("target_phase_rad", default=0.0),
            loiter=variant == "loiter",
            passage_tol=tr.number("passage_tol_m", default=0.55 * rho),
            curve_arc_step=tr.number("curve_arc_step_m", default=rho / 100.0),
            curve_max_len=tr.number("curve_max_len_m", default=20.0 * cvf.r3))

    if initial is None and trials is None:
        raise ScenarioFormatError(
            f"{path}: scenario needs an [initial] pose or a [trials] section")

    scenario = Scenario(name=name, variant=variant, cvf=cvf, ctrl=ctrl,
                        sim=sim, initial=initial, trials=trials)
    if not allow_infeasible:
        curv, stab = scenario.feasibility()
        violations = curv.violations + stab.violations
        if violations:
            lines = "; ".join(v.describe() for v in violations)
            raise FeasibilityError(
                f"{path}: infeasible parameters: {lines}")
    return scenario


def save_scenario(scenario: Scenario, path: str | Path):
    """Write a scenario file that loads back to identical values."""
    parser = configparser.ConfigParser()
    f = lambda v: _FLOAT_FMT % v
    parser["scenario"] = {"name": scenario.name, "variant": scenario.variant}
    cv = scenario.cvf
    parser["cvf"] = {
        "target_x_m": f(cv.target_position.x),
        "target_y_m": f(cv.target_position.y),
        "target_heading_rad": f(cv.target_heading),
        "r1_m": f(cv.r1), "r2_m": f(cv.r2), "r3_m": f(cv.r3),
        "kappa_max_per_m": f(cv.kappa_max),
    }
    ct = scenario.ctrl
    parser["control"] = {
        "v_min_mps": f(ct.v_min), "v_max_mps": f(ct.v_max),
        "c_p_m": f(ct.c_p), "c_theta_rad": f(ct.c_theta),
        "k_omega_max_per_s": f(ct.k_omega_max),
        "ramp_rate_per_s": f(ct.ramp_rate),
    }
    sc = scenario.sim
    sim_section = {
        "dt_s": f(sc.dt), "t_max_s": f(sc.t_max),
        "integrator": sc.integrator,
        "sample_stride": str(sc.sample_stride),
    }
    if sc.convergence_eps_pos is not None:
        sim_section["eps_pos_m"] = f(sc.convergence_eps_pos)
    if sc.convergence_eps_ang is not None:
        sim_section["eps_ang_rad"] = f(sc.convergence_eps_ang)
    parser["sim"] = sim_section
    if scenario.initial is not None:
        parser["initial"] = {
            "x_m": f(scenario.initial.p.x),
            "y_m": f(scenario.initial.p.y),
            "theta_rad": f(scenario.initial.theta),
        }
    if scenario.trials is not None:
        tb = scenario.trials
        parser["trials"] = {
            "x_min_m": f(tb.x_min), "x_max_m": f(tb.x_max),
            "y_min_m": f(tb.y_min), "y_max_m": f(tb.y_max),
            "n_targets": str(tb.n_targets),
            "target_phase_rad": f(tb.target_phase),
            "passage_tol_m": f(tb.passage_tol),
            "curve_arc_step_m": f(tb.curve_arc_step),
            "curve_max_len_m": f(tb.curve_max_len),
        }
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def load_uav_params(path: str | Path) -> UavParams:
    """Read airframe constants from the [uav] section of a config file."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except configparser.Error as exc:
        raise ScenarioFormatError(f"{path}: {exc}") from exc
    if not parser.has_section("uav"):
        raise ScenarioFormatError(f"{path}: missing section [uav]")
    u = _SectionReader(parser, "uav", str(path))
    try:
        return UavParams(
            v_min=u.number("v_min_mps"),
            v_max=u.number("v_max_mps"),
            mass=u.number("mass_kg"),
            k_beta=u.number("k_beta_per_s"),
            k_thrust=u.number("k_thrust_per_s"),
            h_d=u.number("h_d_m"),
            gravity=u.number("gravity_mps2", default=9.81),
            drag_coeff=u.number("drag_coeff", default=0.05))
    except ValueError as exc:
        raise ScenarioFormatError(f"{path}: [uav] {exc}") from exc


def save_trajectory(traj: Trajectory, path: str | Path):
    """Write the trajectory CSV (fixed column set, 17 significant
    digits, saturated as 0/1)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for row in traj.data:
            cells = [_FLOAT_FMT % v for v in row]
            cells[10] = str(int(row[10]))
            fh.write(",".join(cells) + "\n")


def load_trajectory(path: str | Path) -> Trajectory:
    """Read a trajectory CSV written by `save_trajectory`."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRAJECTORY_COLUMNS:
            raise ScenarioFormatError(
                f"{path}: unexpected trajectory header {header}")
        rows = [[float(cell) for cell in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(TRAJECTORY_COLUMNS))
    dt = data[1, 0] - data[0, 0] if len(rows) > 1 else 0.0
    return Trajectory(data=data, dt=dt, sample_stride=1)


def save_report(report: MetricsReport, path: str | Path):
    """Write the metrics report as flat key = value lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for name, value in report.items():
            if isinstance(value, float):
                fh.write(f"{name} = {_FLOAT_FMT % value}\n")
            else:
                fh.write(f"{name} = {value}\n")


def load_report(path: str | Path) -> MetricsReport:
    """Read back a key = value metrics report."""
    values: dict[str, float | int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            values[key] = int(raw) if key.startswith("n_") or key == "master_seed" \
                else float(raw)
    return MetricsReport(**values)  # type: ignore[arg-type]


def report_csv_lines(report: MetricsReport) -> tuple[str, str]:
    """Header and row for the single-line CSV form of a report."""
    names = [name for name, _ in report.items()]
    cells = [(_FLOAT_FMT % v) if isinstance(v, float) else str(v)
             for _, v in report.items()]
    return ",".join(names), ",".join(cells)


def save_report_csv(report: MetricsReport, path: str | Path):
    header, row = report_csv_lines(report)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        fh.write(row + "\n")


def save_grid(grid: GridSample, path: str | Path):
    """Write the field-sampler table: header line then one
    space-separated row per grid point."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(grid.HEADER + "\n")
        for row in grid.rows():
            fh.write(row + "\n")


def save_setpoints(rows: Iterable[tuple[float, float, float, float, float]],
                   path: str | Path):
    """Write the attitude/thrust setpoint CSV companion to a trajectory:
    t, yaw, pitch, roll, thrust per row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,alpha_d,beta_d,gamma_d,F_T\n")
        for row in rows:
            fh.write(",".join(_FLOAT_FMT % v for v in row) + "\n")


def bundled_scenario_names() -> list[str]:
    """Names of the scenario files shipped with the package."""
    pkg = resources.files("cvfplan") / "scenarios"
    return sorted(p.name[:-4] for p in pkg.iterdir() if p.name.endswith(".cfg"))


def bundled_scenario(name: str) -> Path:
    """Filesystem path of a bundled scenario (e.g. ``table1_exp1``)."""
    pkg = resources.files("cvfplan") / "scenarios" / f"{name}.cfg"
    if not pkg.is_file():
        raise FileNotFoundError(
            f"no bundled scenario {name!r}; available: "
            f"{', '.join(bundled_scenario_names())}")
    return Path(str(pkg))
