"""Fixed-wing setpoint conversion under the coordinated-turn model.

Maps the planar commands (v_x, omega) onto yaw/pitch/roll attitude
setpoints and a thrust setpoint for an autopilot that flies level at a
reference altitude, plus the geodesic attitude-error metric used to
judge tracking. All functions are pure; no flight dynamics are modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .controller import Configuration, ControlParams, control
from .vfield import CvfParams, Vec2, field_geometry

__all__ = [
    "EulerAngles",
    "UavParams",
    "pitch_setpoint",
    "yaw_setpoint",
    "roll_setpoint",
    "thrust_setpoint",
    "attitude_error",
    "rotation_zyx",
    "linear_velocity_rate",
    "linear_velocity_rate_fd",
]

STANDARD_GRAVITY = 9.81


@dataclass(frozen=True)
class EulerAngles:
    """Yaw-pitch-roll attitude setpoint (z-y-x sequence); pitch must stay
    inside the open vertical range."""

    yaw: float
    pitch: float
    roll: float

    def __post_init__(self):
        if not -0.5 * math.pi < self.pitch < 0.5 * math.pi:
            raise ValueError(f"pitch must lie in (-pi/2, pi/2), got {self.pitch}")

    def as_matrix(self) -> np.ndarray:
        return rotation_zyx(self.yaw, self.pitch, self.roll)


@dataclass(frozen=True)
class UavParams:
    """Airframe and autopilot constants for the setpoint conversion.

    ``drag_model`` maps airspeed to drag force; the default is the
    quadratic c_D * V^2 with the configurable coefficient (the reference
    experiments do not specify a drag law).
    """

    v_min: float
    v_max: float
    mass: float
    k_beta: float
    k_thrust: float
    h_d: float
    gravity: float = STANDARD_GRAVITY
    drag_coeff: float = 0.05
    drag_model: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.v_min <= 0.0:
            raise ValueError("cruise flight needs v_min > 0")
        if self.v_max < self.v_min:
            raise ValueError("v_max must be at least v_min")
        if self.mass <= 0.0 or self.gravity <= 0.0:
            raise ValueError("mass and gravity must be positive")

    def drag(self, airspeed: float) -> float:
        if self.drag_model is not None:
            return self.drag_model(airspeed)
        return self.drag_coeff * airspeed * airspeed


def pitch_setpoint(h: float, airspeed: float, params: UavParams) -> float:
    """Pitch command regulating altitude toward the reference height:
    gain times altitude offset over airspeed."""
    if airspeed <= 0.0:
        raise ValueError(f"airspeed must be positive, got {airspeed}")
    return params.k_beta * (h - params.h_d) / airspeed


def yaw_setpoint(p_xy: Vec2, cvf_params: CvfParams) -> float:
    """Heading command aligning the airframe with the guidance field:
    the four-quadrant angle of the field vector at the horizontal
    position."""
    return field_geometry(p_xy, cvf_params).theta_r


def roll_setpoint(omega: float, airspeed: float,
                  gravity: float = STANDARD_GRAVITY) -> float:
    """Bank command realizing the yaw rate under the coordinated-turn
    relation yaw_rate = -(g/V) tan(roll); always in (-pi/2, pi/2)."""
    if airspeed <= 0.0:
        raise ValueError(f"airspeed must be positive, got {airspeed}")
    return -math.atan(omega * airspeed / gravity)


def thrust_setpoint(airspeed: float, v_x_cmd: float, v_x_cmd_rate: float,
                    params: UavParams) -> float:
    """Thrust tracking the commanded speed: proportional speed error plus
    commanded acceleration, mass-scaled, plus drag, clamped at zero."""
    if airspeed <= 0.0:
        raise ValueError(f"airspeed must be positive, got {airspeed}")
    force = (-params.k_thrust * (airspeed - v_x_cmd) + v_x_cmd_rate) \
        * params.mass + params.drag(airspeed)
    return max(force, 0.0)


def rotation_zyx(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Rotation matrix R_z(yaw) R_y(pitch) R_x(roll)."""
    ca, sa = math.cos(yaw), math.sin(yaw)
    cb, sb = math.cos(pitch), math.sin(pitch)
    cg, sg = math.cos(roll), math.sin(roll)
    rz = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cg, -sg], [0.0, sg, cg]])
    return rz @ ry @ rx


def _check_rotation(r: np.ndarray, tol: float = 1e-9):
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got shape {r.shape}")
    if not np.allclose(r.T @ r, np.eye(3), atol=tol, rtol=0.0):
        raise ValueError("matrix is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise ValueError("matrix determinant is not +1")
    return r


def attitude_error(r_current: np.ndarray, r_reference: np.ndarray) -> float:
    """Geodesic angle between two attitudes: the norm of the rotation
    logarithm of R R_ref^-1, in [0, pi].

    Both inputs are validated as proper rotations. The angle is recovered
    from the trace and the skew part of the relative rotation, which is
    well conditioned over the whole range including angles near pi.
    """
    r1 = _check_rotation(r_current)
    r2 = _check_rotation(r_reference)
    re = r1 @ r2.T
    # rotation angle: atan2(|skew part|, (trace - 1)/2)
    sx = 0.5 * (re[2, 1] - re[1, 2])
    sy = 0.5 * (re[0, 2] - re[2, 0])
    sz = 0.5 * (re[1, 0] - re[0, 1])
    s = math.sqrt(sx * sx + sy * sy + sz * sz)
    c = 0.5 * (np.trace(re) - 1.0)
    return math.atan2(s, c)


def linear_velocity_rate(g: Configuration, omega: float,
                         cvf_params: CvfParams, ctrl_params: ControlParams,
                         elapsed: float = 0.0) -> float:
    """Time derivative of the commanded linear velocity along the closed
    loop, for the thrust setpoint.

    Chain rule through the speed law: the tanh argument moves with the
    position (at the commanded speed, along the heading) and with the
    heading error (at omega minus the reference-orientation rate).
    """
    out = control(g, cvf_params, ctrl_params, elapsed)
    geom = field_geometry(g.p, cvf_params)
    u = ((g.p - cvf_params.target_position).norm() / ctrl_params.c_p
         + abs(out.theta_e) / ctrl_params.c_theta)
    k_v = ctrl_params.k_v
    ramp_term = 0.0
    if ctrl_params.ramp_rate > 0.0:
        decay = math.exp(-ctrl_params.ramp_rate * elapsed)
        ramp_term = k_v * ctrl_params.ramp_rate * decay * math.tanh(u)
        k_v *= 1.0 - decay
    h = Vec2(math.cos(g.theta), math.sin(g.theta))
    dp = g.p - cvf_params.target_position
    dist = dp.norm()
    ddist = out.v_x * dp.dot(h) / dist if dist > 0.0 else 0.0
    theta_e_rate = omega - out.v_x * geom.grad_theta_r.dot(h)
    du = ddist / ctrl_params.c_p
    if out.theta_e != 0.0:
        du += math.copysign(1.0, out.theta_e) * theta_e_rate / ctrl_params.c_theta
    sech2 = 1.0 / math.cosh(u) ** 2
    return k_v * sech2 * du + ramp_term


def linear_velocity_rate_fd(g: Configuration, omega: float,
                            cvf_params: CvfParams, ctrl_params: ControlParams,
                            elapsed: float = 0.0, dt: float = 1e-7) -> float:
    """Finite-difference check of `linear_velocity_rate`: advances the
    kinematics by a small step under (v_x, omega) and differences the
    speed command."""
    from .simulator import step  # local import avoids a cycle

    out = control(g, cvf_params, ctrl_params, elapsed)
    g_fwd = step(g, (out.v_x, omega), dt)
    out_fwd = control(g_fwd, cvf_params, ctrl_params, elapsed + dt)
    return (out_fwd.v_x - out.v_x) / dt
