"""Saturated tracking control laws with state-dependent dynamic gain.

The linear velocity interpolates between user bounds through a tanh of
the configuration error; the angular velocity combines a feedback term
on the heading error with the feedforward rate of the field's reference
orientation, then clamps to the curvature-compatible bound
``v_x * kappa_max``. The feedback gain shrinks near the singular point
so that the clamp can only engage inside the disk of one turning radius
around it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import _kernels as _k
from .errors import NonConvergingStateError, SingularityError
from .vfield import CvfParams, FieldGeometry, Vec2, field_geometry

__all__ = [
    "Configuration",
    "ControlParams",
    "ControlOutput",
    "orientation_error",
    "linear_velocity",
    "feedforward",
    "k_func",
    "dynamic_gain",
    "saturated_omega",
    "control",
]

# |theta_e| within this distance of pi counts as the non-converging
# orientation set; exact membership is measure zero.
_N_THETA_TOL = 1e-12


@dataclass(frozen=True)
class Configuration:
    """Planar pose; the heading is normalized to (-pi, pi] on creation."""

    p: Vec2
    theta: float

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        object.__setattr__(self, "theta", _k.wrap_angle(self.theta))


@dataclass(frozen=True)
class ControlParams:
    """Velocity bounds, shaping constants and the gain cap.

    ``ramp_rate`` > 0 scales the velocity gain by (1 - exp(-ramp_rate*t))
    so commands start from v_min; 0 disables the ramp. ``v_max == v_min``
    is allowed and yields a constant linear velocity (cruise-speed
    robots).
    """

    v_min: float
    v_max: float
    c_p: float
    c_theta: float
    k_omega_max: float
    ramp_rate: float = 0.0

    def __post_init__(self):
        if self.v_min < 0.0:
            raise ValueError(f"v_min must be nonnegative, got {self.v_min}")
        if self.v_max < self.v_min:
            raise ValueError(
                f"v_max must be at least v_min, got {self.v_max} < {self.v_min}")
        if self.c_p <= 0.0 or self.c_theta <= 0.0:
            raise ValueError("c_p and c_theta must be positive")
        if self.k_omega_max <= 0.0:
            raise ValueError("k_omega_max must be positive")
        if self.ramp_rate < 0.0:
            raise ValueError("ramp_rate must be nonnegative")

    @property
    def k_v(self) -> float:
        return self.v_max - self.v_min


@dataclass(frozen=True)
class ControlOutput:
    """Commanded inputs plus every intermediate of the control law."""

    v_x: float
    omega: float
    omega_unsat: float
    omega_ff: float
    k_omega: float
    theta_e: float
    saturated: bool
    r_delta: float
    theta_r: float

    @property
    def kappa(self) -> float:
        """Commanded curvature |omega|/v_x; reported as 0 at v_x = 0
        where the ratio is undefined and omega is clamped to 0."""
        return abs(self.omega) / self.v_x if self.v_x > 0.0 else 0.0


def orientation_error(theta: float, theta_r: float) -> float:
    """Heading error theta - theta_r wrapped to (-pi, pi]."""
    if not (math.isfinite(theta) and math.isfinite(theta_r)):
        raise ValueError("angles must be finite")
    return _k.wrap_angle(theta - theta_r)


def linear_velocity(g: Configuration, cvf_params: CvfParams,
                    ctrl_params: ControlParams, elapsed: float = 0.0) -> float:
    """Forward speed command in [v_min, v_max).

    Saturating blend of the distance to the target position and the
    magnitude of the heading error; reaches v_min only at the target
    configuration.
    """
    geom = field_geometry(g.p, cvf_params)
    theta_e = orientation_error(g.theta, geom.theta_r)
    dist = (g.p - cvf_params.target_position).norm()
    k_v = ctrl_params.k_v
    if ctrl_params.ramp_rate > 0.0:
        k_v *= 1.0 - math.exp(-ctrl_params.ramp_rate * elapsed)
    return ctrl_params.v_min + k_v * math.tanh(
        dist / ctrl_params.c_p + abs(theta_e) / ctrl_params.c_theta)


def feedforward(g: Configuration, v_x: float, geom: FieldGeometry) -> float:
    """Rate of the reference orientation along the commanded motion:
    the gradient of theta_r dotted with the velocity vector."""
    if geom.r_delta <= 0.0:
        raise SingularityError("feedforward undefined at the singular point")
    h = Vec2(math.cos(g.theta), math.sin(g.theta))
    return v_x * geom.grad_theta_r.dot(h)


def k_func(r_delta: float, params: CvfParams) -> float:
    """Curvature-budget profile for the dynamic gain.

    Grows linearly inside one turning radius of the singular point and
    follows 1/r plus the radial rate of the reference orientation
    outside; continuous at the junction and dominating the orientation
    gradient magnitude there and beyond.
    """
    if r_delta < 0.0:
        raise ValueError(f"r_delta must be nonnegative, got {r_delta}")
    return _k.gain_profile(r_delta, params.rho, params.r1, params.r2, params.r3)


def dynamic_gain(g: Configuration, v_x: float, geom: FieldGeometry,
                 cvf_params: CvfParams, ctrl_params: ControlParams) -> float:
    """Feedback gain: the user cap, shrunk so the feedback term never
    spends more than the curvature budget left over by the feedforward.

    At theta_e = 0 the state-dependent branch is unbounded and the cap
    applies.
    """
    theta_e = orientation_error(g.theta, geom.theta_r)
    h = Vec2(math.cos(g.theta), math.sin(g.theta))
    cosd = geom.grad_theta_r.dot(h) / geom.amplitude
    cosd = min(1.0, max(-1.0, cosd))
    k = k_func(geom.r_delta, cvf_params)
    slack = max(0.0, cvf_params.kappa_max - k * abs(cosd))
    if theta_e == 0.0:
        return ctrl_params.k_omega_max
    return min(ctrl_params.k_omega_max, v_x * slack / abs(theta_e))


def saturated_omega(omega0: float, v_x: float,
                    kappa_max: float) -> tuple[float, bool]:
    """Clamp the angular command to |omega| <= v_x * kappa_max.

    Returns (omega, saturated). The tie |omega0| == bound is classified
    unsaturated; the flag uses a tiny relative guard so that states on
    the exact-arithmetic boundary do not flip saturated from rounding.
    """
    if v_x < 0.0:
        raise ValueError(f"v_x must be nonnegative, got {v_x}")
    wbar = v_x * kappa_max
    aw0 = abs(omega0)
    saturated = aw0 > wbar * (1.0 + 1e-12)
    omega = math.copysign(wbar, omega0) if aw0 > wbar else omega0
    if v_x > 0.0:
        # guard against the divided form rounding above kappa_max
        while abs(omega) / v_x > kappa_max:
            omega = math.nextafter(omega, 0.0)
    return omega, saturated


def control(g: Configuration, cvf_params: CvfParams,
            ctrl_params: ControlParams, elapsed: float = 0.0) -> ControlOutput:
    """Full control law: linear velocity, feedback + feedforward angular
    command, dynamic gain and saturation, with diagnostics.

    Raises SingularityError inside the singular guard disk and
    NonConvergingStateError when the heading error is exactly opposite
    the reference (within 1e-12), where no convergence guarantee exists.
    """
    sp = cvf_params.singular_point
    rd = math.hypot(g.p.x - sp.x, g.p.y - sp.y)
    if rd <= cvf_params.singular_guard:
        raise SingularityError(
            f"control undefined at the singular point (r_delta={rd:.3g})")
    v_x, omega, omega0, omega_ff, k_omega, theta_e, rd, theta_r, sat = \
        _k.control_core(
            g.p.x, g.p.y, g.theta, elapsed,
            cvf_params.target_position.x, cvf_params.target_position.y,
            sp.x, sp.y, cvf_params.r1, cvf_params.r2, cvf_params.r3,
            cvf_params.kappa_max, cvf_params.rho,
            ctrl_params.v_min, ctrl_params.k_v, ctrl_params.c_p,
            ctrl_params.c_theta, ctrl_params.k_omega_max,
            ctrl_params.ramp_rate)
    if math.pi - abs(theta_e) < _N_THETA_TOL:
        raise NonConvergingStateError(
            f"heading error {theta_e:.15g} lies on the non-converging set")
    return ControlOutput(v_x=v_x, omega=omega, omega_unsat=omega0,
                         omega_ff=omega_ff, k_omega=k_omega, theta_e=theta_e,
                         saturated=bool(sat), r_delta=rd, theta_r=theta_r)
