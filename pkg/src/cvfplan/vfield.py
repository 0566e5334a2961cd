"""Curvature-constrained vector field construction and analysis.

The guidance field is assembled from three normalized planar flow
primitives (source, vortex, sink) blended over an annular partition of
the workspace, then translated so that a chosen limit cycle passes
through the target position with the target heading, and normalized to
unit magnitude. This module builds that field, evaluates the curvature
of its integral curves in closed form, checks the feasibility
inequalities that bound the curvature and enable the tracking gain, and
traces integral curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from . import _kernels as _k
from .errors import SingularityError

__all__ = [
    "Vec2",
    "PolarComponents",
    "CvfParams",
    "RegionId",
    "FieldGeometry",
    "FeasibilityCheck",
    "FeasibilityReport",
    "GridSample",
    "blend",
    "base_field_polar",
    "cvf",
    "field_geometry",
    "curvature",
    "curvature_from_components",
    "check_curvature_condition",
    "check_stabilization_condition",
    "integral_curve",
    "IntegralCurve",
    "sample_grid",
]


@dataclass(frozen=True)
class Vec2:
    """Planar vector with finite components."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"Vec2 components must be finite, got ({self.x}, {self.y})")

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)


class PolarComponents(NamedTuple):
    """Field components along the radial and tangential unit vectors."""

    f_r: float
    f_phi: float


class RegionId(IntEnum):
    """Annular region indices; each boundary circle belongs to the
    higher-index region (half-open intervals)."""

    A1 = 1
    A2 = 2
    A3 = 3
    A4 = 4


@dataclass(frozen=True)
class CvfParams:
    """Field parameters: target configuration, partition radii and the
    curvature bound.

    The minimum turning radius is ``rho = 1/kappa_max``. The singular
    point ``p_delta`` is placed so that the limit cycle (radius ``r2``
    around it) passes through the target position with the field aligned
    to the target heading there.
    """

    target_position: Vec2
    target_heading: float
    r1: float
    r2: float
    r3: float
    kappa_max: float

    def __post_init__(self):
        if not (0.0 < self.r1 < self.r2 < self.r3):
            raise ValueError(
                f"radii must satisfy 0 < r1 < r2 < r3, got "
                f"({self.r1}, {self.r2}, {self.r3})")
        if not (self.kappa_max > 0.0 and math.isfinite(self.kappa_max)):
            raise ValueError(f"kappa_max must be positive, got {self.kappa_max}")
        if not math.isfinite(self.target_heading):
            raise ValueError("target_heading must be finite")
        object.__setattr__(self, "target_heading",
                           self.target_heading % (2.0 * math.pi))

    @property
    def rho(self) -> float:
        """Minimum turning radius."""
        return 1.0 / self.kappa_max

    @property
    def singular_point(self) -> Vec2:
        """Location where the field vanishes: the target position shifted
        by the cycle radius, perpendicular to the target heading."""
        ang = self.target_heading - 0.5 * math.pi
        return Vec2(self.target_position.x - self.r2 * math.cos(ang),
                    self.target_position.y - self.r2 * math.sin(ang))

    @property
    def singular_guard(self) -> float:
        """Radius of the disk around the singular point treated as
        singular; normalization is numerically meaningless inside."""
        return 1e-9 * self.r2

    def region(self, r_delta: float) -> RegionId:
        return RegionId(_k.region_of(r_delta, self.r1, self.r2, self.r3))


@dataclass(frozen=True)
class FieldGeometry:
    """Reference orientation and its spatial derivatives at a point.

    ``grad_theta_r`` is assembled componentwise from the radial
    derivative and the 1/r tangential term, which avoids the division
    singularity of the angle-form expression when the radial derivative
    vanishes. Its magnitude equals ``amplitude``.
    """

    r_delta: float
    phi_delta: float
    theta_r: float
    dtheta_r_dr: float
    grad_theta_r: Vec2
    amplitude: float
    region: RegionId


def blend(s: float, s_l: float, s_u: float) -> float:
    """Cubic blending weight, decreasing smoothly from 1 at ``s_l`` to 0
    at ``s_u`` with zero slope at both ends.

    Raises ValueError for an empty interval or ``s`` outside it.
    """
    if not s_l < s_u:
        raise ValueError(f"blend interval is empty: [{s_l}, {s_u}]")
    if not (s_l <= s <= s_u):
        raise ValueError(f"blend input {s} outside [{s_l}, {s_u}]")
    tau = (s - s_l) / (s_u - s_l)
    return (2.0 * tau - 3.0) * tau * tau + 1.0


def base_field_polar(r: float, params: CvfParams) -> PolarComponents:
    """Blended flow field at radius ``r`` from the singular point, in
    polar components.

    Piecewise: pure source in A1, source-to-vortex blend in A2,
    vortex-to-sink blend in A3, pure sink in A4, zero at r = 0.
    """
    if r < 0.0:
        raise ValueError(f"radius must be nonnegative, got {r}")
    f_r, f_phi, _, _, _, _ = _k.field_polar(r, params.r1, params.r2, params.r3)
    return PolarComponents(f_r, f_phi)


def cvf(p: Vec2, params: CvfParams) -> Vec2:
    """Unit guidance vector at ``p`` (zero inside the singular guard).

    The world-frame vector is the blended field evaluated at the offset
    from the singular point, rotated through the polar angle and
    normalized.
    """
    tx, ty, _ = _k.cvf_world(p.x - params.singular_point.x,
                             p.y - params.singular_point.y,
                             params.r1, params.r2, params.r3,
                             params.singular_guard)
    return Vec2(tx, ty)


def field_geometry(p: Vec2, params: CvfParams) -> FieldGeometry:
    """Reference orientation, its radial derivative and gradient at ``p``.

    Raises SingularityError inside the guard disk around the singular
    point.
    """
    sp = params.singular_point
    dx = p.x - sp.x
    dy = p.y - sp.y
    rd = math.hypot(dx, dy)
    if rd <= params.singular_guard:
        raise SingularityError(
            f"field geometry undefined at the singular point (r_delta={rd:.3g})")
    f_r, f_phi, _, _, tp, _ = _k.field_polar(rd, params.r1, params.r2, params.r3)
    phid = math.atan2(dy, dx)
    theta_r = _k.wrap_angle(phid + math.atan2(f_phi, f_r))
    invr = 1.0 / rd
    erx, ery = dx / rd, dy / rd
    grad = Vec2(tp * erx - invr * ery, tp * ery + invr * erx)
    return FieldGeometry(
        r_delta=rd,
        phi_delta=phid,
        theta_r=theta_r,
        dtheta_r_dr=tp,
        grad_theta_r=grad,
        amplitude=math.hypot(invr, tp),
        region=params.region(rd),
    )


def curvature(p: Vec2, params: CvfParams) -> float:
    """Integral-curve curvature of the guidance field at ``p``.

    Evaluated in closed form from the region-wise components and their
    analytic radial partials; translation to the singular-point frame
    preserves curvature, so this equals the base-field curvature at the
    offset radius.
    """
    sp = params.singular_point
    rd = math.hypot(p.x - sp.x, p.y - sp.y)
    if rd <= params.singular_guard:
        raise SingularityError(
            f"curvature undefined at the singular point (r_delta={rd:.3g})")
    return _k.curvature_polar(rd, params.r1, params.r2, params.r3)


def curvature_from_components(f_r: float, f_phi: float,
                              df_r_dr: float, df_phi_dr: float,
                              df_r_dphi: float, df_phi_dphi: float,
                              r: float) -> float:
    """Integral-curve curvature of an arbitrary planar field given in
    polar components with analytic partials, at radius ``r`` > 0.

    Implements |<F, K F>| / |F|^3 with the curvature operator K built
    from the supplied partial derivatives.
    """
    if r <= 0.0:
        raise ValueError(f"radius must be positive, got {r}")
    n2 = f_r * f_r + f_phi * f_phi
    if n2 == 0.0:
        raise SingularityError("curvature undefined where the field vanishes")
    k11 = df_phi_dr + f_phi / r
    k12 = -df_r_dr
    k21 = df_phi_dphi / r
    k22 = -df_r_dphi / r + f_phi / r
    gx = k11 * f_r + k12 * f_phi
    gy = k21 * f_r + k22 * f_phi
    num = abs(f_r * gx + f_phi * gy)
    return num / n2 ** 1.5


@dataclass(frozen=True)
class FeasibilityCheck:
    """One evaluated inequality: name, numeric sides and outcome."""

    name: str
    lhs: float
    rhs: float
    passed: bool

    def describe(self) -> str:
        mark = "ok" if self.passed else "VIOLATED"
        return f"{self.name}: {self.lhs:.6g} vs {self.rhs:.6g} [{mark}]"


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of a family of feasibility inequalities."""

    checks: tuple[FeasibilityCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def violations(self) -> tuple[FeasibilityCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)

    def describe(self) -> str:
        return "\n".join(c.describe() for c in self.checks)


def check_curvature_condition(params: CvfParams) -> FeasibilityReport:
    """Sufficient condition for the integral curves' curvature to stay
    below the bound: each annulus must be at least as wide as three
    turning radii and no wider than the radius of its inner circle.
    """
    rho = params.rho
    pairs = [("r1", "r2", params.r1, params.r2), ("r2", "r3", params.r2, params.r3)]
    checks = []
    for lo_name, hi_name, lo, hi in pairs:
        width = hi - lo
        checks.append(FeasibilityCheck(
            name=f"{lo_name} >= {hi_name} - {lo_name}",
            lhs=lo, rhs=width, passed=lo >= width))
        checks.append(FeasibilityCheck(
            name=f"{hi_name} - {lo_name} >= 3*rho",
            lhs=width, rhs=3.0 * rho, passed=width >= 3.0 * rho))
    return FeasibilityReport(tuple(checks))


def check_stabilization_condition(params: CvfParams) -> FeasibilityReport:
    """Condition enabling the dynamic gain: for each blending annulus the
    inverse inner radius plus the inverse width must not exceed the
    curvature bound."""
    pairs = [("r1", "r2", params.r1, params.r2), ("r2", "r3", params.r2, params.r3)]
    checks = []
    for lo_name, hi_name, lo, hi in pairs:
        lhs = 1.0 / lo + 1.0 / (hi - lo)
        checks.append(FeasibilityCheck(
            name=f"1/{lo_name} + 1/({hi_name} - {lo_name}) <= kappa_max",
            lhs=lhs, rhs=params.kappa_max, passed=lhs <= params.kappa_max))
    return FeasibilityReport(tuple(checks))


@dataclass(frozen=True)
class IntegralCurve:
    """Fixed-arc-step polyline along the guidance field."""

    points: np.ndarray          # (n, 2)
    arc_step: float
    closed: bool                # stopped after one full loop on the cycle

    @property
    def arc_length(self) -> float:
        return self.arc_step * (len(self.points) - 1)

    def arc_lengths(self) -> np.ndarray:
        return self.arc_step * np.arange(len(self.points), dtype=float)


def integral_curve(p0: Vec2, params: CvfParams,
                   arc_step: float | None = None,
                   max_len: float | None = None) -> IntegralCurve:
    """Trace the integral curve of the unit field from ``p0``.

    Parameters
    ----------
    p0 : Vec2
        Start point; must lie outside the singular guard disk.
    arc_step : float, optional
        Arc increment per point. Defaults to rho/100.
    max_len : float, optional
        Arc-length budget. Defaults to 20*r3.

    The tracer advances with a four-stage one-step method on the unit
    field (arc-length parameterization) and stops early once the curve
    has wound a full revolution while staying within one arc step of the
    limit cycle.
    """
    if arc_step is None:
        arc_step = params.rho / 100.0
    if max_len is None:
        max_len = 20.0 * params.r3
    if arc_step <= 0.0 or max_len <= 0.0:
        raise ValueError("arc_step and max_len must be positive")
    sp = params.singular_point
    if (p0 - sp).norm() <= params.singular_guard:
        raise SingularityError("integral curve started at the singular point")
    n_max = int(max_len / arc_step) + 1
    xs = np.empty(n_max, dtype=np.float64)
    ys = np.empty(n_max, dtype=np.float64)
    n, status = _k.trace_core(p0.x, p0.y, sp.x, sp.y,
                              params.r1, params.r2, params.r3,
                              arc_step, n_max, params.singular_guard, xs, ys)
    if status == _k.TRACE_SINGULAR_ABORT:
        raise SingularityError("integral curve entered the singular guard disk")
    pts = np.column_stack((xs[:n], ys[:n]))
    return IntegralCurve(points=pts, arc_step=arc_step,
                         closed=status == _k.TRACE_CLOSED)


@dataclass(frozen=True)
class GridSample:
    """Field samples on a rectangular grid, one flat row per point."""

    x: np.ndarray
    y: np.ndarray
    tx: np.ndarray
    ty: np.ndarray
    theta_r: np.ndarray
    kappa: np.ndarray
    region: np.ndarray

    HEADER = "x y Tx Ty theta_r kappa region"

    def rows(self):
        """Yield formatted text rows (17 significant digits, region name)."""
        for i in range(len(self.x)):
            yield (f"{self.x[i]:.17g} {self.y[i]:.17g} {self.tx[i]:.17g} "
                   f"{self.ty[i]:.17g} {self.theta_r[i]:.17g} "
                   f"{self.kappa[i]:.17g} A{int(self.region[i])}")


def sample_grid(params: CvfParams, xmin: float, xmax: float,
                ymin: float, ymax: float, resolution: int) -> GridSample:
    """Sample direction, reference orientation, curvature and region on a
    ``resolution`` x ``resolution`` grid. Cells inside the singular guard
    get a zero vector and NaN angle/curvature."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    gx = np.linspace(xmin, xmax, resolution)
    gy = np.linspace(ymin, ymax, resolution)
    xx, yy = np.meshgrid(gx, gy, indexing="ij")
    xs = np.ascontiguousarray(xx.ravel())
    ys = np.ascontiguousarray(yy.ravel())
    n = xs.shape[0]
    tx = np.empty(n)
    ty = np.empty(n)
    theta_r = np.empty(n)
    kap = np.empty(n)
    region = np.empty(n, dtype=np.int64)
    sp = params.singular_point
    _k.grid_eval(xs, ys, sp.x, sp.y, params.r1, params.r2, params.r3,
                 params.singular_guard, tx, ty, theta_r, kap, region)
    return GridSample(x=xs, y=ys, tx=tx, ty=ty, theta_r=theta_r,
                      kappa=kap, region=region)
