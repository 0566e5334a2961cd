"""Shared fixtures: reference parameter sets and kernel warmup."""

import math

import pytest

from cvfplan import (Configuration, ControlParams, CvfParams, SimConfig,
                     Vec2, control, cvf, integral_curve, simulate)


@pytest.fixture(scope="session")
def desk_params() -> CvfParams:
    """The desk-scale verification setup: unit turning radius, radii
    (4, 8, 12), target on the cycle about the origin."""
    return CvfParams(target_position=Vec2(8.0, 0.0),
                     target_heading=math.pi / 2.0,
                     r1=4.0, r2=8.0, r3=12.0, kappa_max=1.0)


@pytest.fixture(scope="session")
def desk_ctrl() -> ControlParams:
    return ControlParams(v_min=0.0, v_max=1.0, c_p=12.0,
                         c_theta=math.pi, k_omega_max=1.0)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels(desk_params, desk_ctrl):
    """Force one compilation/cache-load of every jitted kernel so timed
    tests measure numerical work, not compiler startup."""
    cvf(Vec2(1.0, 1.0), desk_params)
    g = Configuration(Vec2(1.0, 1.0), 0.25)
    control(g, desk_params, desk_ctrl)
    integral_curve(Vec2(10.0, 0.0), desk_params, max_len=0.5)
    simulate(g, desk_params, desk_ctrl, SimConfig(dt=1e-3, t_max=0.01))
