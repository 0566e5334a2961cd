"""Curvature-constrained vector-field guidance for nonholonomic robots.

A guidance field with a stable loiter cycle through the target
configuration, saturated tracking control laws with a state-dependent
gain that confines actuator saturation to one turning radius around the
field's singular point, a closed-loop kinematic simulator, and a seeded
Monte-Carlo benchmarking harness.
"""

from .controller import (Configuration, ControlOutput, ControlParams,
                         control, dynamic_gain, feedforward, k_func,
                         linear_velocity, orientation_error, saturated_omega)
from .errors import (FeasibilityError, InsufficientDataError,
                     NoPassageError, NonConvergingStateError,
                     ScenarioFormatError, SingularityError)
from .fixedwing import (EulerAngles, UavParams, attitude_error,
                        pitch_setpoint, roll_setpoint, rotation_zyx,
                        thrust_setpoint, yaw_setpoint)
from .metrics import (MetricsReport, TrialBatchSpec, TrialResult, TrialSpec,
                      avg_curvature, avg_time, omega_rmse, pct_curvature_ok,
                      pct_input_ok, relative_length, run_monte_carlo)
from .scenario_io import (Scenario, bundled_scenario, bundled_scenario_names,
                          load_scenario, save_report, save_scenario,
                          save_trajectory)
from .simulator import (ConvergenceReport, SimConfig, Trajectory,
                        distance_to_limit_set, passage_events, simulate, step)
from .vfield import (CvfParams, FeasibilityReport, FieldGeometry,
                     IntegralCurve, PolarComponents, RegionId, Vec2, blend,
                     base_field_polar, check_curvature_condition,
                     check_stabilization_condition, curvature,
                     curvature_from_components, cvf, field_geometry,
                     integral_curve, sample_grid)

__version__ = "0.1.0"
