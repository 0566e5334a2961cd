"""Monte-Carlo experiment harness and trajectory-quality metrics.

Runs seeded batches of guidance trials: each trial draws an initial pose,
assigns one of several target configurations spaced evenly on the loiter
cycle, traces the field's integral curve (reference-trajectory quality)
and simulates the closed loop (control performance), then aggregates the
comparison metrics into a single report.

Randomness comes from the counter-based Philox generator keyed by
(master_seed, trial_index), so any single trial and the whole report are
reproducible bit-for-bit regardless of execution order or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as _k
from .controller import Configuration, ControlParams
from .errors import InsufficientDataError, NoPassageError
from .simulator import SimConfig, Trajectory, simulate
from .vfield import CvfParams, IntegralCurve, Vec2, integral_curve

__all__ = [
    "TrialSpec",
    "TrialBatchSpec",
    "TrialResult",
    "MetricsReport",
    "relative_length",
    "omega_rmse",
    "pct_curvature_ok",
    "pct_input_ok",
    "avg_curvature",
    "avg_time",
    "draw_trial",
    "run_monte_carlo",
]

# Curvature comparisons on traced curves allow this absolute slack over
# the bound; the analytic curvature satisfies the bound exactly in real
# arithmetic and rounding stays far below it.
KAPPA_TOL = 1e-9


@dataclass(frozen=True)
class TrialBatchSpec:
    """Distribution of initial poses and targets for a batch.

    Targets sit on the circle of radius r2 about the origin (the shared
    loiter cycle), headings tangent; trial i uses target i mod n_targets.
    ``passage_tol`` is the radius within which an integral curve counts
    as having reached the target position; the published relative-length
    statistic depends on it (see README).
    """

    x_min: float = -15.0
    x_max: float = 15.0
    y_min: float = -15.0
    y_max: float = 15.0
    n_targets: int = 4
    target_phase: float = 0.0
    loiter: bool = False
    passage_tol: float = 0.55
    curve_arc_step: float = 0.01
    curve_max_len: float = 240.0

    def __post_init__(self):
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError("empty initial-pose box")
        if self.n_targets < 1:
            raise ValueError("n_targets must be at least 1")
        if self.passage_tol <= 0.0:
            raise ValueError("passage_tol must be positive")

    def target(self, index: int, r2: float) -> tuple[Vec2, float]:
        psi = self.target_phase + 2.0 * math.pi * (index % self.n_targets) \
            / self.n_targets
        return (Vec2(r2 * math.cos(psi), r2 * math.sin(psi)),
                _k.wrap_angle(psi + 0.5 * math.pi))


@dataclass(frozen=True)
class TrialSpec:
    """One drawn trial: seed, initial pose and target configuration."""

    seed: int
    trial_index: int
    g0: Configuration
    cvf: CvfParams
    loiter: bool
    n_redrawn: int = 0


@dataclass(frozen=True)
class TrialResult:
    """Per-trial metric contributions."""

    trial_index: int
    converged: bool
    t_converge: float
    curve_kappa_ok: bool
    relative_length: float
    input_ok: bool
    mean_abs_kappa: float
    omega_rmse: float


@dataclass(frozen=True)
class MetricsReport:
    """Batch aggregate in the comparison-table layout."""

    pct_curvature_ok: float
    relative_length: float
    pct_input_ok: float
    avg_curvature: float
    avg_time: float
    omega_rmse: float
    n_trials: int
    n_converged: int
    n_redrawn: int
    master_seed: int

    FIELDS = ("pct_curvature_ok", "relative_length", "pct_input_ok",
              "avg_curvature", "avg_time", "omega_rmse",
              "n_trials", "n_converged", "n_redrawn", "master_seed")

    def items(self):
        return [(name, getattr(self, name)) for name in self.FIELDS]


def relative_length(curve: IntegralCurve | np.ndarray, p0: Vec2, p_d: Vec2,
                    passage_tol: float) -> float:
    """Arc length of a curve up to its first close pass of ``p_d``,
    divided by the straight-line distance from ``p0``.

    The passage point is the first local minimum of the distance to
    ``p_d`` that falls below ``passage_tol``; endpoints count on their
    open side. Raises NoPassageError when no such pass exists.
    """
    pts = curve.points if isinstance(curve, IntegralCurve) else np.asarray(curve)
    if len(pts) < 2:
        raise InsufficientDataError("curve needs at least two points")
    base = math.hypot(p_d.x - p0.x, p_d.y - p0.y)
    if base <= 0.0:
        raise ValueError("start and target coincide")
    d = np.hypot(pts[:, 0] - p_d.x, pts[:, 1] - p_d.y)
    seg = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    arc = np.concatenate(([0.0], np.cumsum(seg)))
    below = d < passage_tol
    n = len(d)
    for i in np.flatnonzero(below):
        left_ok = i == 0 or d[i] <= d[i - 1]
        right_ok = i == n - 1 or d[i] <= d[i + 1]
        if left_ok and right_ok:
            return float(arc[i]) / base
    raise NoPassageError(
        f"curve never passed within {passage_tol} of the target position")


def omega_rmse(traj: Trajectory) -> float:
    """Root-mean-square of successive angular-command differences, a
    proxy for commanded angular acceleration."""
    if len(traj) < 2:
        raise InsufficientDataError("omega_rmse needs at least two samples")
    dw = np.diff(traj.column("omega"))
    return float(np.sqrt(np.mean(dw * dw)))


def _require_batch(batch):
    if not batch:
        raise InsufficientDataError("empty batch")


def pct_curvature_ok(batch: list[TrialResult]) -> float:
    """Fraction of trials whose reference curve keeps curvature within
    the bound."""
    _require_batch(batch)
    return sum(r.curve_kappa_ok for r in batch) / len(batch)


def pct_input_ok(batch: list[TrialResult]) -> float:
    """Fraction of trials whose commands satisfy |omega|/v_x <= kappa_max
    at every sample."""
    _require_batch(batch)
    return sum(r.input_ok for r in batch) / len(batch)


def avg_curvature(batch: list[TrialResult]) -> float:
    """Mean over trials of the time-averaged commanded curvature."""
    _require_batch(batch)
    return sum(r.mean_abs_kappa for r in batch) / len(batch)


def avg_time(batch: list[TrialResult]) -> float:
    """Mean convergence time over converged trials."""
    _require_batch(batch)
    times = [r.t_converge for r in batch if r.converged]
    if not times:
        raise InsufficientDataError("no converged trials in batch")
    return sum(times) / len(times)


def _trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    # Philox key = 128-bit (master_seed, trial_index): counter-derived
    # per-trial streams independent of execution order.
    key = ((master_seed & 0xFFFFFFFFFFFFFFFF) << 64) | (trial_index & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


def draw_trial(template: CvfParams, batch: TrialBatchSpec,
               master_seed: int, trial_index: int) -> TrialSpec:
    """Draw one trial's initial pose and target, redrawing (and counting)
    initial positions that land inside the singular guard disk."""
    target_pos, target_heading = batch.target(trial_index, template.r2)
    cvf = CvfParams(target_position=target_pos, target_heading=target_heading,
                    r1=template.r1, r2=template.r2, r3=template.r3,
                    kappa_max=template.kappa_max)
    rng = _trial_rng(master_seed, trial_index)
    sp = cvf.singular_point
    redrawn = 0
    while True:
        x0 = rng.uniform(batch.x_min, batch.x_max)
        y0 = rng.uniform(batch.y_min, batch.y_max)
        th0 = rng.uniform(0.0, 2.0 * math.pi)
        if math.hypot(x0 - sp.x, y0 - sp.y) > cvf.singular_guard:
            break
        redrawn += 1
        if redrawn > 1000:
            raise ValueError(
                "initial-pose box lies inside the singular guard disk")
    return TrialSpec(seed=int(master_seed), trial_index=trial_index,
                     g0=Configuration(Vec2(x0, y0), th0), cvf=cvf,
                     loiter=batch.loiter, n_redrawn=redrawn)


def _run_trial(spec: TrialSpec, ctrl: ControlParams, sim: SimConfig,
               batch: TrialBatchSpec,
               dump_dir: Path | None = None) -> TrialResult:
    curve = integral_curve(spec.g0.p, spec.cvf,
                           arc_step=batch.curve_arc_step,
                           max_len=batch.curve_max_len)
    sp = spec.cvf.singular_point
    rr = np.hypot(curve.points[:, 0] - sp.x, curve.points[:, 1] - sp.y)
    kmax = _k.max_curvature_radii(rr, spec.cvf.r1, spec.cvf.r2, spec.cvf.r3)
    curve_ok = kmax <= spec.cvf.kappa_max + KAPPA_TOL
    l_r = relative_length(curve, spec.g0.p, spec.cvf.target_position,
                          batch.passage_tol)
    traj, rep = simulate(spec.g0, spec.cvf, ctrl, sim, loiter=spec.loiter)
    if dump_dir is not None:
        from .scenario_io import save_trajectory  # deferred: module cycle
        save_trajectory(traj,
                        Path(dump_dir) / f"trial_{spec.trial_index:04d}.csv")
    return TrialResult(
        trial_index=spec.trial_index,
        converged=rep.converged,
        t_converge=rep.t_converge,
        curve_kappa_ok=curve_ok,
        relative_length=l_r,
        input_ok=rep.kappa_violation_count == 0,
        mean_abs_kappa=rep.mean_abs_kappa,
        omega_rmse=rep.omega_rmse,
    )


def run_monte_carlo(template: CvfParams, ctrl: ControlParams, sim: SimConfig,
                    batch: TrialBatchSpec, n_trials: int, master_seed: int,
                    workers: int = 1, dump_dir: str | Path | None = None,
                    ) -> tuple[MetricsReport, list[TrialResult]]:
    """Run a seeded batch and aggregate the metric suite.

    Trials are independent; with ``workers`` > 1 they execute on a thread
    pool (the compiled kernels release the GIL) and results are reduced
    in trial order, so the report is identical for any worker count.
    ``dump_dir`` writes each trial's trajectory CSV there.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    if dump_dir is not None:
        dump_dir = Path(dump_dir)
        dump_dir.mkdir(parents=True, exist_ok=True)
    specs = [draw_trial(template, batch, master_seed, i)
             for i in range(n_trials)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda s: _run_trial(s, ctrl, sim, batch, dump_dir), specs))
    else:
        results = [_run_trial(s, ctrl, sim, batch, dump_dir) for s in specs]
    results.sort(key=lambda r: r.trial_index)
    report = MetricsReport(
        pct_curvature_ok=pct_curvature_ok(results),
        relative_length=sum(r.relative_length for r in results) / len(results),
        pct_input_ok=pct_input_ok(results),
        avg_curvature=avg_curvature(results),
        avg_time=avg_time(results),
        omega_rmse=sum(r.omega_rmse for r in results) / len(results),
        n_trials=n_trials,
        n_converged=sum(r.converged for r in results),
        n_redrawn=sum(s.n_redrawn for s in specs),
        master_seed=int(master_seed),
    )
    return report, results
