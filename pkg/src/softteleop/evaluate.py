"""Observer-error evaluation: trajectory runs and error statistics.

A run drives the simulated plant along a trajectory and, every sampling
period, records the observer's estimated end-effector position next to
the plant's ground truth.  The statistics table mirrors the usual
absolute-error summary: MAE, RMSE, the standard deviation of |e|, the
worst sample and the |e| quartiles, reported per horizontal axis plus a
"global" row over the 2D XY error norm.  A "z" row is included as well
because the vertical channel is where the TOF filtering lives; the
headline rows are x, y and global.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import AppConfig
from .control import TargetCommand, inverse_kinematics
from .geometry import ModuleReading, actuator_lengths, clamp_lengths, forward_chain
from .observer import Observer
from .plant import NoiseModel, Plant


@dataclass
class TrajectorySpec:
    """A parametric path (circle / lemniscate / hold) or waypoint list.

    Parametric paths start at the robot's rest point and stay in the XY
    plane at the rest height; ``hold`` sends no commands at all, which
    keeps the plant bit-exactly at rest.
    """

    kind: str = "circle"
    amplitude_mm: float = 6.0
    period_s: float = 20.0
    duration_s: float = 60.0
    sample_period_ms: float = 100.0
    waypoints: list[tuple[float, float, float]] | None = None

    def __post_init__(self):
        if self.kind not in ("circle", "lemniscate", "hold", "waypoints"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.kind == "waypoints" and not self.waypoints:
            raise ValueError("waypoints trajectory needs waypoints")
        if self.duration_s * 1000.0 / self.sample_period_ms < 2:
            raise ValueError("trajectory too short: need at least 2 samples")

    def target_at(self, t_s: float, center: np.ndarray) -> np.ndarray | None:
        """Target position at time t, or None when nothing is commanded."""
        if self.kind == "hold":
            return None
        if self.kind == "waypoints":
            share = self.duration_s / len(self.waypoints)
            idx = min(int(t_s / share), len(self.waypoints) - 1)
            return np.asarray(self.waypoints[idx], dtype=float)
        w = 2.0 * math.pi * t_s / self.period_s
        a = self.amplitude_mm
        if self.kind == "circle":
            # circle through the rest point, smooth start
            offset = np.array([a * (math.cos(w) - 1.0), a * math.sin(w), 0.0])
        else:  # lemniscate: tilt sweeps through zero twice per cycle
            offset = np.array([a * math.sin(w), a * math.sin(w) * math.cos(w), 0.0])
        return center + offset


@dataclass
class EvalSample:
    t_ms: float
    estimate_mm: np.ndarray
    truth_mm: np.ndarray
    mean_tilt_rad: float = 0.0
    flagged: bool = False


@dataclass
class StatsRow:
    mae_mm: float
    rmse_mm: float
    std_mm: float
    max_mae_mm: float
    q1_mm: float
    q3_mm: float


@dataclass
class ErrorReport:
    x: StatsRow
    y: StatsRow
    global_xy: StatsRow
    z: StatsRow
    sample_count: int = 0


def run_eval(
    config: AppConfig,
    traj: TrajectorySpec,
    seed: int | None = None,
    mode: str | None = None,
) -> list[EvalSample]:
    """One deterministic evaluation run; returns the sample list.

    The plant is driven open loop: each period the trajectory point goes
    through inverse kinematics and the clamp, and the command is applied
    while the observer consumes the noisy sensor stream.  The observer
    never feeds back into the commands, so the truth trajectory depends
    only on the trajectory spec and the estimates carry all the error.
    """
    specs = list(config.modules)
    noise = config.noise if seed is None else NoiseModel(
        gauss_sigma_h_mm=config.noise.gauss_sigma_h_mm,
        gauss_sigma_angle_deg=config.noise.gauss_sigma_angle_deg,
        spike_prob=config.noise.spike_prob,
        spike_mag_mm=config.noise.spike_mag_mm,
        seed=seed,
    )
    plant_mode = mode if mode is not None else config.plant_mode
    if plant_mode == "cc":
        plant_mode = "constant_curvature"
    plant = Plant(specs, plant_mode, noise, config.initial_h_mm)
    observer = Observer(specs)

    rest = forward_chain(specs, plant.true_readings).end_effector
    ik_seed: list[ModuleReading] = list(plant.true_readings)
    last_module = len(specs) - 1
    period = traj.sample_period_ms
    steps = int(round(traj.duration_s * 1000.0 / period))

    samples: list[EvalSample] = []
    for k in range(steps + 1):
        observer.ingest_line(plant.read_sensors())
        est = observer.estimate()
        truth = plant.ground_truth()
        flagged = False
        target = traj.target_at((k + 1) * period / 1000.0, rest)
        command = None
        if target is not None:
            ik = inverse_kinematics(
                specs, TargetCommand(last_module, tuple(target)), ik_seed
            )
            ik_seed = ik.readings
            flagged = not ik.reachable
            command = []
            for spec, reading in zip(specs, ik.readings):
                clamped, _ = clamp_lengths(spec, actuator_lengths(spec, reading))
                command.extend(clamped.tolist())
        tilt = float(np.mean([
            math.acos(min(1.0, max(-1.0, math.cos(r.phi_rad) * math.cos(r.theta_rad))))
            for r in plant.true_readings
        ]))
        samples.append(EvalSample(
            t_ms=plant.time_ms,
            estimate_mm=est.end_effector.copy(),
            truth_mm=truth.end_effector.copy(),
            mean_tilt_rad=tilt,
            flagged=flagged,
        ))
        plant.step(period, command)
    return samples


def _errors(samples: Sequence[EvalSample], axis: str) -> np.ndarray:
    est = np.array([s.estimate_mm for s in samples])
    tru = np.array([s.truth_mm for s in samples])
    diff = est - tru
    if axis == "x":
        return np.abs(diff[:, 0])
    if axis == "y":
        return np.abs(diff[:, 1])
    if axis == "z":
        return np.abs(diff[:, 2])
    if axis == "global":
        return np.linalg.norm(diff[:, :2], axis=1)
    raise ValueError(f"unknown axis {axis!r}")


def compute_stats(samples: Sequence[EvalSample], axis: str) -> StatsRow:
    """Absolute-error statistics for one axis selector.

    MAE is the mean of |e|, RMSE the root mean square of e, the standard
    deviation is over |e| with n-1 normalization, and the quartiles use
    linear interpolation between order statistics.
    """
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    e = _errors(samples, axis)
    return StatsRow(
        mae_mm=float(np.mean(e)),
        rmse_mm=float(np.sqrt(np.mean(e * e))),
        std_mm=float(np.std(e, ddof=1)),
        max_mae_mm=float(np.max(e)),
        q1_mm=float(np.percentile(e, 25)),
        q3_mm=float(np.percentile(e, 75)),
    )


def build_report(samples: Sequence[EvalSample]) -> ErrorReport:
    return ErrorReport(
        x=compute_stats(samples, "x"),
        y=compute_stats(samples, "y"),
        global_xy=compute_stats(samples, "global"),
        z=compute_stats(samples, "z"),
        sample_count=len(samples),
    )


_CSV_HEADER = "metric,mae,rmse,std,max_mae,q1,q3"


def _num(v: float) -> str:
    """Shortest decimal form after 4-digit rounding (2.41 stays '2.41')."""
    return repr(round(float(v), 4))


def _row_values(row: StatsRow) -> list[float]:
    return [row.mae_mm, row.rmse_mm, row.std_mm, row.max_mae_mm, row.q1_mm, row.q3_mm]


def report_to_csv(report: ErrorReport) -> str:
    lines = [_CSV_HEADER]
    for name, row in (("x", report.x), ("y", report.y),
                      ("global", report.global_xy), ("z", report.z)):
        lines.append(",".join([name] + [_num(v) for v in _row_values(row)]))
    return "\n".join(lines) + "\n"


def report_to_json(report: ErrorReport) -> str:
    def row_dict(row: StatsRow) -> dict:
        return {
            "mae": round(row.mae_mm, 4),
            "rmse": round(row.rmse_mm, 4),
            "std": round(row.std_mm, 4),
            "max_mae": round(row.max_mae_mm, 4),
            "q1": round(row.q1_mm, 4),
            "q3": round(row.q3_mm, 4),
        }

    return json.dumps({
        "sample_count": report.sample_count,
        "rows": {
            "x": row_dict(report.x),
            "y": row_dict(report.y),
            "global": row_dict(report.global_xy),
            "z": row_dict(report.z),
        },
    }, indent=2) + "\n"


def emit_report(report: ErrorReport | None, fmt: str, path: str | Path) -> Path:
    """Write the report as csv or json; never leaves an empty file behind."""
    if report is None or report.sample_count == 0:
        raise ValueError("refusing to emit an empty report")
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    text = report_to_csv(report) if fmt == "csv" else report_to_json(report)
    path = Path(path)
    path.write_text(text)
    return path


def dump_samples(samples: Sequence[EvalSample], path: str | Path) -> Path:
    """Plot-ready CSV of every sample: estimate vs truth per axis."""
    lines = ["t_ms,est_x,est_y,est_z,true_x,true_y,true_z"]
    for s in samples:
        vals = [s.t_ms, *s.estimate_mm, *s.truth_mm]
        lines.append(",".join(_num(v) for v in vals))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def tilt_error_rank_correlation(config: AppConfig, traj: TrajectorySpec) -> float:
    """Spearman correlation between module tilt and observer error.

    Runs the constant-curvature plant with noise disabled so the only
    error source is the straight-rod model assumption, then correlates
    each sample's mean resultant tilt with its XY error norm.
    """
    from scipy.stats import spearmanr

    quiet = AppConfig(
        modules=list(config.modules),
        control=config.control,
        noise=NoiseModel.silent(),
        plant_mode="constant_curvature",
        initial_h_mm=config.initial_h_mm,
    )
    samples = run_eval(quiet, traj)
    tilts = [s.mean_tilt_rad for s in samples]
    errors = [float(np.linalg.norm((s.estimate_mm - s.truth_mm)[:2])) for s in samples]
    return float(spearmanr(tilts, errors).statistic)
