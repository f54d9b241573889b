"""Sensor-stream observer: raw serial-style lines in, robot pose out.

The robot link carries two ASCII line formats, newline terminated,
decimal point, no thousands separators, at most 4 fractional digits:

    sensor line   S,<t_ms>,<h1_mm>,<phi1_deg>,<theta1_deg>[,<h2_mm>,...]
    command line  C,<l1_mm>,...,<lM_mm>        (M = total actuator count)

Angles are degrees on the wire and radians everywhere else.  The
observer filters each module's TOF height through its own scalar Kalman
filter (IMU angles pass through untouched, they are stable enough) and
runs the chain kinematics over the filtered readings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .filtering import KalmanParams, KalmanState, kalman_step
from .geometry import ModuleReading, ModuleSpec, RobotPose, forward_chain


class SensorLineError(ValueError):
    """Raised for malformed sensor or command lines."""


class NoEstimateError(RuntimeError):
    """Raised when a pose is requested before any frame arrived."""


@dataclass(frozen=True)
class SensorFrame:
    """One timestamped set of raw per-module readings."""

    t_ms: float
    readings: tuple[ModuleReading, ...]


def _fmt(value: float) -> str:
    """Wire-format a number: <= 4 fractional digits, no trailing zeros."""
    text = f"{value:.4f}".rstrip("0").rstrip(".")
    return text if text not in ("", "-0") else "0"


def _parse_field(fields: list[str], index: int, what: str) -> float:
    """Parse field ``index`` (1-based, counting the tag) as a finite number."""
    try:
        value = float(fields[index - 1])
    except ValueError:
        raise SensorLineError(f"field {index} ({what}) is not numeric: {fields[index - 1]!r}")
    if not math.isfinite(value):
        raise SensorLineError(f"field {index} ({what}) is not finite: {fields[index - 1]!r}")
    return value


def parse_sensor_line(line: str) -> SensorFrame:
    """Parse one ``S,...`` line into a frame of module readings.

    Raises SensorLineError naming the offending 1-based field index for
    a bad tag, wrong field count, non-numeric field or negative height.
    """
    fields = line.strip().split(",")
    if not fields or fields[0] != "S":
        raise SensorLineError(f"field 1 (tag) must be 'S', got {fields[0]!r}")
    if len(fields) < 5 or (len(fields) - 2) % 3 != 0:
        raise SensorLineError(
            f"expected 2 + 3*modules fields, got {len(fields)}"
        )
    t_ms = _parse_field(fields, 2, "t_ms")
    readings = []
    for m in range((len(fields) - 2) // 3):
        base = 3 + 3 * m
        h = _parse_field(fields, base, f"h{m + 1}_mm")
        if h <= 0:
            raise SensorLineError(f"field {base} (h{m + 1}_mm) must be > 0, got {h}")
        phi_deg = _parse_field(fields, base + 1, f"phi{m + 1}_deg")
        theta_deg = _parse_field(fields, base + 2, f"theta{m + 1}_deg")
        try:
            readings.append(ModuleReading(
                h_mm=h,
                phi_rad=math.radians(phi_deg),
                theta_rad=math.radians(theta_deg),
            ))
        except ValueError as exc:
            raise SensorLineError(f"fields {base}..{base + 2} (module {m + 1}): {exc}")
    return SensorFrame(t_ms=t_ms, readings=tuple(readings))


def format_sensor_line(t_ms: float, readings: Sequence[ModuleReading]) -> str:
    """Format module readings as one ``S,...`` line (degrees on the wire)."""
    parts = ["S", _fmt(t_ms)]
    for r in readings:
        parts += [_fmt(r.h_mm), _fmt(math.degrees(r.phi_rad)), _fmt(math.degrees(r.theta_rad))]
    return ",".join(parts) + "\n"


def parse_command_line(line: str) -> list[float]:
    """Parse one ``C,...`` actuator-length command line."""
    fields = line.strip().split(",")
    if not fields or fields[0] != "C":
        raise SensorLineError(f"field 1 (tag) must be 'C', got {fields[0]!r}")
    if len(fields) < 2:
        raise SensorLineError("command line carries no lengths")
    return [_parse_field(fields, i, f"l{i - 1}_mm") for i in range(2, len(fields) + 1)]


def format_command_line(lengths_mm: Sequence[float]) -> str:
    """Format actuator lengths as one ``C,...`` line."""
    return ",".join(["C"] + [_fmt(v) for v in lengths_mm]) + "\n"


class Observer:
    """Single-writer estimation pipeline over a sensor line stream.

    Owns one Kalman filter per module TOF channel.  The first measurement
    initialises each filter (x0 = first sample, p0 = r), which avoids a
    startup transient toward an arbitrary prior.
    """

    def __init__(self, specs: Sequence[ModuleSpec], params: KalmanParams | None = None):
        if not specs:
            raise ValueError("need at least one module spec")
        self.specs = list(specs)
        self.params = params if params is not None else KalmanParams()
        self.filters: list[KalmanState | None] = [None] * len(self.specs)
        self.last_readings: list[ModuleReading] | None = None
        self.last_pose: RobotPose | None = None
        self.last_t_ms: float | None = None

    def ingest(self, frame: SensorFrame) -> list[ModuleReading]:
        """Filter a frame's heights and store the filtered readings."""
        if len(frame.readings) != len(self.specs):
            raise ValueError(
                f"frame has {len(frame.readings)} modules, observer expects {len(self.specs)}"
            )
        filtered: list[ModuleReading] = []
        for i, raw in enumerate(frame.readings):
            state = self.filters[i]
            if state is None:
                state = KalmanState(x=raw.h_mm, p=self.params.r)
            else:
                state = kalman_step(state, self.params, raw.h_mm)
            self.filters[i] = state
            filtered.append(ModuleReading(
                h_mm=state.x, phi_rad=raw.phi_rad, theta_rad=raw.theta_rad,
            ))
        self.last_readings = filtered
        self.last_t_ms = frame.t_ms
        return filtered

    def ingest_line(self, line: str) -> list[ModuleReading]:
        return self.ingest(parse_sensor_line(line))

    def estimate(self) -> RobotPose:
        """Chain kinematics over the latest filtered readings."""
        if self.last_readings is None:
            raise NoEstimateError("no sensor frame ingested yet")
        pose = forward_chain(self.specs, self.last_readings)
        self.last_pose = pose
        return pose

    def is_stale(self, now_ms: float, period_ms: float, max_periods: int = 5) -> bool:
        """True when no frame arrived within ``max_periods`` sampling periods."""
        if self.last_t_ms is None:
            return True
        return (now_ms - self.last_t_ms) > max_periods * period_ms
