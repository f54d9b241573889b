"""Chain inverse kinematics and the outer position PID loop.

The operator commands a Cartesian point for one platform; damped least
squares over the per-module (phi, theta, h) parameters finds readings
that reach it, and a PID on the observed Cartesian error shifts the IK
target each period until the estimate sits within the convergence
tolerance.  Every length that leaves this module toward the plant has
passed through the elongation clamp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import (
    ModuleReading,
    ModuleSpec,
    actuator_lengths,
    base_vertices,
    clamp_lengths,
    forward_chain,
)
from .observer import Observer
from .plant import NoiseModel, Plant, _lengths_of, _project_box


@dataclass(frozen=True)
class PidGains:
    """Per-axis gains on the mm position error; integral clamp in mm*s."""

    kp: float = 0.8
    ki: float = 0.1
    kd: float = 0.05
    i_max_mm: float = 50.0

    def __post_init__(self):
        if self.kp < 0 or self.ki < 0 or self.kd < 0:
            raise ValueError("gains must be >= 0")
        if self.i_max_mm <= 0:
            raise ValueError(f"i_max_mm must be > 0, got {self.i_max_mm}")


@dataclass(frozen=True)
class TargetCommand:
    """Desired position of one platform's top centre, robot base frame."""

    module_index: int
    target_mm: tuple[float, float, float]


@dataclass
class ControlState:
    """PID memory plus the loop's convergence and timeout settings."""

    integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    prev_error: np.ndarray | None = None
    active: bool = False
    tol_mm: float = 3.0
    timeout_ms: float = 20000.0

    def __post_init__(self):
        if self.tol_mm <= 0:
            raise ValueError(f"tol_mm must be > 0, got {self.tol_mm}")


@dataclass
class IkResult:
    """Solution readings plus how well (and whether) the target was met."""

    readings: list[ModuleReading]
    pos_error_mm: float
    reachable: bool
    iterations: int


def workspace_box(
    specs: Sequence[ModuleSpec], module_index: int | None = None
) -> tuple[tuple[float, float], tuple[float, float], tuple[float, float]]:
    """Coarse axis-aligned sanity box for one platform's targets.

    Vertical range follows the stacked elongation bounds of the chain up
    to the selected module; the lateral half-range is half the fully
    extended length.  Targets outside this box are rejected before the
    solver ever runs.
    """
    m = len(specs) - 1 if module_index is None else module_index
    chain = specs[: m + 1]
    d_sum = sum(s.plate_offset_mm for s in chain[:-1])
    z_min = sum(s.min_len_mm for s in chain) + d_sum
    z_max = sum(s.max_len_mm for s in chain) + d_sum
    lateral = z_max / 2.0
    return (-lateral, lateral), (-lateral, lateral), (z_min, z_max)


def target_in_box(specs: Sequence[ModuleSpec], target: TargetCommand) -> bool:
    """True when the target index and position pass the coarse checks."""
    if not 0 <= target.module_index < len(specs):
        return False
    xb, yb, zb = workspace_box(specs, target.module_index)
    x, y, z = target.target_mm
    return (
        all(math.isfinite(v) for v in (x, y, z))
        and xb[0] <= x <= xb[1]
        and yb[0] <= y <= yb[1]
        and zb[0] <= z <= zb[1]
    )


def _fix_height_feasibility(spec: ModuleSpec, x: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Nudge h so the implied actuator lengths sit inside the bounds.

    dl/dh is close to 1 for small tilts, so a couple of proportional
    corrections converge.
    """
    for _ in range(3):
        lens = _lengths_of(base, *x)
        hi = float(np.max(lens)) - spec.max_len_mm
        lo = spec.min_len_mm - float(np.min(lens))
        if hi <= 0 and lo <= 0:
            break
        if hi > 0:
            x[2] -= hi
        elif lo > 0:
            x[2] += lo
        x = _project_box(spec, x)
    return x


def _boxed_step(
    J: np.ndarray, e: np.ndarray, lam2: float,
    x: np.ndarray, lo: np.ndarray, hi: np.ndarray,
) -> np.ndarray:
    """One damped least-squares step that respects the parameter box.

    Parameters whose unconstrained step would leave the box are pinned
    at the bound and the system is re-solved for the remaining free
    parameters, so a saturated module hands its share of the motion to
    the others instead of freezing the whole step.
    """
    n = x.size
    free = np.ones(n, dtype=bool)
    step = np.zeros(n)
    e_rem = e.astype(float).copy()
    for _ in range(n + 1):
        idx = np.flatnonzero(free)
        if idx.size == 0:
            break
        Jf = J[:, idx]
        sf = np.linalg.solve(Jf.T @ Jf + lam2 * np.eye(idx.size), Jf.T @ e_rem)
        x_try = x[idx] + sf
        viol = (x_try < lo[idx]) | (x_try > hi[idx])
        if not viol.any():
            step[idx] = sf
            break
        pin = idx[viol]
        pinned = np.clip(x[pin] + sf[viol], lo[pin], hi[pin]) - x[pin]
        step[pin] = pinned
        e_rem = e_rem - J[:, pin] @ pinned
        free[pin] = False
    return step


def inverse_kinematics(
    specs: Sequence[ModuleSpec],
    target: TargetCommand,
    seed_readings: Sequence[ModuleReading],
    damping: float = 1e-2,
    pos_tol_mm: float = 0.1,
    max_iter: int = 200,
) -> IkResult:
    """Damped-least-squares IK for one platform over the whole sub-chain.

    Optimizes the (phi, theta, h) triples of modules 0..module_index
    (later modules keep their seed readings), with a finite-difference
    Jacobian and per-step projection onto the tilt box, the height box
    and the implied-length bounds.  Stops when the platform sits within
    ``pos_tol_mm`` of the target; otherwise returns the best solution
    found with ``reachable`` False.
    """
    if len(specs) != len(seed_readings):
        raise ValueError("specs and seed_readings length mismatch")
    m = target.module_index
    if not 0 <= m < len(specs):
        raise ValueError(f"module_index {m} out of range")
    goal = np.asarray(target.target_mm, dtype=float)

    sub_specs = list(specs[: m + 1])
    bases = [base_vertices(s) for s in sub_specs]
    x = np.concatenate([
        np.array([r.phi_rad, r.theta_rad, r.h_mm]) for r in seed_readings[: m + 1]
    ])
    lo = np.concatenate([
        np.array([-s.tilt_limit_rad, -s.tilt_limit_rad, s.min_len_mm]) for s in sub_specs
    ])
    hi = np.concatenate([
        np.array([s.tilt_limit_rad, s.tilt_limit_rad, s.max_len_mm]) for s in sub_specs
    ])

    def project(vec: np.ndarray) -> np.ndarray:
        out = vec.copy()
        for i, s in enumerate(sub_specs):
            seg = _project_box(s, out[3 * i:3 * i + 3])
            seg = _fix_height_feasibility(s, seg, bases[i])
            out[3 * i:3 * i + 3] = seg
        return out

    def position(vec: np.ndarray) -> np.ndarray:
        readings = [
            ModuleReading(h_mm=vec[3 * i + 2], phi_rad=vec[3 * i], theta_rad=vec[3 * i + 1])
            for i in range(len(sub_specs))
        ]
        return forward_chain(sub_specs, readings).end_effector

    x = project(x)
    n = x.size
    eps = 1e-6
    lam = damping
    best_x = x.copy()
    best_err = math.inf
    iters = 0
    for iters in range(1, max_iter + 1):
        pos = position(x)
        e = goal - pos
        err = float(np.linalg.norm(e))
        if err < best_err:
            best_err = err
            best_x = x.copy()
        if err < pos_tol_mm:
            break
        J = np.empty((3, n))
        for j in range(n):
            xp = x.copy()
            xp[j] += eps
            J[:, j] = (position(xp) - pos) / eps
        # Levenberg-Marquardt: grow the damping until the projected step
        # actually improves, shrink it again on success
        improved = False
        for _ in range(10):
            step = _boxed_step(J, e, lam * lam, x, lo, hi)
            x_new = project(x + step)
            if float(np.linalg.norm(goal - position(x_new))) < err:
                x = x_new
                lam = max(lam * 0.5, 1e-6)
                improved = True
                break
            lam *= 4.0
        if not improved:
            break  # constrained optimum: no damped step helps

    readings = [
        ModuleReading(
            h_mm=best_x[3 * i + 2], phi_rad=best_x[3 * i], theta_rad=best_x[3 * i + 1]
        )
        for i in range(len(sub_specs))
    ] + list(seed_readings[m + 1:])
    return IkResult(
        readings=readings,
        pos_error_mm=best_err,
        reachable=best_err < pos_tol_mm,
        iterations=iters,
    )


def pid_step(
    ctrl: ControlState, gains: PidGains, error_mm: np.ndarray, dt_ms: float
) -> tuple[ControlState, np.ndarray]:
    """One PID update; returns the new state and the mm correction.

    The integral accumulates error * dt in mm*s and is clamped per axis
    to +/- i_max_mm; the derivative uses the previous error sample.
    """
    if dt_ms <= 0:
        raise ValueError(f"dt_ms must be > 0, got {dt_ms}")
    error_mm = np.asarray(error_mm, dtype=float)
    dt_s = dt_ms / 1000.0
    integral = np.clip(
        ctrl.integral + error_mm * dt_s, -gains.i_max_mm, gains.i_max_mm
    )
    if ctrl.prev_error is None:
        derivative = np.zeros(3)
    else:
        derivative = (error_mm - ctrl.prev_error) / dt_s
    correction = gains.kp * error_mm + gains.ki * integral + gains.kd * derivative
    new_state = ControlState(
        integral=integral,
        prev_error=error_mm.copy(),
        active=ctrl.active,
        tol_mm=ctrl.tol_mm,
        timeout_ms=ctrl.timeout_ms,
    )
    return new_state, correction


@dataclass
class TraceEntry:
    """One control period: time, estimate, command actually sent."""

    t_ms: float
    estimate_mm: np.ndarray
    command_mm: list[float] | None
    error_norm_mm: float
    ik_reachable: bool = True


def control_tick(
    specs: Sequence[ModuleSpec],
    ctrl: ControlState,
    gains: PidGains,
    target: TargetCommand,
    pose_position: np.ndarray,
    filtered_readings: Sequence[ModuleReading],
    dt_ms: float,
) -> tuple[ControlState, list[float] | None, float, bool]:
    """Shared per-period control computation.

    Returns (new pid state, flat clamped lengths or None when already
    converged, error norm, ik reachable flag).
    """
    error = np.asarray(target.target_mm, dtype=float) - pose_position
    err_norm = float(np.linalg.norm(error))
    if err_norm <= ctrl.tol_mm:
        return ctrl, None, err_norm, True
    ctrl, correction = pid_step(ctrl, gains, error, dt_ms)
    shifted = TargetCommand(
        module_index=target.module_index,
        target_mm=tuple(pose_position + correction),
    )
    ik = inverse_kinematics(specs, shifted, filtered_readings)
    flat: list[float] = []
    for spec, reading in zip(specs, ik.readings):
        clamped, _ = clamp_lengths(spec, actuator_lengths(spec, reading))
        flat.extend(clamped.tolist())
    return ctrl, flat, err_norm, ik.reachable


def run_to_target(
    plant: Plant,
    observer: Observer,
    target: TargetCommand,
    gains: PidGains | None = None,
    ctrl: ControlState | None = None,
    period_ms: float = 100.0,
    noise: NoiseModel | None = None,
) -> tuple[str, list[TraceEntry]]:
    """Drive the plant until the observed platform reaches the target.

    Runs the full sensing -> estimate -> PID -> IK -> clamp -> command
    loop at the control period on the plant's virtual clock.  Returns
    ("converged", trace) once the observed error norm falls within
    tol_mm, or ("timeout", trace) after timeout_ms of simulated time.
    """
    gains = gains if gains is not None else PidGains()
    ctrl = ctrl if ctrl is not None else ControlState()
    ctrl.active = True
    trace: list[TraceEntry] = []
    t_start = plant.time_ms
    while True:
        observer.ingest_line(plant.read_sensors(noise))
        pose = observer.estimate()
        position = pose.modules[target.module_index].top_center
        stale = observer.is_stale(plant.time_ms, period_ms)
        reachable = True
        if stale:
            command = None
            err_norm = float(
                np.linalg.norm(np.asarray(target.target_mm) - position)
            )
        else:
            ctrl, command, err_norm, reachable = control_tick(
                plant.specs, ctrl, gains, target,
                position, observer.last_readings, period_ms,
            )
        trace.append(TraceEntry(
            t_ms=plant.time_ms,
            estimate_mm=position.copy(),
            command_mm=command,
            error_norm_mm=err_norm,
            ik_reachable=reachable,
        ))
        if not stale and command is None:
            ctrl.active = False
            return "converged", trace
        if plant.time_ms - t_start >= ctrl.timeout_ms:
            ctrl.active = False
            return "timeout", trace
        plant.step(period_ms, command)
