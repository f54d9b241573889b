"""Kinematics of a chain of parallel-actuator soft modules.

Each module is a base plate and a top plate joined by ``n`` extensible
actuators whose lower ends sit on a circle of radius ``L`` in the base
plane.  The model treats the actuators as straight extensible rods: the
top plate pivots about a fixed central point whose height above the base
centre equals the mean actuator height ``h``, and tilts by the two IMU
angles ``phi`` (about local X) and ``theta`` (about local Y).

Modules chain rigidly: the next base centre lies a fixed distance ``d``
along the top-plate normal, and module orientations compose left to
right.  Everything here is pure and stateless; all positions are in
millimetres and all angles in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

_ORTHO_TOL = 1e-9
_UNIT_TOL = 1e-6

# (cos, sin) at multiples of 30 degrees, kept in closed form so that
# triangle/square/hexagon layouts match their textbook coordinates
# bit-for-bit instead of through np.cos(2*pi*k/n).
_HALF = 0.5
_RT3_2 = math.sqrt(3.0) / 2.0
_EXACT_TURNS = {
    0: (1.0, 0.0),
    1: (_RT3_2, _HALF),
    2: (_HALF, _RT3_2),
    3: (0.0, 1.0),
    4: (-_HALF, _RT3_2),
    5: (-_RT3_2, _HALF),
    6: (-1.0, 0.0),
    7: (-_RT3_2, -_HALF),
    8: (-_HALF, -_RT3_2),
    9: (0.0, -1.0),
    10: (_HALF, -_RT3_2),
    11: (_RT3_2, -_HALF),
}


@dataclass(frozen=True)
class ModuleSpec:
    """Geometry and actuator limits of one module."""

    actuator_count: int = 3
    radius_mm: float = 15.0
    plate_offset_mm: float = 5.0
    min_len_mm: float = 30.0
    max_len_mm: float = 60.0
    tilt_limit_deg: float = 10.0

    def __post_init__(self):
        if self.actuator_count < 3:
            raise ValueError(f"actuator_count must be >= 3, got {self.actuator_count}")
        if self.radius_mm <= 0:
            raise ValueError(f"radius_mm must be > 0, got {self.radius_mm}")
        if self.plate_offset_mm < 0:
            raise ValueError(f"plate_offset_mm must be >= 0, got {self.plate_offset_mm}")
        if not (0 < self.min_len_mm < self.max_len_mm):
            raise ValueError(
                f"need 0 < min_len_mm < max_len_mm, got {self.min_len_mm}, {self.max_len_mm}"
            )
        if self.tilt_limit_deg <= 0:
            raise ValueError(f"tilt_limit_deg must be > 0, got {self.tilt_limit_deg}")

    @property
    def tilt_limit_rad(self) -> float:
        return math.radians(self.tilt_limit_deg)


@dataclass(frozen=True)
class ModuleReading:
    """One module's sensor state: TOF height plus the two IMU tilts."""

    h_mm: float
    phi_rad: float = 0.0
    theta_rad: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.h_mm) and self.h_mm > 0):
            raise ValueError(f"h_mm must be finite and > 0, got {self.h_mm}")
        if not (abs(self.phi_rad) < math.pi / 2 and abs(self.theta_rad) < math.pi / 2):
            raise ValueError(
                f"tilt angles must satisfy |angle| < pi/2, got {self.phi_rad}, {self.theta_rad}"
            )
        if not (math.isfinite(self.phi_rad) and math.isfinite(self.theta_rad)):
            raise ValueError("tilt angles must be finite")


@dataclass
class ModulePose:
    """Placed geometry of one module, all points in the global frame."""

    base_origin: np.ndarray           # (3,)
    rotation_local: np.ndarray        # (3,3), top plate w.r.t. own base
    rotation_global: np.ndarray       # (3,3), top plate w.r.t. robot base
    base_vertices: np.ndarray         # (n,3)
    top_vertices: np.ndarray          # (n,3)
    top_center: np.ndarray            # (3,)
    top_normal: np.ndarray            # (3,), unit
    actuator_lengths_mm: np.ndarray   # (n,)


@dataclass
class RobotPose:
    """Pose of the whole chain; ``end_effector`` is the last top centre."""

    modules: list[ModulePose]
    end_effector: np.ndarray


def _cos_sin_turn(k: int, n: int) -> tuple[float, float]:
    """(cos, sin) of the angle 2*pi*k/n, exact at 30-degree multiples."""
    turn = Fraction(k, n) % 1
    if 12 % turn.denominator == 0:
        return _EXACT_TURNS[12 * turn.numerator // turn.denominator]
    ang = 2.0 * math.pi * float(turn)
    return math.cos(ang), math.sin(ang)


def base_vertices(spec: ModuleSpec) -> np.ndarray:
    """Actuator lower-end positions in the module's base plane.

    Vertex ``k`` sits at polar angle 2*pi*k/n on the circle of radius
    ``radius_mm``, vertex 0 on +X, all at z = 0.  For three actuators this
    is the equilateral triangle (L,0,0), (-L/2, +sqrt(3)L/2, 0),
    (-L/2, -sqrt(3)L/2, 0).
    """
    n = spec.actuator_count
    L = spec.radius_mm
    pts = np.empty((n, 3))
    for k in range(n):
        c, s = _cos_sin_turn(k, n)
        pts[k] = (L * c, L * s, 0.0)
    return pts


def rotation_from_imu(phi_rad: float, theta_rad: float) -> np.ndarray:
    """Top-plate rotation from the two IMU tilt readings.

    Equals Ry(phi) @ Rx(theta); entries written out so the matrix is the
    operative definition rather than a product of conventions.
    """
    cp, sp = math.cos(phi_rad), math.sin(phi_rad)
    ct, st = math.cos(theta_rad), math.sin(theta_rad)
    return np.array([
        [cp, sp * st, sp * ct],
        [0.0, ct, -st],
        [-sp, cp * st, cp * ct],
    ])


def top_vertices(spec: ModuleSpec, reading: ModuleReading) -> np.ndarray:
    """Actuator upper-end positions in the module's base frame.

    Each base vertex is rotated by the IMU rotation and lifted by
    (0, 0, h); the centroid of the result is therefore (0, 0, h).
    """
    R = rotation_from_imu(reading.phi_rad, reading.theta_rad)
    pts = base_vertices(spec) @ R.T
    pts[:, 2] += reading.h_mm
    return pts


def actuator_lengths(spec: ModuleSpec, reading: ModuleReading) -> np.ndarray:
    """Straight-rod actuator lengths for one module, in mm."""
    diff = top_vertices(spec, reading) - base_vertices(spec)
    return np.linalg.norm(diff, axis=1)


def platform_center_normal(
    spec: ModuleSpec, reading: ModuleReading
) -> tuple[np.ndarray, np.ndarray]:
    """Top-plate centre and unit normal in the module's base frame."""
    center = top_vertices(spec, reading).mean(axis=0)
    R = rotation_from_imu(reading.phi_rad, reading.theta_rad)
    normal = R[:, 2].copy()  # R @ (0,0,1)
    return center, normal


def next_base_origin(top_center: np.ndarray, top_normal: np.ndarray, d: float) -> np.ndarray:
    """Base centre of the next module: ``d`` along the top-plate normal."""
    top_normal = np.asarray(top_normal, dtype=float)
    nrm = np.linalg.norm(top_normal)
    if abs(nrm - 1.0) > _UNIT_TOL:
        raise ValueError(f"top_normal must be unit length, |n| = {nrm}")
    return np.asarray(top_center, dtype=float) + d * top_normal


def compose_global(local_rotations: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Cumulative left-to-right products of the per-module rotations."""
    out: list[np.ndarray] = []
    acc = None
    for R in local_rotations:
        acc = np.array(R, dtype=float) if acc is None else acc @ R
        out.append(acc)
    return out


def forward_chain(
    specs: Sequence[ModuleSpec], readings: Sequence[ModuleReading]
) -> RobotPose:
    """Place every module in the global frame and return the full pose.

    Module i's base plate inherits the orientation of module i-1's top
    plate; its local geometry is mapped by that inherited rotation and
    its own top rotation then composes onto the running product.  The
    next base origin is the current top centre displaced by
    ``plate_offset_mm`` along the global top normal.
    """
    if len(specs) != len(readings):
        raise ValueError(f"got {len(specs)} specs but {len(readings)} readings")
    if not specs:
        raise ValueError("need at least one module")

    modules: list[ModulePose] = []
    origin = np.zeros(3)
    R_prev = np.eye(3)  # orientation of the current module's base plate
    for spec, reading in zip(specs, readings):
        R_local = rotation_from_imu(reading.phi_rad, reading.theta_rad)
        R_global = R_prev @ R_local

        base_local = base_vertices(spec)
        top_local = base_local @ R_local.T
        top_local[:, 2] += reading.h_mm

        base_glob = origin + base_local @ R_prev.T
        top_glob = origin + top_local @ R_prev.T
        center_local = top_local.mean(axis=0)
        center = origin + R_prev @ center_local
        normal = R_global[:, 2].copy()
        lengths = np.linalg.norm(top_glob - base_glob, axis=1)

        modules.append(ModulePose(
            base_origin=origin,
            rotation_local=R_local,
            rotation_global=R_global,
            base_vertices=base_glob,
            top_vertices=top_glob,
            top_center=center,
            top_normal=normal,
            actuator_lengths_mm=lengths,
        ))

        origin = next_base_origin(center, normal, spec.plate_offset_mm)
        R_prev = R_global

    return RobotPose(modules=modules, end_effector=modules[-1].top_center.copy())


def clamp_lengths(
    spec: ModuleSpec, lengths: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """Clamp actuator lengths into the module's elongation bounds.

    Returns the clamped lengths and a boolean saturation flag per
    actuator (True iff the input was outside the closed interval).
    """
    arr = np.asarray(lengths, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("lengths must be finite")
    clamped = np.clip(arr, spec.min_len_mm, spec.max_len_mm)
    flags = (arr < spec.min_len_mm) | (arr > spec.max_len_mm)
    return clamped, flags


def is_rotation(m: np.ndarray, tol: float = _ORTHO_TOL) -> bool:
    """True when ``m`` is orthonormal with determinant +1 within ``tol``."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        return False
    return (
        np.max(np.abs(m.T @ m - np.eye(3))) <= tol
        and abs(np.linalg.det(m) - 1.0) <= tol
    )
