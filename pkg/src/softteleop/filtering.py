"""Scalar filters for the time-of-flight height channel.

The TOF distance readings are mostly steady but throw sharp spikes every
few samples.  A windowed mean either passes the spikes through or, with
a window long enough to dilute them, lags too much for control.  The
constant-state scalar Kalman filter below is the one actually used; the
mean filter is kept for comparison experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class KalmanParams:
    """Process/measurement variances and the initial state."""

    q: float = 0.01
    r: float = 0.40
    x0: float = 0.0
    p0: float = 0.0

    def __post_init__(self):
        if self.q <= 0 or self.r <= 0:
            raise ValueError(f"q and r must be > 0, got q={self.q}, r={self.r}")
        if self.p0 < 0:
            raise ValueError(f"p0 must be >= 0, got {self.p0}")


@dataclass(frozen=True)
class KalmanState:
    """Current estimate (mm) and covariance (mm^2)."""

    x: float
    p: float

    def __post_init__(self):
        if not math.isfinite(self.x) or self.p < 0:
            raise ValueError(f"invalid filter state x={self.x}, p={self.p}")


def kalman_step(state: KalmanState, params: KalmanParams, z: float) -> KalmanState:
    """One predict/update cycle of the constant-state scalar filter.

       p_pred = p + q
       k      = p_pred / (p_pred + r)
       x'     = x + k (z - x)
       p'     = (1 - k) p_pred

    Non-finite measurements are rejected so a sensor dropout cannot
    poison the state; callers keep the previous estimate.
    """
    if not math.isfinite(z):
        raise ValueError(f"measurement must be finite, got {z}")
    p_pred = state.p + params.q
    k = p_pred / (p_pred + params.r)
    x = state.x + k * (z - state.x)
    p = (1.0 - k) * p_pred
    return KalmanState(x=x, p=p)


def covariance_fixed_point(params: KalmanParams) -> float:
    """Steady-state covariance: positive root of p^2 + q p - q r = 0."""
    q, r = params.q, params.r
    return (-q + math.sqrt(q * q + 4.0 * q * r)) / 2.0


def steady_state_gain(params: KalmanParams) -> float:
    """Kalman gain at the covariance fixed point."""
    p_pred = covariance_fixed_point(params) + params.q
    return p_pred / (p_pred + params.r)


def mean_filter(window: Sequence[float]) -> float:
    """Arithmetic mean of a measurement window."""
    if len(window) == 0:
        raise ValueError("mean_filter needs a non-empty window")
    return sum(window) / len(window)


def filter_series(params: KalmanParams, zs: Iterable[float]) -> list[float]:
    """Run the scalar filter over a measurement series.

    Output i is the estimate after consuming measurements 0..i; an empty
    input yields an empty output.
    """
    state = KalmanState(x=params.x0, p=params.p0)
    out: list[float] = []
    for z in zs:
        state = kalman_step(state, params, z)
        out.append(state.x)
    return out
