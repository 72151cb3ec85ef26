"""Synthetic rider: pedalling behaviour and first-order physiology.

The rider holds a target speed, so wheel power is an input set by the road
load ``a*v + b*v**3``. A cooperative rider supplies whatever the motor does
not; a competitive rider yields only a fraction ``beta`` of the motor's
contribution. Ventilation and heart rate relax toward affine functions of
human output power with their own time constants (40 s and 25 s by default;
three ventilation time constants give the ~2 minute settling seen on the
bike).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import InfeasibleTargetsError

COOPERATIVE = "cooperative"
COMPETITIVE = "competitive"


@dataclass(frozen=True)
class CyclistParams:
    target_speed: float = 20.0  # km/h
    resting_ventilation: float = 27.5  # l/min
    ventilation_gain: float = 0.1667  # l/min per W
    ventilation_time_constant: float = 40.0  # s
    heart_rate_rest: float = 70.0  # bpm
    heart_rate_gain: float = 0.35  # bpm per W
    heart_rate_time_constant: float = 25.0  # s
    behavior: str = COOPERATIVE
    effort_noise_std: float = 0.0  # W
    competitive_beta: float = 0.3
    rolling_coeff: float = 4.0  # W per (m/s)
    aero_coeff: float = 0.92  # W per (m/s)^3

    def __post_init__(self):
        if self.ventilation_time_constant <= 0 or self.heart_rate_time_constant <= 0:
            raise ValueError("time constants must be > 0")
        if self.ventilation_gain < 0 or self.heart_rate_gain < 0:
            raise ValueError("gains must be >= 0")
        if self.resting_ventilation <= 0 or self.heart_rate_rest <= 0:
            raise ValueError("resting values must be > 0")
        if self.behavior not in (COOPERATIVE, COMPETITIVE):
            raise ValueError(f"unknown behavior {self.behavior!r}")
        if not 0 <= self.competitive_beta < 1:
            raise ValueError("competitive beta must be in [0, 1)")
        if self.effort_noise_std < 0:
            raise ValueError("effort noise std must be >= 0")
        if self.target_speed < 0:
            raise ValueError("target speed must be >= 0")


@dataclass(frozen=True)
class CyclistState:
    ventilation: float
    heart_rate: float
    current_effort: float = 0.0

    @classmethod
    def at_rest(cls, params: CyclistParams) -> "CyclistState":
        return cls(params.resting_ventilation, params.heart_rate_rest, 0.0)

    @classmethod
    def steady(cls, params: CyclistParams, p_h_out: float) -> "CyclistState":
        return cls(
            steady_ventilation(params, p_h_out),
            steady_heart_rate(params, p_h_out),
            p_h_out,
        )


def wheel_power(params: CyclistParams, speed_kmh: float) -> float:
    """Power needed to hold ``speed_kmh`` on flat ground."""
    v = speed_kmh / 3.6
    return params.rolling_coeff * v + params.aero_coeff * v ** 3


def steady_ventilation(params: CyclistParams, p_h_out: float) -> float:
    return params.resting_ventilation + params.ventilation_gain * p_h_out


def steady_heart_rate(params: CyclistParams, p_h_out: float) -> float:
    return params.heart_rate_rest + params.heart_rate_gain * p_h_out


def pedal_effort(
    params: CyclistParams,
    state: CyclistState,
    required_wheel_power: float,
    motor_output: float,
    rng: np.random.Generator | None = None,
) -> float:
    """Human output power for this tick.

    Noise is only drawn while power is required, so a stopped rider is
    exactly idle.
    """
    if required_wheel_power < 0:
        raise ValueError("required wheel power must be >= 0")
    if required_wheel_power == 0:
        return 0.0
    if params.behavior == COOPERATIVE:
        effort = max(0.0, required_wheel_power - motor_output)
    else:
        effort = max(0.0, required_wheel_power - params.competitive_beta * motor_output)
    if params.effort_noise_std > 0:
        if rng is None:
            raise ValueError("a random generator is required when effort noise is enabled")
        effort += rng.normal(0.0, params.effort_noise_std)
    return max(0.0, effort)


def physiology_step(
    params: CyclistParams, state: CyclistState, p_h_out: float, dt: float
) -> CyclistState:
    """Advance ventilation and heart rate by ``dt`` under constant ``p_h_out``.

    Uses the exact discretisation of the first-order lag, so the result does
    not depend on how a constant-input interval is subdivided.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    kv = math.exp(-dt / params.ventilation_time_constant)
    kh = math.exp(-dt / params.heart_rate_time_constant)
    v_ss = steady_ventilation(params, p_h_out)
    hr_ss = steady_heart_rate(params, p_h_out)
    return CyclistState(
        ventilation=v_ss + (state.ventilation - v_ss) * kv,
        heart_rate=hr_ss + (state.heart_rate - hr_ss) * kh,
        current_effort=p_h_out,
    )


@dataclass(frozen=True)
class SteadyTarget:
    """Steady ventilation band when riding at ``speed_kmh`` with share ``m_star``."""

    speed_kmh: float
    m_star: float
    low: float
    high: float


@dataclass(frozen=True)
class AfterStopTarget:
    """Ventilation band ``seconds`` after stopping from steady riding."""

    speed_kmh: float
    m_star: float
    seconds: float
    low: float
    high: float


def _design_row(params: CyclistParams, target) -> tuple:
    # each target is linear in (resting_ventilation, ventilation_gain)
    p_h = target.m_star * wheel_power(params, target.speed_kmh)
    if isinstance(target, SteadyTarget):
        return 1.0, p_h
    decay = math.exp(-target.seconds / params.ventilation_time_constant)
    return 1.0 - decay, decay * p_h


def predicted_ventilation(params: CyclistParams, target) -> float:
    c_rest, c_gain = _design_row(params, target)
    return c_rest * params.resting_ventilation + c_gain * params.ventilation_gain


def calibrate(params: CyclistParams, targets: Sequence) -> CyclistParams:
    """Fit resting ventilation and ventilation gain to target bands.

    Least squares against band midpoints; a single target fixes only the
    resting level. The time constant is left as given. Raises
    ``InfeasibleTargetsError`` if any fitted prediction leaves its band.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("at least one calibration target is required")
    for t in targets:
        if t.low > t.high:
            raise InfeasibleTargetsError(f"empty band [{t.low}, {t.high}]")
        if not 0 <= t.m_star <= 1:
            raise ValueError("target m* must be in [0, 1]")

    rows = np.array([_design_row(params, t) for t in targets])
    mids = np.array([(t.low + t.high) / 2 for t in targets])
    if len(targets) == 1:
        c_rest, c_gain = rows[0]
        if c_rest == 0:
            raise InfeasibleTargetsError("target does not depend on resting ventilation")
        rest = (mids[0] - c_gain * params.ventilation_gain) / c_rest
        gain = params.ventilation_gain
    else:
        if np.linalg.matrix_rank(rows) < 2:
            raise InfeasibleTargetsError("targets do not determine both resting level and gain")
        (rest, gain), *_ = np.linalg.lstsq(rows, mids, rcond=None)

    if rest <= 0 or gain < 0:
        raise InfeasibleTargetsError(
            f"fit gives resting={rest:.3f} l/min, gain={gain:.4f} l/min/W"
        )
    fitted = replace(params, resting_ventilation=float(rest), ventilation_gain=float(gain))
    for t in targets:
        v = predicted_ventilation(fitted, t)
        if not t.low - 1e-9 <= v <= t.high + 1e-9:
            raise InfeasibleTargetsError(
                f"bands conflict: fitted ventilation {v:.2f} l/min outside "
                f"[{t.low}, {t.high}] for {t}"
            )
    return fitted
