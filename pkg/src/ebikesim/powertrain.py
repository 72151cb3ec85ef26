"""Power accounting for the motor and the rider.

Motor input power is V_M * I_M with I_M = mu * Y; rider input power is pedal
torque times pedal speed. Output powers scale the inputs by motor and
crankset efficiency, and their sum approximates the power at the rear wheel.
The human share ``m`` is computed from moving averages of exponentially
smoothed output powers.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

DEFAULT_FILTER_ALPHA = 0.2
DEFAULT_WINDOW = 50
DEFAULT_DEAD_ZONE_W = 1.0


@dataclass(frozen=True)
class MotorSample:
    voltage: float
    control_input: float  # Y
    current_gain: float = 1.0  # mu, A per unit Y
    efficiency: float = 0.8  # E_m

    def __post_init__(self):
        if not self.voltage > 0:
            raise ValueError("motor voltage must be > 0")
        if self.control_input < 0:
            raise ValueError("control input Y must be >= 0")
        if self.current_gain < 0:
            raise ValueError("current gain must be >= 0")
        if not 0 < self.efficiency <= 1:
            raise ValueError("motor efficiency must be in (0, 1]")

    @property
    def current(self) -> float:
        return self.current_gain * self.control_input


@dataclass(frozen=True)
class CrankSample:
    torque: float  # N m
    speed: float  # rad/s
    efficiency: float = 0.95  # E_c

    def __post_init__(self):
        if self.torque < 0 or self.speed < 0:
            raise ValueError("pedal torque and speed must be >= 0")
        if not 0 < self.efficiency <= 1:
            raise ValueError("crank efficiency must be in (0, 1]")


@dataclass(frozen=True)
class PowerShares:
    p_m_filtered: float
    p_h_filtered: float
    p_m_avg: float
    p_h_avg: float
    m: float


@dataclass(frozen=True)
class Drivetrain:
    """Fixed-gear drivetrain constants."""

    voltage: float = 36.0
    current_gain: float = 1.0
    motor_efficiency: float = 0.8
    crank_efficiency: float = 0.95
    wheel_radius_m: float = 0.35
    gear_ratio: float = 2.0  # wheel revolutions per crank revolution

    def __post_init__(self):
        if not self.voltage > 0:
            raise ValueError("voltage must be > 0")
        if not 0 < self.motor_efficiency <= 1 or not 0 < self.crank_efficiency <= 1:
            raise ValueError("efficiencies must be in (0, 1]")
        if not self.wheel_radius_m > 0 or not self.gear_ratio > 0:
            raise ValueError("wheel radius and gear ratio must be > 0")

    def motor_sample(self, y: float) -> MotorSample:
        return MotorSample(self.voltage, y, self.current_gain, self.motor_efficiency)

    def pedal_speed(self, speed_mps: float) -> float:
        return speed_mps / self.wheel_radius_m / self.gear_ratio

    def crank_sample(self, p_h_out: float, speed_mps: float) -> CrankSample:
        """Crank sample that delivers ``p_h_out`` at the crankset output."""
        omega = self.pedal_speed(speed_mps)
        if omega <= 0 or p_h_out <= 0:
            return CrankSample(0.0, omega, self.crank_efficiency)
        torque = p_h_out / self.crank_efficiency / omega
        return CrankSample(torque, omega, self.crank_efficiency)

    def y_for_output(self, p_m_out: float) -> float:
        """Control input that makes the motor deliver ``p_m_out``."""
        return p_m_out / (self.motor_efficiency * self.voltage * self.current_gain)


def motor_input_power(sample: MotorSample) -> float:
    return sample.voltage * sample.current


def human_input_power(sample: CrankSample) -> float:
    return sample.torque * sample.speed


def output_powers(motor: MotorSample, crank: CrankSample) -> tuple:
    """(P_M_out, P_H_out). Wheel power is approximately their sum."""
    return (
        motor.efficiency * motor_input_power(motor),
        crank.efficiency * human_input_power(crank),
    )


def filter_power(previous_filtered: float, raw: float, alpha: float = DEFAULT_FILTER_ALPHA) -> float:
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    return alpha * raw + (1 - alpha) * previous_filtered


def moving_average(window: Sequence[float]) -> float:
    if len(window) == 0:
        raise ValueError("moving average of an empty window")
    # offset by the first sample: a constant window averages to itself exactly
    first = window[0]
    return first + math.fsum(x - first for x in window) / len(window)


def human_share(
    p_h_avg: float,
    p_m_avg: float,
    previous: float = 1.0,
    dead_zone: float = DEFAULT_DEAD_ZONE_W,
) -> float:
    """m = P_H / (P_H + P_M); holds ``previous`` when both are in the dead zone."""
    if p_h_avg < 0 or p_m_avg < 0:
        raise ValueError("average powers must be >= 0")
    if p_h_avg < dead_zone and p_m_avg < dead_zone:
        return previous
    return min(1.0, max(0.0, p_h_avg / (p_h_avg + p_m_avg)))


class PowerMeter:
    """Filter and average the two output powers and track ``m``.

    Owned by one simulation loop.
    """

    def __init__(
        self,
        alpha: float = DEFAULT_FILTER_ALPHA,
        window: int = DEFAULT_WINDOW,
        dead_zone: float = DEFAULT_DEAD_ZONE_W,
        m_initial: float = 1.0,
    ):
        if window < 1:
            raise ValueError("window must be >= 1")
        if not 0 < alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        self.alpha = alpha
        self.dead_zone = dead_zone
        self.p_m_filtered = 0.0
        self.p_h_filtered = 0.0
        self._m_window = deque(maxlen=window)
        self._h_window = deque(maxlen=window)
        self.m = m_initial

    def prime(self, p_m_out: float, p_h_out: float):
        """Fill filters and windows as if both powers had been constant."""
        self.p_m_filtered = p_m_out
        self.p_h_filtered = p_h_out
        self._m_window.extend([p_m_out] * self._m_window.maxlen)
        self._h_window.extend([p_h_out] * self._h_window.maxlen)
        self.m = human_share(p_h_out, p_m_out, self.m, self.dead_zone)

    def update(self, p_m_out: float, p_h_out: float) -> PowerShares:
        self.p_m_filtered = filter_power(self.p_m_filtered, p_m_out, self.alpha)
        self.p_h_filtered = filter_power(self.p_h_filtered, p_h_out, self.alpha)
        self._m_window.append(self.p_m_filtered)
        self._h_window.append(self.p_h_filtered)
        p_m_avg = max(0.0, moving_average(self._m_window))
        p_h_avg = max(0.0, moving_average(self._h_window))
        self.m = human_share(p_h_avg, p_m_avg, self.m, self.dead_zone)
        return PowerShares(self.p_m_filtered, self.p_h_filtered, p_m_avg, p_h_avg, self.m)
