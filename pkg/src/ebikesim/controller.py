"""Low-level tracking of the human share and high-level setpoint generation.

Three pieces live here:

* the integral update ``Y' = Y - gamma * (m* - m)``, saturated to [0, Y_max];
* the consensus filter on the setpoint and its reference-tracking variant;
* pitchfork cooperation dynamics ``dP/dt = f(P_H) P - P^3`` for the motor
  output, integrated with explicit Euler, where ``f`` is a piecewise-linear
  cooperation gain.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from typing import Sequence

from .errors import StepSizeError

DEFAULT_Y_MAX = 100.0
DEFAULT_P_M_INIT = 0.1


@dataclass(frozen=True)
class TrackingState:
    y: float = 0.0
    gamma: float = 0.05
    y_max: float = DEFAULT_Y_MAX

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.y_max > 0:
            raise ValueError("y_max must be > 0")
        if not 0 <= self.y <= self.y_max:
            raise ValueError(f"Y={self.y} outside [0, {self.y_max}]")


def tracking_step(state: TrackingState, m_measured: float, m_star: float) -> TrackingState:
    """One integral step on e = m* - m, clamped to [0, Y_max].

    Higher Y means more motor power and therefore lower m, so Y rises when
    m exceeds its setpoint.
    """
    error = m_star - m_measured
    y = min(state.y_max, max(0.0, state.y - state.gamma * error))
    return replace(state, y=y)


def _check_alpha(alpha: float):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")


@dataclass(frozen=True)
class ConsensusState:
    m_star: float
    alpha: float = 0.9

    def __post_init__(self):
        _check_alpha(self.alpha)
        # the tracking variant overshoots [0, 1] when alpha < 0.5; callers clamp
        if self.m_star != self.m_star:
            raise ValueError("m* must be a number")


def consensus_step(state: ConsensusState) -> ConsensusState:
    """Average the rider setpoint with the motor setpoint 1 - m*.

    The unique fixed point is 0.5, approached geometrically with ratio
    2*alpha - 1.
    """
    _check_alpha(state.alpha)
    a = state.alpha
    return replace(state, m_star=(1 - a) + (2 * a - 1) * state.m_star)


def consensus_tracking_step(state: ConsensusState, reference: float) -> ConsensusState:
    """Consensus filter that settles on a piecewise-constant reference."""
    _check_alpha(state.alpha)
    a = state.alpha
    return replace(state, m_star=(2 * a - 1) * state.m_star + 2 * (1 - a) * reference)


@dataclass(frozen=True)
class CooperationGain:
    """Piecewise-linear gain f over human output power.

    ``breakpoints`` are (chi [W], f) pairs with strictly increasing chi; the
    first must be (0, 0) and every later value positive, so f(0) = 0 and
    f > 0 everywhere above zero. Beyond the last breakpoint f stays at the
    last value.
    """

    breakpoints: tuple

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.breakpoints)
        object.__setattr__(self, "breakpoints", pts)
        if len(pts) < 2:
            raise ValueError("cooperation gain needs at least two breakpoints")
        if pts[0] != (0.0, 0.0):
            raise ValueError("cooperation gain must start at (0, 0)")
        xs = [x for x, _ in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoint powers must be strictly increasing")
        if any(y <= 0 for _, y in pts[1:]):
            raise ValueError("cooperation gain must be positive for every chi > 0")

    @classmethod
    def default(
        cls,
        chi_coop: float = 50.0,
        chi_comp: float = 250.0,
        chi_off: float = 400.0,
        f_max: float = 400.0,
        f_floor: float = 1.0,
    ) -> "CooperationGain":
        """Ramp to ``f_max`` at ``chi_coop``, hold to ``chi_comp``, then
        decay to ``f_floor`` at ``chi_off``."""
        return cls(((0.0, 0.0), (chi_coop, f_max), (chi_comp, f_max), (chi_off, f_floor)))

    @property
    def f_max(self) -> float:
        return max(y for _, y in self.breakpoints)

    def __call__(self, chi: float) -> float:
        return cooperation_gain(self, chi)


def cooperation_gain(profile: CooperationGain, p_h_out: float) -> float:
    pts = profile.breakpoints
    if p_h_out <= 0:
        return 0.0
    if p_h_out >= pts[-1][0]:
        return pts[-1][1]
    xs = [x for x, _ in pts]
    i = bisect.bisect_right(xs, p_h_out)
    (x0, y0), (x1, y1) = pts[i - 1], pts[i]
    return y0 + (y1 - y0) * (p_h_out - x0) / (x1 - x0)


def stability_bound(profile: CooperationGain) -> float:
    """Largest admissible Euler step, 2 / (3 f_max)."""
    return 2.0 / (3.0 * profile.f_max)


@dataclass(frozen=True)
class BifurcationState:
    p_m_out: float = DEFAULT_P_M_INIT
    dt: float = 0.001
    gain_profile: CooperationGain = field(default_factory=CooperationGain.default)

    def __post_init__(self):
        if self.p_m_out < 0:
            raise ValueError("motor output power must be >= 0")
        if not self.dt > 0:
            raise StepSizeError("dt must be > 0")
        bound = stability_bound(self.gain_profile)
        if self.dt >= bound:
            raise StepSizeError(
                f"dt={self.dt} violates the stability bound dt < {bound:.6g} "
                f"for f_max={self.gain_profile.f_max:g}"
            )


def bifurcation_step(state: BifurcationState, p_h_out: float) -> BifurcationState:
    """Explicit Euler step of dP/dt = f(P_H) P - P^3, clamped at zero."""
    f = cooperation_gain(state.gain_profile, p_h_out)
    p = state.p_m_out
    p_next = max(0.0, p + state.dt * (f * p - p ** 3))
    return replace(state, p_m_out=p_next)


def bifurcation_advance(state: BifurcationState, p_h_out: float, steps: int) -> BifurcationState:
    """``steps`` Euler steps under constant human power; same arithmetic as
    repeated :func:`bifurcation_step`."""
    f = cooperation_gain(state.gain_profile, p_h_out)
    p, dt = state.p_m_out, state.dt
    for _ in range(steps):
        p = max(0.0, p + dt * (f * p - p ** 3))
    return replace(state, p_m_out=p)


def integrate_bifurcation(state: BifurcationState, p_h_out: float, steps: int) -> list:
    """Trajectory [P(0), ..., P(steps)] for constant human power."""
    traj = [state.p_m_out]
    for _ in range(steps):
        state = bifurcation_step(state, p_h_out)
        traj.append(state.p_m_out)
    return traj


def constant_gain(value: float, ramp: float = 1e-6) -> CooperationGain:
    """Profile that is ``value`` for every chi >= ``ramp`` (a step from 0)."""
    return CooperationGain(((0.0, 0.0), (ramp, value)))


def parse_profile(text: str) -> CooperationGain:
    """``"0:0, 50:400, 250:400, 400:1"`` -> CooperationGain."""
    pts = []
    for item in text.split(","):
        chi, _, val = item.partition(":")
        pts.append((float(chi), float(val)))
    return CooperationGain(tuple(pts))


def schedule_value(schedule: Sequence[tuple], t: float) -> float:
    """Value of a piecewise-constant (start_time, value) schedule at ``t``."""
    starts = [s for s, _ in schedule]
    i = bisect.bisect_right(starts, t + 1e-9) - 1
    return schedule[max(i, 0)][1]
