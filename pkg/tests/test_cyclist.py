import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ebikesim.cyclist import (
    AfterStopTarget,
    CyclistParams,
    CyclistState,
    SteadyTarget,
    calibrate,
    pedal_effort,
    physiology_step,
    predicted_ventilation,
    steady_heart_rate,
    steady_ventilation,
    wheel_power,
)
from ebikesim.errors import InfeasibleTargetsError

P = CyclistParams()
REST = CyclistState.at_rest(P)


def run(params, state, p_h, seconds, dt=0.1):
    trace = []
    for _ in range(int(round(seconds / dt))):
        state = physiology_step(params, state, p_h, dt)
        trace.append(state)
    return state, trace


class TestPedalEffort:
    def test_cooperative(self):
        assert pedal_effort(P, REST, 180, 120) == 60

    def test_motor_exceeds(self):
        assert pedal_effort(P, REST, 180, 200) == 0

    def test_competitive(self):
        comp = CyclistParams(behavior="competitive", competitive_beta=0.3)
        assert pedal_effort(comp, REST, 180, 120) == pytest.approx(144)

    def test_stopped_is_idle(self):
        noisy = CyclistParams(effort_noise_std=5.0)
        assert pedal_effort(noisy, REST, 0, 0, np.random.default_rng(1)) == 0

    def test_noise_needs_rng(self):
        with pytest.raises(ValueError):
            pedal_effort(CyclistParams(effort_noise_std=1.0), REST, 180, 0)

    def test_seed_determinism(self):
        noisy = CyclistParams(effort_noise_std=5.0)
        seqs = []
        for _ in range(2):
            rng = np.random.default_rng(1234)
            seqs.append([pedal_effort(noisy, REST, 180, 60, rng) for _ in range(500)])
        assert seqs[0] == seqs[1]
        rng = np.random.default_rng(4321)
        assert [pedal_effort(noisy, REST, 180, 60, rng) for _ in range(500)] != seqs[0]


def test_wheel_power_at_20kmh():
    assert wheel_power(P, 20) == pytest.approx(180, abs=1)
    assert wheel_power(P, 0) == 0


class TestPhysiology:
    def test_returns_to_rest(self):
        start = CyclistState.steady(P, 180)
        end, _ = run(P, start, 0.0, 600)
        assert end.ventilation == pytest.approx(P.resting_ventilation, abs=1e-4)
        assert end.heart_rate == pytest.approx(P.heart_rate_rest, abs=1e-4)

    def test_one_time_constant(self):
        end, _ = run(P, REST, 150.0, P.ventilation_time_constant)
        gap = steady_ventilation(P, 150.0) - P.resting_ventilation
        closed = (end.ventilation - P.resting_ventilation) / gap
        assert closed == pytest.approx(1 - math.exp(-1), abs=0.001)
        assert closed == pytest.approx(0.632, abs=0.001)

    def test_default_full_human_band(self):
        v = steady_ventilation(P, wheel_power(P, 20))
        assert 55 <= v <= 60

    def test_step_independent_of_subdivision(self):
        a = physiology_step(P, REST, 100.0, 10.0)
        b, _ = run(P, REST, 100.0, 10.0, dt=0.5)
        assert a.ventilation == pytest.approx(b.ventilation, rel=1e-12)

    def test_rejects_dt(self):
        with pytest.raises(ValueError):
            physiology_step(P, REST, 0, 0)

    def test_settling_time(self):
        _, trace = run(P, REST, 150.0, 300)
        v0, vss = P.resting_ventilation, steady_ventilation(P, 150.0)
        inside = [abs(s.ventilation - vss) <= 0.05 * abs(vss - v0) for s in trace]
        first = next(i for i, ok in enumerate(inside) if ok and all(inside[i:]))
        t95 = (first + 1) * 0.1
        assert 110 <= t95 <= 130

    @settings(max_examples=50)
    @given(st.floats(0, 300), st.lists(st.floats(0, 300), min_size=1, max_size=40))
    def test_bounded(self, p0, powers):
        p_max = max([p0, *powers])
        s = CyclistState.steady(P, p0)
        for p in powers:
            s = physiology_step(P, s, p, 1.0)
            assert P.resting_ventilation - 1e-9 <= s.ventilation <= steady_ventilation(P, p_max) + 1e-9

    def test_monotone_step_response(self):
        _, trace = run(P, CyclistState.steady(P, 160), 50.0, 200)
        v = [s.ventilation for s in trace]
        assert all(b < a for a, b in zip(v, v[1:]))

    def test_hr_ventilation_correlation(self):
        levels = np.linspace(0, 250, 11)
        hr = [steady_heart_rate(P, p) for p in levels]
        ve = [steady_ventilation(P, p) for p in levels]
        assert np.corrcoef(hr, ve)[0, 1] == pytest.approx(1.0, abs=1e-12)

        # square-wave effort: transients dominate, correlation drops
        s = REST
        hr_t, ve_t = [], []
        for k in range(3000):
            p = 180.0 if (k // 300) % 2 == 0 else 20.0
            s = physiology_step(P, s, p, 0.1)
            hr_t.append(s.heart_rate)
            ve_t.append(s.ventilation)
        window = 300
        corrs = [
            np.corrcoef(hr_t[i:i + window], ve_t[i:i + window])[0, 1]
            for i in range(0, len(hr_t) - window, 50)
        ]
        assert max(corrs) < 1.0 - 1e-6


class TestCalibrate:
    def test_step_test_bands(self):
        targets = [SteadyTarget(20, 0.9, 55, 60), SteadyTarget(20, 0.3, 35, 40)]
        fitted = calibrate(P, targets)
        for t in targets:
            assert t.low <= predicted_ventilation(fitted, t) <= t.high
        assert fitted.ventilation_time_constant == P.ventilation_time_constant

    def test_stop_test_single_target(self):
        t = AfterStopTarget(15, 1.0, 120, 25, 30)
        fitted = calibrate(P, [t])
        assert predicted_ventilation(fitted, t) == pytest.approx(27.5)
        assert fitted.ventilation_gain == P.ventilation_gain

    def test_single_target_exact(self):
        t = SteadyTarget(20, 1.0, 50, 50)
        fitted = calibrate(P, [t])
        assert predicted_ventilation(fitted, t) == pytest.approx(50.0, abs=1e-12)

    def test_two_targets_exact_interpolation(self):
        targets = [SteadyTarget(20, 1.0, 58, 58), SteadyTarget(20, 0.0, 30, 30)]
        fitted = calibrate(P, targets)
        assert fitted.resting_ventilation == pytest.approx(30.0)
        assert fitted.ventilation_gain == pytest.approx(28.0 / wheel_power(P, 20))

    def test_conflicting_bands(self):
        # same operating point, disjoint bands
        with pytest.raises(InfeasibleTargetsError):
            calibrate(P, [SteadyTarget(20, 0.9, 55, 56), SteadyTarget(20, 0.9, 40, 41)])

    def test_negative_gain_infeasible(self):
        with pytest.raises(InfeasibleTargetsError):
            calibrate(P, [SteadyTarget(20, 0.9, 30, 31), SteadyTarget(20, 0.3, 55, 56)])

    def test_empty(self):
        with pytest.raises(ValueError):
            calibrate(P, [])
