import pytest
from hypothesis import given, strategies as st

from ebikesim.powertrain import (
    CrankSample,
    Drivetrain,
    MotorSample,
    PowerMeter,
    filter_power,
    human_input_power,
    human_share,
    motor_input_power,
    moving_average,
    output_powers,
)


@pytest.mark.parametrize("v, mu, y, expected", [(36, 1, 5, 180), (36, 1, 0, 0), (36, 0.5, 10, 180)])
def test_motor_input_power(v, mu, y, expected):
    assert motor_input_power(MotorSample(v, y, mu)) == expected


@pytest.mark.parametrize("tau, omega, expected", [(20, 6, 120), (20, 0, 0), (15, 8, 120)])
def test_human_input_power(tau, omega, expected):
    assert human_input_power(CrankSample(tau, omega)) == expected


def test_output_powers():
    p_m, p_h = output_powers(MotorSample(36, 5, 1, 0.8), CrankSample(20, 6, 0.95))
    assert p_m == pytest.approx(144)
    assert p_h == pytest.approx(114)
    assert output_powers(MotorSample(36, 0, 1, 0.8), CrankSample(0, 0, 0.95)) == (0, 0)


def test_sample_validation():
    with pytest.raises(ValueError):
        MotorSample(0, 1)
    with pytest.raises(ValueError):
        MotorSample(36, -1)
    with pytest.raises(ValueError):
        MotorSample(36, 1, 1, 1.2)
    with pytest.raises(ValueError):
        CrankSample(-1, 1)


class TestFilter:
    def test_pass_through(self):
        assert filter_power(3.0, 42.0, 1.0) == 42.0

    def test_hand_value(self):
        assert filter_power(0.0, 100.0, 0.1) == pytest.approx(10.0)

    def test_converges_to_constant(self):
        y = 500.0
        for _ in range(400):
            y = filter_power(y, 80.0, 0.2)
        assert y == pytest.approx(80.0, abs=1e-9)

    def test_rejects_alpha(self):
        with pytest.raises(ValueError):
            filter_power(0, 1, 0)

    @given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0.01, 1))
    def test_contraction(self, prev, raw, alpha):
        out = filter_power(prev, raw, alpha)
        assert abs(out - raw) <= (1 - alpha) * abs(prev - raw) + 1e-9


class TestMovingAverage:
    def test_singleton(self):
        assert moving_average([100.0]) == 100.0

    def test_pair(self):
        assert moving_average([0.0, 100.0]) == 50.0

    def test_empty(self):
        with pytest.raises(ValueError):
            moving_average([])

    @given(st.floats(0, 1e6), st.integers(1, 60))
    def test_constant_exact(self, c, n):
        assert moving_average([c] * n) == c


class TestHumanShare:
    def test_full_human(self):
        assert human_share(114, 0) == 1.0

    def test_full_electric(self):
        assert human_share(0, 144) == 0.0

    def test_ratio(self):
        assert human_share(60, 120) == pytest.approx(1 / 3)

    def test_dead_zone_holds(self):
        assert human_share(0.0, 0.0, previous=0.42) == 0.42
        assert human_share(0.5, 0.2, previous=0.42) == 0.42

    @given(st.floats(0, 1e4), st.floats(0, 1e4))
    def test_bounded(self, h, m):
        assert 0.0 <= human_share(h, m) <= 1.0

    @given(st.floats(1.0, 1e4), st.floats(0, 1e4), st.floats(1e-3, 1e3))
    def test_strictly_decreasing_in_motor(self, h, m, dm):
        assert human_share(h, m + dm) < human_share(h, m)


@given(
    st.floats(1, 100), st.floats(0, 50), st.floats(0, 100), st.floats(0, 50),
    st.floats(0.1, 10), st.floats(0.1, 10),
)
def test_output_powers_linear(v, y1, tau1, omega1, scale_y, scale_tau):
    dtn = Drivetrain(voltage=v)
    m1, h1 = output_powers(dtn.motor_sample(y1), CrankSample(tau1, omega1))
    m2, h2 = output_powers(dtn.motor_sample(y1 * scale_y), CrankSample(tau1 * scale_tau, omega1))
    assert m2 == pytest.approx(scale_y * m1, rel=1e-12, abs=1e-12)
    assert h2 == pytest.approx(scale_tau * h1, rel=1e-12, abs=1e-12)
    # additivity in Y
    m3, _ = output_powers(dtn.motor_sample(y1 + y1 * scale_y), CrankSample(0, 0))
    assert m3 == pytest.approx(m1 + m2, rel=1e-12, abs=1e-12)


def test_crank_sample_round_trip():
    dtn = Drivetrain()
    crank = dtn.crank_sample(150.0, 20 / 3.6)
    assert crank.efficiency * human_input_power(crank) == pytest.approx(150.0)
    assert dtn.crank_sample(150.0, 0.0).torque == 0.0


def test_meter_zero_motor_gives_full_human():
    meter = PowerMeter()
    for _ in range(100):
        shares = meter.update(0.0, 120.0)
    assert shares.m == 1.0
    assert shares.p_m_avg == 0.0


def test_meter_converges_to_ratio():
    meter = PowerMeter(alpha=0.2, window=50)
    for _ in range(500):
        shares = meter.update(120.0, 60.0)
    assert shares.m == pytest.approx(1 / 3)
    assert shares.p_h_avg == pytest.approx(60.0)


def test_meter_primed_is_steady():
    meter = PowerMeter(window=10)
    meter.prime(30.0, 90.0)
    shares = meter.update(30.0, 90.0)
    assert shares.m == pytest.approx(0.75)
    assert shares.p_m_filtered == 30.0
