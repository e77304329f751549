import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from iemi_lidar.emi import (RPM_FLOOR, CouplingChannel, EmiSource, MonitoringReadout, PerturbationThresholds,
                            Resonance, coupled_amplitude, decay_rpm, estimate_band, generator_power_for,
                            perturb_monitoring)
from iemi_lidar.errors import DomainError
from iemi_lidar.fdd import (FAULT_LEVELS, FaultCode, FaultEvent, FaultLevel, FddMachine, LidarState,
                            classify_faults, points_invalid, reboot, step)

TRUTH = MonitoringReadout(40.0, (12.0, 5.0, 3.3), 600.0, 0.0)
CEILING_DBM = 10 * math.log10(50 * 1000)


def channel_on(surface, center=1e9, width=20e6, gain_db=0.0):
    return CouplingChannel({surface: [Resonance(center, width, gain_db)]})


def test_amplifier_ceiling_formula():
    assert EmiSource(1e9, generator_power=-40).output_power_dbm == 16.0
    assert EmiSource(1e9, generator_power=-10).output_power_dbm == 46.0
    assert EmiSource(1e9, generator_power=0).output_power_dbm == pytest.approx(CEILING_DBM)
    assert CEILING_DBM == pytest.approx(46.9897, abs=1e-4)
    # The knee: generator power at which gain meets the ceiling.
    knee = CEILING_DBM - 56.0
    assert knee == pytest.approx(-9.0103, abs=1e-4)
    saturated = EmiSource(1e9, generator_power=0).output_power_dbm
    assert EmiSource(1e9, generator_power=knee + 1).output_power_dbm == saturated


def test_amplitude_monotone_below_ceiling():
    ch = channel_on("receiver_trace")
    low = coupled_amplitude(EmiSource(1e9, generator_power=-40), ch, "receiver_trace")
    high = coupled_amplitude(EmiSource(1e9, generator_power=-10), ch, "receiver_trace")
    assert low < high


def test_coupled_amplitude_by_hand():
    ch = channel_on("receiver_trace", gain_db=6.0)
    emi = EmiSource(1e9, generator_power=-30, antenna_gain=3.0, distance=2.0)
    level_db = -30 + 56 + 3 - 60 - 20 * math.log10(2.0)
    expected = 10 ** (6.0 / 20) * 10 ** (level_db / 20)
    assert coupled_amplitude(emi, ch, "receiver_trace") == pytest.approx(expected, rel=1e-12)


def test_far_off_resonance_attenuation():
    res = Resonance(1e9, 20e6, 0.0)
    assert float(res.gain(1e9 + 10 * 20e6)) == pytest.approx(1.0 / 401, rel=1e-12)
    ch = CouplingChannel({"receiver_trace": [res]})
    on = coupled_amplitude(EmiSource(1e9), ch, "receiver_trace")
    off = coupled_amplitude(EmiSource(1e9 + 200e6), ch, "receiver_trace")
    assert off <= on / 401 * (1 + 1e-12)


@given(st.floats(1e6, 5e9), st.floats(1e5, 1e9), st.floats(-40, 40), st.floats(0, 1e9))
def test_lorentzian_symmetry(center, width, gain, delta):
    res = Resonance(center, width, gain)
    assert float(res.gain(center + delta)) == pytest.approx(float(res.gain(center - delta)), rel=1e-12)


@given(st.lists(st.floats(-80, 30), min_size=2, max_size=10))
def test_amplitude_monotone_in_generator_power(powers):
    ch = channel_on("encoder_line")
    powers = sorted(powers)
    amps = [coupled_amplitude(EmiSource(1e9, generator_power=p), ch, "encoder_line") for p in powers]
    assert all(a <= b for a, b in zip(amps, amps[1:]))
    above = [a for p, a in zip(powers, amps) if p + 56 >= CEILING_DBM]
    assert len(set(above)) <= 1


def test_max_over_resonances_and_unknown_surface():
    ch = CouplingChannel({"receiver_trace": [Resonance(1e9, 20e6, 0.0), Resonance(1.1e9, 20e6, 6.0)]})
    assert float(ch.gain("receiver_trace", 1.1e9)) == pytest.approx(10 ** (6 / 20))
    assert float(ch.gain("voltage_line", 1e9)) == 0.0
    with pytest.raises(KeyError):
        coupled_amplitude(EmiSource(1e9), ch, "antenna")
    with pytest.raises(DomainError):
        CouplingChannel({"antenna": []})
    with pytest.raises(DomainError):
        Resonance(1e9, 0.0, 0.0)


def test_generator_power_for_inverts_coupling():
    ch = channel_on("receiver_trace")
    emi = EmiSource(1e9)
    p = generator_power_for(0.01, emi, ch, "receiver_trace")
    assert coupled_amplitude(EmiSource(1e9, generator_power=p), ch, "receiver_trace") == pytest.approx(0.01)
    with pytest.raises(DomainError):
        generator_power_for(100.0, emi, ch, "receiver_trace")


def test_estimate_band_examples():
    lo, hi = estimate_band(0.06)
    assert lo == pytest.approx(99.93e6, abs=0.01e6)
    assert hi == pytest.approx(2.498e9, abs=0.001e9)
    lo, hi = estimate_band(0.30)
    assert lo == pytest.approx(19.99e6, abs=0.01e6)
    assert hi == pytest.approx(499.65e6, abs=0.01e6)
    with pytest.raises(DomainError):
        estimate_band(0.0)


@given(st.floats(1e-4, 10.0))
def test_band_ratio(length):
    lo, hi = estimate_band(length)
    assert lo / hi == pytest.approx(1 / 25, rel=1e-12)


def test_no_emi_passes_truth():
    assert perturb_monitoring(TRUTH, None, CouplingChannel()) is TRUTH


@given(st.floats(-60, 0), st.floats(0.01, 2.0))
def test_threshold_corruption_is_all_or_nothing(power, threshold):
    ch = CouplingChannel({s: [Resonance(1e9, 20e6, 0.0)] for s in ("temperature_line", "voltage_line",
                                                                     "encoder_line")})
    emi = EmiSource(1e9, generator_power=power)
    th = PerturbationThresholds(threshold, threshold, threshold)
    out = perturb_monitoring(TRUTH, emi, ch, th, seed=3)
    amp = coupled_amplitude(emi, ch, "temperature_line")
    if amp < threshold:
        assert out == TRUTH
    else:
        assert -200 <= out.temperature <= 150
        assert all(0.5 * v <= w <= 1.5 * v for v, w in zip(TRUTH.voltage_rails, out.voltage_rails))
        assert out.rpm < TRUTH.rpm


def test_temperature_glitch_is_uniform():
    ch = channel_on("temperature_line")
    emi = EmiSource(1e9)
    draws = np.array([perturb_monitoring(TRUTH, emi, ch, seed=s).temperature for s in range(2000)])
    assert draws.min() >= -200 and draws.max() <= 150
    assert stats.kstest(draws, stats.uniform(loc=-200, scale=350).cdf).pvalue > 0.01


def test_encoder_glitch_drives_rpm_to_floor():
    ch = channel_on("encoder_line")
    emi = EmiSource(1e9)
    readout, trace = None, []
    for k in range(200):
        readout = perturb_monitoring(TRUTH, emi, ch, seed=k, previous=readout)
        trace.append(readout.rpm)
    assert trace[-1] == RPM_FLOOR
    assert all(a >= b for a, b in zip(trace, trace[1:]))
    # 600 -> 19 RPM is a 96.83 % drop; the commonly quoted 96.7 % agrees to 0.2 points.
    assert (600 - trace[-1]) / 600 == pytest.approx(0.967, abs=2e-3)


def test_decay_half_life():
    rpm = 600.0
    for _ in range(5):
        rpm = decay_rpm(rpm)
    assert rpm - RPM_FLOOR == pytest.approx((600 - RPM_FLOOR) / 2)


def readout(temp=40.0, rails=(12.0, 5.0, 3.3), rpm=600.0, t=0.0):
    return MonitoringReadout(temp, rails, rpm, t)


def normal_machine(**kwargs):
    return FddMachine(state=LidarState.NORMAL, **kwargs)


def test_classify_examples():
    m = normal_machine()
    assert classify_faults(readout(), m) == []
    for _ in range(2):
        m, faults = m.observe(readout(temp=120.0))
        assert faults == []
    assert classify_faults(readout(temp=120.0), m) == [FaultEvent.of(FaultCode.TEMP_OUT_OF_RANGE, 0.0)]
    m = normal_machine()
    for _ in range(2):
        m, _ = m.observe(readout(rpm=19.0))
    faults = classify_faults(readout(rpm=19.0), m)
    assert [(f.code, f.level) for f in faults] == [(FaultCode.RPM_DEVIATION, FaultLevel.L2)]


def test_voltage_tolerance():
    m = FddMachine(state=LidarState.NORMAL, debounce=1)
    assert classify_faults(readout(rails=(12.0, 5.4, 3.3)), m) == []
    assert classify_faults(readout(rails=(12.0, 5.6, 3.3)), m)[0].code is FaultCode.VOLTAGE_OUT_OF_RANGE


def test_debounce_hysteresis():
    m = normal_machine()
    for _ in range(3):
        m, faults = m.observe(readout(temp=-50.0))
    assert m.state is LidarState.WARNING and faults
    m, faults = m.observe(readout())
    assert faults, "one clean readout must not clear a raised fault"
    m, _ = m.observe(readout())
    m, faults = m.observe(readout())
    assert faults == []
    assert m.state is LidarState.WARNING
    for _ in range(3):
        m, _ = m.observe(readout())
    assert m.state is LidarState.NORMAL


FAULT_SETS = [[]] + [[FaultEvent.of(code)] for code in FaultCode]


def expected_next(state, faults):
    levels = {f.level for f in faults}
    if state is LidarState.POWER_OFF or FaultLevel.L2 in levels:
        return LidarState.POWER_OFF
    if FaultLevel.L1 in levels:
        return LidarState.WARNING
    if state is LidarState.INITIALIZATION:
        return LidarState.NORMAL
    return state


@pytest.mark.parametrize("state, faults", list(itertools.product(LidarState, FAULT_SETS)))
def test_exhaustive_transition_table(state, faults):
    assert step(FddMachine(state=state), faults).state is expected_next(state, faults)


def test_fault_levels_table():
    assert FAULT_LEVELS[FaultCode.RPM_DEVIATION] is FaultLevel.L2
    assert {c for c, lvl in FAULT_LEVELS.items() if lvl is FaultLevel.L1} == {
        FaultCode.TEMP_OUT_OF_RANGE, FaultCode.VOLTAGE_OUT_OF_RANGE, FaultCode.SELF_CHECK_FAIL}


def test_warning_recovers_after_debounce_clean_cycles():
    m = FddMachine(state=LidarState.WARNING)
    for _ in range(2):
        m = step(m, [])
        assert m.state is LidarState.WARNING
    assert step(m, []).state is LidarState.NORMAL


def test_initialization_waits_for_motor():
    m = FddMachine()
    assert step(m, [], readout(rpm=500.0)).state is LidarState.INITIALIZATION
    assert step(m, [], readout(rpm=590.0)).state is LidarState.NORMAL


def test_step_examples():
    assert step(normal_machine(), []).state is LidarState.NORMAL
    assert step(normal_machine(), [FaultEvent.of(FaultCode.RPM_DEVIATION)]).state is LidarState.POWER_OFF
    off = FddMachine(state=LidarState.POWER_OFF)
    assert step(off, []).state is LidarState.POWER_OFF


@pytest.mark.parametrize("state", list(LidarState))
def test_reboot_is_unconditional(state):
    m = reboot(FddMachine(state=state, clean_cycles=2, streaks=((FaultCode.RPM_DEVIATION, (2, 0)),)))
    assert m.state is LidarState.INITIALIZATION
    assert m.streaks == () and m.clean_cycles == 0 and m.active == frozenset()


@given(st.lists(st.sampled_from(FAULT_SETS), max_size=30))
def test_power_off_absorbing(sequence):
    m = FddMachine(state=LidarState.POWER_OFF)
    for faults in sequence:
        m = step(m, faults)
        assert m.state is LidarState.POWER_OFF


@given(st.lists(st.tuples(st.floats(-250, 200), st.floats(0, 800)), max_size=40))
def test_machine_total_and_power_off_sticky(readouts):
    m = FddMachine.for_config(type("C", (), {"voltage_rails": (12.0, 5.0, 3.3), "rpm": 600.0})())
    seen_off = False
    for temp, rpm in readouts:
        m, _ = m.observe(readout(temp=temp, rpm=rpm))
        assert m.state in LidarState
        if seen_off:
            assert m.state is LidarState.POWER_OFF
        seen_off = m.state is LidarState.POWER_OFF


def test_points_invalid_only_for_point_invalidating_faults_in_warning():
    warn = FddMachine(state=LidarState.WARNING)
    assert points_invalid(warn, [FaultEvent.of(FaultCode.TEMP_OUT_OF_RANGE)])
    assert points_invalid(warn, [FaultEvent.of(FaultCode.VOLTAGE_OUT_OF_RANGE)])
    assert not points_invalid(warn, [FaultEvent.of(FaultCode.SELF_CHECK_FAIL)])
    assert not points_invalid(normal_machine(), [FaultEvent.of(FaultCode.TEMP_OUT_OF_RANGE)])
