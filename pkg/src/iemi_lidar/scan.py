"""Frame-level scan driver.

Each firing cycle first samples the telemetry (possibly corrupted by EMI) and
steps the FDD supervisor; the cycle's sixteen shots are then ranged through
the receive chain.  The receive chain is evaluated directly at the ADC
instants inside the max-range gate.  Because the ADC point-samples without
filtering and every stage before it is either analytic or element-wise, this
equals synthesizing on the dense grid and decimating, which
``tests/test_scan.py`` checks against the waveform-level functions.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .cloud import PointCloud
from .emi import (CouplingChannel, EmiSource, MonitoringReadout, PerturbationThresholds,
                  perturb_monitoring, receiver_interference)
from .fdd import FddMachine, LidarState, points_invalid
from .lidar import SPEED_OF_LIGHT, LidarConfig, ray_directions, schedule_arrays
from .scene import Scene, cast_rays
from .signal_chain import detect_peaks, intensity_model, pulse_shape

# Stream tags keep the RNG draws for noise, telemetry and carrier phase independent.
NOISE_STREAM = 1
MONITOR_STREAM = 2
PHASE_STREAM = 3

CHUNK_SAMPLES = 4_000_000


class ScanResult(NamedTuple):
    cloud: PointCloud
    readouts: list
    states: list
    fdd: FddMachine
    faults: list


class Returns(NamedTuple):
    delay: np.ndarray
    peak: np.ndarray
    found: np.ndarray


def carrier_phase(emi: EmiSource | None, seed: int) -> float:
    """Initial carrier phase: the source's own, else drawn once per seed."""
    if emi is None:
        return 0.0
    if emi.initial_phase is not None:
        return float(emi.initial_phase)
    return float(np.random.default_rng([seed, PHASE_STREAM]).uniform(0.0, 2.0 * math.pi))


def gate_samples(config: LidarConfig) -> int:
    return int(math.ceil(config.range_gate * config.adc_sample_rate))


def simulate_returns(config: LidarConfig, emit_times, ranges, reflectivity, emi: EmiSource | None,
                     channel: CouplingChannel, phase, rng: np.random.Generator | None) -> Returns:
    """Receive chain for a batch of shots, evaluated at ADC instants.

    ``emit_times`` are absolute.  ``ranges`` may be ``inf`` for no return.
    ``phase`` is a scalar or one carrier phase per shot.  ``rng=None``
    disables receiver noise.

    Returns:
        Round-trip delays, peak amplitudes and detection flags per shot.
    """
    emit = np.asarray(emit_times, dtype=float)
    ranges = np.asarray(ranges, dtype=float)
    amps = np.where(np.isfinite(ranges), intensity_model(reflectivity, np.where(np.isfinite(ranges), ranges, 1.0)), 0.0)
    peak_delay = np.where(np.isfinite(ranges), 2.0 * ranges / SPEED_OF_LIGHT, 0.0)
    phase = np.broadcast_to(np.asarray(phase, dtype=float), emit.shape)

    n_k = gate_samples(config)
    offsets = np.arange(n_k) / config.adc_sample_rate
    sigma = config.noise_sigma
    delay = np.empty(len(emit))
    peak = np.empty(len(emit))
    found = np.empty(len(emit), dtype=bool)
    step = max(1, CHUNK_SAMPLES // n_k)
    for lo in range(0, len(emit), step):
        sl = slice(lo, lo + step)
        x = amps[sl, None] * pulse_shape(offsets[None, :] - peak_delay[sl, None], config.pulse_width)
        if emi is not None:
            t = emit[sl, None] + offsets[None, :]
            x += receiver_interference(emi, channel, t, phase[sl, None])
        if rng is not None and sigma > 0:
            x += sigma * rng.standard_normal(x.shape)
        np.clip(x, -config.receiver_saturation, config.receiver_saturation, out=x)
        tau, pk, ok = detect_peaks(x, np.zeros(x.shape[0]), config.adc_sample_rate,
                                   config.detection_threshold, config.pulse_width, config.peak_margin)
        delay[sl], peak[sl], found[sl] = tau, pk, ok
    return Returns(delay, peak, found)


def scan_frame(scene: Scene, config: LidarConfig, emi: EmiSource | None = None,
               channel_model: CouplingChannel | None = None, fdd: FddMachine | None = None, seed: int = 0,
               *, frame_index: int = 0, duration: float | None = None,
               thresholds: PerturbationThresholds = PerturbationThresholds(),
               origin=(0.0, 0.0, 0.0)) -> ScanResult:
    """Simulate one frame (by default one revolution) of the sensor.

    Points are valid while the supervisor is Normal, or Warning without a
    point-invalidating fault; cycles with such a fault yield invalid points;
    Initialization yields none; entering PowerOff ends the frame.  The output
    is a deterministic function of the arguments.
    """
    channel_model = channel_model if channel_model is not None else CouplingChannel()
    machine = fdd if fdd is not None else FddMachine.for_config(config)
    duration = config.revolution_period if duration is None else duration
    frame_start = frame_index * config.revolution_period
    sched = schedule_arrays(config, duration)
    n_cycles = len(sched) // config.num_channels

    readouts, states, fault_log = [], [], []
    # 0 = no points, 1 = valid, 2 = flagged invalid
    mode = np.zeros(n_cycles, dtype=np.int8)
    previous = None
    for k in range(n_cycles):
        if machine.state is LidarState.POWER_OFF:
            break
        truth = MonitoringReadout(config.temperature, config.voltage_rails, config.rpm,
                                  frame_start + k * config.cycle_period)
        readout = perturb_monitoring(truth, emi, channel_model, thresholds,
                                     seed=[seed, MONITOR_STREAM, frame_index, k], previous=previous)
        previous = readout
        machine, faults = machine.observe(readout)
        readouts.append(readout)
        states.append(machine.state)
        fault_log.append(faults)
        if machine.state in (LidarState.NORMAL, LidarState.WARNING):
            mode[k] = 2 if points_invalid(machine, faults) else 1
    if not states:
        states.append(machine.state)
        fault_log.append([])

    shot_mode = mode[sched.cycle]
    fired = sched.take(shot_mode > 0)
    if len(fired) == 0:
        return ScanResult(PointCloud.empty(frame_index, config.config_id), readouts, states, machine, fault_log)

    directions = ray_directions(fired.azimuth, fired.elevation)
    ranges, refl = cast_rays(scene, np.asarray(origin, dtype=float), directions, config.max_range)
    rng = np.random.default_rng([seed, NOISE_STREAM, frame_index])
    returns = simulate_returns(config, frame_start + fired.emit_time, ranges, refl, emi, channel_model,
                               carrier_phase(emi, seed), rng)
    hit = returns.found
    r = 0.5 * SPEED_OF_LIGHT * returns.delay[hit]
    cloud = PointCloud(
        r=r,
        theta=90.0 - fired.elevation[hit],
        phi=fired.azimuth[hit],
        intensity=np.clip(returns.peak[hit], 0.0, 1.0),
        valid=mode[fired.cycle[hit]] == 1,
        cycle=fired.cycle[hit],
        channel=fired.channel[hit],
        frame_index=frame_index,
        config_id=config.config_id,
    )
    return ScanResult(cloud, readouts, states, machine, fault_log)


def truth_ranges(scene: Scene, config: LidarConfig, duration: float | None = None, origin=(0.0, 0.0, 0.0)):
    """Ray-cast ranges for every shot of a frame, keyed like the point cloud."""
    duration = config.revolution_period if duration is None else duration
    sched = schedule_arrays(config, duration)
    ranges, _ = cast_rays(scene, np.asarray(origin, dtype=float), ray_directions(sched.azimuth, sched.elevation),
                          config.max_range)
    return sched, ranges
