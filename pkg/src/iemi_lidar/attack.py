"""Spoofing attack planning: carrier search, baseband synthesis, AM and timing.

A spoof point on ray (cycle, channel) at range ``R`` is a baseband pulse
peaking ``2R/c`` after that shot's emission.  The attacker recovers the
victim's firing clock from a photodetector, so the whole pulse train is
shifted by the residual clock-phase estimation error.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .cloud import PointCloud
from .emi import CouplingChannel, EmiSource
from .errors import ConflictError, DomainError, InfeasibleError
from .lidar import SPEED_OF_LIGHT, LidarConfig, cycles_in, schedule_arrays
from .scan import scan_frame
from .scene import Scene
from .signal_chain import PulseTrain

DEFAULT_SYNC_JITTER = 1e-9
DEFAULT_SYSTEM_LATENCY = 0.0


@dataclass(frozen=True)
class SpoofTarget:
    channel: int
    azimuth: float
    range: float
    amplitude: float = 1.0

    def validate(self, config: LidarConfig):
        if not 0 <= self.channel < config.num_channels:
            raise DomainError(f"channel {self.channel} outside 0..{config.num_channels - 1}")
        if not 0 < self.range <= config.max_range:
            raise DomainError(f"range {self.range!r} outside (0, {config.max_range}]")
        if not 0 < self.amplitude <= 1:
            raise DomainError(f"amplitude {self.amplitude!r} outside (0, 1]")


@dataclass(frozen=True)
class AttackPlan:
    carrier_freq: float
    baseband: PulseTrain
    emission_delay: float
    sync_reference: str
    system_latency: float = DEFAULT_SYSTEM_LATENCY
    depth: float = 1.0
    rays: tuple = ()
    rejected: tuple = ()

    def __post_init__(self):
        if self.emission_delay < 0:
            raise DomainError("emission_delay must be >= 0")


class Baseband(NamedTuple):
    """Pulse train plus, per accepted target, its ``(cycle, channel)`` ray; rejected target indices."""

    train: PulseTrain
    rays: list
    rejected: list


def _firing_offsets(config: LidarConfig, slots):
    """Time of each slot's azimuth reference relative to its cycle start."""
    if config.azimuth_mode == "per_cycle":
        return np.zeros(len(slots))
    return np.asarray(slots, dtype=float) * config.firing_interval


def points_to_baseband(targets, config: LidarConfig, frame_origin: float = 0.0) -> Baseband:
    """One pulse per target on the shot whose azimuth is nearest the target's.

    Targets farther than half a cycle's azimuth advance from every shot of
    the frame are rejected.

    Raises:
        ConflictError: two targets land on the same ray.
    """
    targets = list(targets)
    if not targets:
        return Baseband(PulseTrain(np.zeros(0), np.zeros(0), config.pulse_width), [], [])
    for t in targets:
        t.validate(config)
    channel = np.array([t.channel for t in targets], dtype=np.int64)
    azimuth = np.mod(np.array([t.azimuth for t in targets], dtype=float), 360.0)
    ranges = np.array([t.range for t in targets], dtype=float)
    amps = np.array([t.amplitude for t in targets], dtype=float)

    n_cycles = cycles_in(config, config.revolution_period)
    T = config.cycle_period
    slot = np.array([config.slot_of(int(c)) for c in channel], dtype=np.int64)
    offset = _firing_offsets(config, slot)
    dps = config.degrees_per_second

    # Nearest cycle: neighbours of the rounded estimate plus both frame ends for wrap-around.
    guess = np.rint((azimuth / dps - offset) / T).astype(np.int64)
    candidates = np.stack([guess - 1, guess, guess + 1, np.zeros_like(guess), np.full_like(guess, n_cycles - 1)])
    candidates = np.clip(candidates, 0, n_cycles - 1)
    cand_az = np.mod(dps * (candidates * T + offset), 360.0)
    diff = np.abs(cand_az - azimuth)
    diff = np.minimum(diff, 360.0 - diff)
    best = np.argmin(diff, axis=0)
    cycle = candidates[best, np.arange(len(targets))]
    miss = diff[best, np.arange(len(targets))] > 0.5 * dps * T + 1e-9

    keys = cycle * config.num_channels + channel
    accepted = np.flatnonzero(~miss)
    unique, counts = np.unique(keys[accepted], return_counts=True)
    if np.any(counts > 1):
        dup = unique[counts > 1][0]
        raise ConflictError(f"several targets map to ray (cycle {dup // config.num_channels}, "
                            f"channel {dup % config.num_channels})")

    times = (frame_origin + cycle[accepted] * T + slot[accepted] * config.firing_interval
             + 2.0 * ranges[accepted] / SPEED_OF_LIGHT)
    train = PulseTrain(times, amps[accepted], config.pulse_width)
    rays = [(int(cycle[i]), int(channel[i])) for i in accepted]
    return Baseband(train, rays, [int(i) for i in np.flatnonzero(miss)])


def all_slot_targets(config: LidarConfig, range_m: float, amplitude: float = 1.0,
                     azimuth_mask: tuple[float, float] | None = None) -> list[SpoofTarget]:
    """One target on every shot of a revolution, optionally limited to ``[lo, hi)`` degrees of azimuth."""
    sched = schedule_arrays(config, config.revolution_period)
    keep = np.ones(len(sched), dtype=bool)
    if azimuth_mask is not None:
        lo, hi = azimuth_mask
        keep = (sched.azimuth >= lo) & (sched.azimuth < hi)
    return [SpoofTarget(int(c), float(a), range_m, amplitude)
            for c, a in zip(sched.channel[keep], sched.azimuth[keep])]


def all_slot_baseband(config: LidarConfig, range_m: float, frame_origin: float = 0.0,
                      amplitude: float = 1.0) -> PulseTrain:
    """Fast path for a spoof pulse on every shot of a revolution."""
    sched = schedule_arrays(config, config.revolution_period)
    times = frame_origin + sched.emit_time + 2.0 * range_m / SPEED_OF_LIGHT
    return PulseTrain(times, np.full(len(times), amplitude), config.pulse_width)


def modulate_am(baseband, carrier_freq: float, depth: float = 1.0, **source) -> EmiSource:
    """AM source ``(depth + depth*b(t)) * sin(2*pi*f*t + phi0)``.

    The bias equals ``depth`` so the envelope stays within ``[0, 2*depth]``
    for ``|b| <= 1``.  Extra keyword arguments go to :class:`EmiSource`.

    Raises:
        DomainError: depth outside ``(0, 1]`` or carrier below twice the
            baseband bandwidth.
    """
    if not 0 < depth <= 1:
        raise DomainError(f"depth must lie in (0, 1], got {depth!r}")
    if not carrier_freq > 2.0 * baseband.bandwidth:
        raise DomainError(f"carrier {carrier_freq:.4g} Hz must exceed twice the baseband bandwidth "
                          f"{baseband.bandwidth:.4g} Hz")
    return EmiSource(carrier_freq, baseband=baseband, depth=depth, **source)


def recover_baseband(samples, sample_rate: float, carrier_freq: float, depth: float = 1.0) -> np.ndarray:
    """Envelope detector: full-wave rectify, average over one carrier period, remove the bias.

    A sinusoid rectifies to ``2/pi`` of its amplitude on average.
    """
    window = max(1, int(round(sample_rate / carrier_freq)))
    kernel = np.full(window, 1.0 / window)
    mean_abs = np.convolve(np.abs(np.asarray(samples, dtype=float)), kernel, mode="same")
    return mean_abs * (math.pi / 2.0) / depth - 1.0


def synchronize(detected_firing: float, target: SpoofTarget, config: LidarConfig,
                system_latency: float = DEFAULT_SYSTEM_LATENCY) -> float:
    """Delay after a detected slot-0 firing at which to trigger the spoof pulse.

    ``detected_firing`` only anchors the result; the delay itself depends on
    the target's slot, range and the attacker's latency, folded forward by
    whole cycles when the latency would make it negative.

    Raises:
        InfeasibleError: negative latency, or latency of a full cycle or more.
    """
    del detected_firing
    if system_latency < 0 or system_latency >= config.cycle_period:
        raise InfeasibleError(f"system latency {system_latency!r} s cannot be folded into a "
                              f"{config.cycle_period!r} s cycle")
    delay = (config.slot_of(target.channel) * config.firing_interval
             + 2.0 * target.range / SPEED_OF_LIGHT - system_latency)
    if delay < 0:
        delay += math.ceil(-delay / config.cycle_period) * config.cycle_period
    return delay


def sync_error(config: LidarConfig, rng: np.random.Generator, jitter: float = DEFAULT_SYNC_JITTER,
               cycles: int | None = None) -> float:
    """Residual clock-phase error after fitting the firing period over ``cycles`` detections.

    Each detection carries Gaussian timing jitter; the periodic fit averages
    it down by the square root of the number of detections.
    """
    cycles = cycles_in(config, config.revolution_period) if cycles is None else cycles
    if jitter == 0:
        return 0.0
    return float(rng.normal(0.0, jitter / math.sqrt(cycles)))


def plan_attack(targets, config: LidarConfig, carrier_freq: float, depth: float = 1.0,
                system_latency: float = DEFAULT_SYSTEM_LATENCY) -> AttackPlan:
    """Bundle the baseband, trigger delay and rays for a target list (frame origin 0)."""
    targets = list(targets)
    bb = points_to_baseband(targets, config, 0.0)
    delay = 0.0
    if bb.rays:
        first = next(t for i, t in enumerate(targets) if i not in set(bb.rejected))
        delay = synchronize(0.0, first, config, system_latency)
    return AttackPlan(carrier_freq, bb.train, delay, "slot-0 firing edge of cycle 0 (photodetector)",
                      system_latency, depth, tuple(bb.rays), tuple(bb.rejected))


def attack_source(plan: AttackPlan, frame_start: float, template: EmiSource | None = None,
                  timing_error: float = 0.0) -> EmiSource:
    """AM source replaying ``plan`` in the frame starting at ``frame_start``.

    ``timing_error`` shifts every pulse, modelling imperfect synchronization.
    """
    template = template if template is not None else EmiSource(plan.carrier_freq)
    train = plan.baseband.shifted(frame_start + timing_error)
    return replace(template, carrier_freq=plan.carrier_freq, baseband=train, depth=plan.depth)


def injected_mask(cloud: PointCloud, rays, ranges, tolerance: float) -> np.ndarray:
    """Per target: True when the cloud holds a valid point on its ray within ``tolerance``."""
    lookup = {(int(c), int(ch)): i for i, (c, ch) in enumerate(zip(cloud.cycle, cloud.channel)) if cloud.valid[i]}
    hits = np.zeros(len(rays), dtype=bool)
    for j, (ray, rng_m) in enumerate(zip(rays, ranges)):
        i = lookup.get(tuple(ray))
        hits[j] = i is not None and abs(cloud.r[i] - rng_m) <= tolerance
    return hits


def count_near_range(cloud: PointCloud, range_m: float, tolerance: float) -> int:
    return int(np.count_nonzero(cloud.valid & (np.abs(cloud.r - range_m) <= tolerance)))


def derived_seed(seed: int, *keys) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def _search_point(args):
    freq, channel, victim, scene, seed, duration, template, spoof_range = args
    baseband = all_slot_baseband(victim, spoof_range)
    source = replace(template, carrier_freq=freq, baseband=baseband)
    result = scan_frame(scene, victim, source, channel, seed=derived_seed(seed, int(round(freq))),
                        duration=duration)
    return count_near_range(result.cloud, spoof_range, victim.range_accuracy)


def carrier_search(channel: CouplingChannel, band: tuple[float, float], step: float, victim: LidarConfig,
                   scene: Scene, seed: int = 0, *, duration: float | None = None,
                   template: EmiSource | None = None, spoof_range: float = 5.0,
                   workers: int = 1) -> tuple[float, list[tuple[float, int]]]:
    """Sweep carriers over ``band`` (inclusive) with an all-slot spoof and count injected points.

    A point counts as injected when it is valid and within the victim's
    range accuracy of ``spoof_range``.  Ties go to the lowest frequency.

    Raises:
        DomainError: empty or non-positive band, or non-positive step.
    """
    lo, hi = band
    if not step > 0:
        raise DomainError("step must be positive")
    if not 0 < lo <= hi:
        raise DomainError(f"band ({lo!r}, {hi!r}) is empty or not positive")
    freqs = band_frequencies(lo, hi, step)
    template = template if template is not None else EmiSource(lo, initial_phase=None)
    jobs = [(f, channel, victim, scene, seed, duration, template, spoof_range) for f in freqs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(_search_point, jobs))
    else:
        counts = [_search_point(job) for job in jobs]
    curve = list(zip(freqs, counts))
    best = freqs[int(np.argmax(counts))]
    return best, curve


def band_frequencies(lo: float, hi: float, step: float) -> list[float]:
    """Grid from ``lo`` to ``hi`` inclusive; ``hi`` is kept when it falls on the grid within 1e-9 steps."""
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [lo + i * step for i in range(n)]


def ray_assignment_variance(clouds) -> float:
    """Spread of where injected points land across frames.

    Sum of the per-axis variances of the valid-point centroids of each
    frame; frames with no valid points are skipped.
    """
    centroids = [pc.xyz().mean(axis=0) for pc in clouds if np.any(pc.valid)]
    if len(centroids) < 2:
        return 0.0
    return float(np.sum(np.var(np.asarray(centroids), axis=0)))


def read_targets(path) -> list[SpoofTarget]:
    """Targets from a JSON array of ``{channel, azimuth_deg, range_m, amplitude?}``."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise DomainError("target file must hold a JSON array")
    targets = []
    for i, item in enumerate(data):
        try:
            targets.append(SpoofTarget(int(item["channel"]), float(item["azimuth_deg"]), float(item["range_m"]),
                                       float(item.get("amplitude", 1.0))))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"target {i}: {exc}") from exc
    return targets


def write_targets(targets, path):
    rows = [{"channel": t.channel, "azimuth_deg": t.azimuth, "range_m": t.range, "amplitude": t.amplitude}
            for t in targets]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=1)


def write_plan(plan: AttackPlan, targets, json_path, baseband_csv):
    """Plan as JSON (same target grammar plus timing fields) and the pulse list as CSV."""
    doc = {
        "carrier_freq_hz": plan.carrier_freq,
        "depth": plan.depth,
        "emission_delay_s": plan.emission_delay,
        "system_latency_s": plan.system_latency,
        "sync_reference": plan.sync_reference,
        "baseband_csv": Path(baseband_csv).name,
        "targets": [{"channel": t.channel, "azimuth_deg": t.azimuth, "range_m": t.range,
                     "amplitude": t.amplitude} for t in targets],
        "rays": [list(r) for r in plan.rays],
        "rejected": list(plan.rejected),
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    plan.baseband.to_csv(baseband_csv)
