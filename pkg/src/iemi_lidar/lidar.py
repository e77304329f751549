"""Sensor configuration and the firing schedule of a spinning multi-channel LiDAR.

Timing defaults describe a 16-channel spinning sensor: sixteen lasers fire
2.304 us apart, followed by an 18.432 us recharge gap, giving a 55.296 us
firing cycle.  At 600 RPM one revolution (0.1 s) holds 1808 complete cycles.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, DomainError

SPEED_OF_LIGHT = 299_792_458.0

# Interleaved elevation order of a 16-line sensor, channel 0 first.
VLP16_VERTICAL_ANGLES = (-15.0, 1.0, -13.0, 3.0, -11.0, 5.0, -9.0, 7.0,
                         -7.0, 9.0, -5.0, 11.0, -3.0, 13.0, -1.0, 15.0)


@dataclass(frozen=True)
class LidarConfig:
    """Timing, rotation, receiver and telemetry parameters of the victim sensor.

    ``firing_order`` lists the channel fired in each slot of a cycle; ``None``
    means slot ``j`` fires channel ``j``.  ``azimuth_mode`` selects whether a
    shot's azimuth is taken at its own emit time (``"per_firing"``) or at the
    start of its cycle (``"per_cycle"``).
    """

    num_channels: int = 16
    vertical_angles: tuple[float, ...] = VLP16_VERTICAL_ANGLES
    firing_order: tuple[int, ...] | None = None
    rpm: float = 600.0
    firing_interval: float = 2.304e-6
    cycle_period: float = 55.296e-6
    recharge_period: float = 18.432e-6
    pulse_width: float = 10e-9
    adc_sample_rate: float = 500e6
    sim_sample_rate: float = 20e9
    max_range: float = 100.0
    range_accuracy: float = 0.02
    detection_threshold: float = 1e-6
    receiver_saturation: float = 1.0
    noise_ratio: float = 0.1
    peak_margin: float = 0.5
    azimuth_mode: str = "per_firing"
    temperature: float = 40.0
    voltage_rails: tuple[float, ...] = (12.0, 5.0, 3.3)

    def __post_init__(self):
        # Accept lists from config files and callers.
        object.__setattr__(self, "vertical_angles", tuple(float(a) for a in self.vertical_angles))
        object.__setattr__(self, "voltage_rails", tuple(float(v) for v in self.voltage_rails))
        if self.firing_order is not None:
            object.__setattr__(self, "firing_order", tuple(int(c) for c in self.firing_order))
        self.validate()

    def validate(self):
        if self.num_channels < 1:
            raise ConfigurationError("num_channels must be >= 1")
        if len(self.vertical_angles) != self.num_channels:
            raise ConfigurationError(
                f"vertical_angles has {len(self.vertical_angles)} entries, expected {self.num_channels}")
        if self.firing_order is not None and sorted(self.firing_order) != list(range(self.num_channels)):
            raise ConfigurationError("firing_order must be a permutation of the channel indices")
        positive = ("rpm", "firing_interval", "cycle_period", "recharge_period", "pulse_width",
                    "adc_sample_rate", "sim_sample_rate", "max_range", "range_accuracy")
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be a finite positive number, got {value!r}")
        closure = self.num_channels * self.firing_interval + self.recharge_period
        if not math.isclose(closure, self.cycle_period, rel_tol=1e-9, abs_tol=0.0):
            raise ConfigurationError(
                f"num_channels*firing_interval + recharge_period = {closure!r} != cycle_period {self.cycle_period!r}")
        if not self.adc_sample_rate < self.sim_sample_rate:
            raise ConfigurationError("adc_sample_rate must be below sim_sample_rate")
        if not 0 < self.detection_threshold < 1:
            raise ConfigurationError("detection_threshold must lie in (0, 1)")
        if self.receiver_saturation < self.detection_threshold:
            raise ConfigurationError("receiver_saturation must be >= detection_threshold")
        if self.noise_ratio < 0:
            raise ConfigurationError("noise_ratio must be >= 0")
        if not 0 <= self.peak_margin < 1:
            raise ConfigurationError("peak_margin must lie in [0, 1)")
        if self.azimuth_mode not in ("per_firing", "per_cycle"):
            raise ConfigurationError(f"unknown azimuth_mode {self.azimuth_mode!r}")

    @property
    def config_id(self) -> str:
        """Stable short digest identifying this configuration."""
        text = repr(sorted(asdict(self).items()))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]

    @property
    def slot_order(self) -> tuple[int, ...]:
        return self.firing_order if self.firing_order is not None else tuple(range(self.num_channels))

    def slot_of(self, channel: int) -> int:
        """Firing slot index of ``channel`` within a cycle."""
        return self.slot_order.index(channel)

    @property
    def revolution_period(self) -> float:
        return 60.0 / self.rpm

    @property
    def degrees_per_second(self) -> float:
        return self.rpm / 60.0 * 360.0

    @property
    def noise_sigma(self) -> float:
        return self.noise_ratio * self.detection_threshold

    @property
    def range_gate(self) -> float:
        """Receive span searched for an echo: max-range round trip plus pulse margin."""
        return min(2.0 * self.max_range / SPEED_OF_LIGHT + 3.0 * self.pulse_width, self.firing_interval)


class FiringEvent(NamedTuple):
    channel: int
    emit_time: float
    azimuth: float
    elevation: float


@dataclass(frozen=True)
class Schedule:
    """Columnar firing schedule; row ``i`` is one laser shot."""

    cycle: np.ndarray
    channel: np.ndarray
    emit_time: np.ndarray
    azimuth: np.ndarray
    elevation: np.ndarray

    def __len__(self):
        return len(self.emit_time)

    def events(self) -> list[FiringEvent]:
        return [FiringEvent(int(c), float(t), float(a), float(e))
                for c, t, a, e in zip(self.channel, self.emit_time, self.azimuth, self.elevation)]

    def take(self, mask) -> "Schedule":
        return Schedule(self.cycle[mask], self.channel[mask], self.emit_time[mask],
                        self.azimuth[mask], self.elevation[mask])


def cycles_in(config: LidarConfig, duration: float) -> int:
    """Number of complete firing cycles that fit in ``duration``."""
    # Tolerance absorbs float error when duration is an exact multiple.
    return int(math.floor(duration / config.cycle_period * (1 + 1e-12)))


def schedule_arrays(config: LidarConfig, duration: float) -> Schedule:
    if not duration > 0:
        raise DomainError(f"duration must be positive, got {duration!r}")
    n_cycles = cycles_in(config, duration)
    order = np.asarray(config.slot_order, dtype=np.int64)
    slots = np.arange(config.num_channels)
    cycle = np.repeat(np.arange(n_cycles, dtype=np.int64), config.num_channels)
    slot = np.tile(slots, n_cycles)
    emit = cycle * config.cycle_period + slot * config.firing_interval
    clock = cycle * config.cycle_period if config.azimuth_mode == "per_cycle" else emit
    azimuth = np.mod(config.degrees_per_second * clock, 360.0)
    channel = order[slot]
    elevation = np.asarray(config.vertical_angles)[channel]
    return Schedule(cycle, channel, emit, azimuth, elevation)


def firing_schedule(config: LidarConfig, duration: float) -> list[FiringEvent]:
    """Return every laser shot of the complete cycles within ``duration``.

    Shot ``j`` of cycle ``k`` is emitted at ``k*cycle_period + j*firing_interval``
    seconds after the frame start.

    Raises:
        DomainError: if ``duration`` is not positive.
    """
    return schedule_arrays(config, duration).events()


def ray_directions(azimuth_deg, elevation_deg) -> np.ndarray:
    """Unit vectors (N, 3) for azimuth measured from +x toward +y and elevation above the xy-plane."""
    az = np.radians(np.asarray(azimuth_deg, dtype=float))
    el = np.radians(np.asarray(elevation_deg, dtype=float))
    cos_el = np.cos(el)
    return np.stack([cos_el * np.cos(az), cos_el * np.sin(az), np.sin(el)], axis=-1)
