"""Attacker sources, the victim's frequency-dependent coupling, and telemetry corruption.

Power levels follow the usual RF bookkeeping: the generator level plus
amplifier gain is capped at the amplifier's saturated output, then antenna
gain is added and log-distance path loss subtracted.  The result, in dB
relative to one normalized receiver unit, is scaled by the linear gain of the
victim conductor's resonances at the carrier frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import DomainError
from .lidar import SPEED_OF_LIGHT

SURFACES = ("receiver_trace", "temperature_line", "voltage_line", "encoder_line")

TEMPERATURE_GLITCH_RANGE = (-200.0, 150.0)
RPM_FLOOR = 19.0
RPM_HALF_LIFE_CYCLES = 5.0


@dataclass(frozen=True)
class Resonance:
    center: float
    width: float
    peak_gain: float  # dB, amplitude

    def __post_init__(self):
        if not self.width > 0:
            raise DomainError(f"resonance width must be positive, got {self.width!r}")

    def gain(self, freq):
        """Linear amplitude gain of this Lorentzian at ``freq``."""
        peak = 10.0 ** (self.peak_gain / 20.0)
        x = (np.asarray(freq, dtype=float) - self.center) / (self.width / 2.0)
        return peak / (1.0 + x * x)


@dataclass(frozen=True)
class CouplingChannel:
    """Resonant pickup of each victim conductor plus propagation loss.

    ``am_detection`` sets how an amplitude-modulated carrier appears on the
    receiver trace: ``"envelope"`` (the front end rectifies the carrier and
    its AC coupling strips the bias) or ``"linear"`` (raw RF superposition).
    """

    surfaces: dict = field(default_factory=dict)
    path_loss_exponent: float = 2.0
    reference_loss: float = 60.0
    am_detection: str = "envelope"

    def __post_init__(self):
        normalized = {}
        for name, resonances in dict(self.surfaces).items():
            if name not in SURFACES:
                raise DomainError(f"unknown surface {name!r}")
            normalized[name] = tuple(resonances)
        object.__setattr__(self, "surfaces", normalized)
        if self.am_detection not in ("envelope", "linear"):
            raise DomainError(f"am_detection must be 'envelope' or 'linear', got {self.am_detection!r}")

    def gain(self, surface: str, freq):
        """Max over the surface's Lorentzian responses; zero for a surface with none."""
        if surface not in SURFACES:
            raise KeyError(surface)
        responses = self.surfaces.get(surface, ())
        if not responses:
            return np.zeros_like(np.asarray(freq, dtype=float))
        return np.max([res.gain(freq) for res in responses], axis=0)


@dataclass(frozen=True)
class EmiSource:
    """Attacker transmitter.

    A source with ``baseband=None`` radiates a continuous wave; otherwise the
    carrier is amplitude modulated as ``(depth + depth*b(t)) * sin(...)``.
    ``initial_phase=None`` lets the simulator draw the phase from its seed.
    """

    carrier_freq: float
    generator_power: float = 0.0
    amplifier_gain: float = 56.0
    amplifier_max_power: float = 50.0
    antenna_gain: float = 0.0
    distance: float = 0.3
    baseband: Any = None
    depth: float = 1.0
    initial_phase: float | None = 0.0

    def __post_init__(self):
        if not self.distance > 0:
            raise DomainError("distance must be positive")
        if not self.carrier_freq >= 0:
            raise DomainError("carrier_freq must be non-negative")
        if not self.amplifier_max_power > 0:
            raise DomainError("amplifier_max_power must be positive")

    @property
    def modulation(self) -> str:
        return "CW" if self.baseband is None else "AM"

    @property
    def output_power_dbm(self) -> float:
        ceiling = 10.0 * math.log10(self.amplifier_max_power * 1000.0)
        return min(self.generator_power + self.amplifier_gain, ceiling)

    def envelope(self, t):
        if self.baseband is None:
            return np.ones_like(np.asarray(t, dtype=float))
        return self.depth + self.depth * self.baseband.evaluate(t)

    def emitted(self, t, phase=None):
        """Unit-amplitude radiated waveform at absolute times ``t``."""
        if phase is None:
            phase = 0.0 if self.initial_phase is None else self.initial_phase
        t = np.asarray(t, dtype=float)
        return self.envelope(t) * np.sin(2.0 * np.pi * self.carrier_freq * t + phase)

    def with_power(self, generator_power):
        return replace(self, generator_power=generator_power)


def estimate_band(trace_length: float) -> tuple[float, float]:
    """Carrier band worth sweeping for a conductor of ``trace_length`` meters: (c/50l, c/2l)."""
    if not trace_length > 0:
        raise DomainError(f"trace length must be positive, got {trace_length!r}")
    upper = SPEED_OF_LIGHT / (2.0 * trace_length)
    # Deriving the lower edge from the upper keeps the 1:25 ratio through float rounding.
    return upper / 25.0, upper


def coupled_amplitude(emi: EmiSource, channel: CouplingChannel, surface: str) -> float:
    """Normalized carrier amplitude arriving at ``surface``.

    Raises:
        KeyError: unknown surface name.
    """
    gain = float(channel.gain(surface, emi.carrier_freq))
    level_db = (emi.output_power_dbm + emi.antenna_gain - channel.reference_loss
                - 10.0 * channel.path_loss_exponent * math.log10(emi.distance))
    return gain * 10.0 ** (level_db / 20.0)


def generator_power_for(amplitude: float, emi: EmiSource, channel: CouplingChannel, surface: str) -> float:
    """Generator level (dBm) that makes ``coupled_amplitude`` equal ``amplitude``.

    Raises:
        DomainError: the surface has no gain at the carrier, or the level
            needed lies above the amplifier's saturated output.
    """
    gain = float(channel.gain(surface, emi.carrier_freq))
    if not (amplitude > 0 and gain > 0):
        raise DomainError("amplitude and coupling gain must be positive")
    output = (20.0 * math.log10(amplitude / gain) - emi.antenna_gain + channel.reference_loss
              + 10.0 * channel.path_loss_exponent * math.log10(emi.distance))
    ceiling = 10.0 * math.log10(emi.amplifier_max_power * 1000.0)
    if output > ceiling:
        raise DomainError(f"needs {output:.2f} dBm output, amplifier saturates at {ceiling:.2f} dBm")
    return output - emi.amplifier_gain


def receiver_interference(emi: EmiSource | None, channel: CouplingChannel, t, phase=None,
                          surface="receiver_trace"):
    """Interference voltage the receiver front end presents to the ADC at absolute times ``t``."""
    t = np.asarray(t, dtype=float)
    if emi is None:
        return np.zeros_like(t)
    amp = coupled_amplitude(emi, channel, surface)
    if amp == 0.0:
        return np.zeros_like(t)
    if emi.baseband is not None and channel.am_detection == "envelope":
        return amp * emi.depth * emi.baseband.evaluate(t)
    return amp * emi.emitted(t, phase)


@dataclass(frozen=True)
class MonitoringReadout:
    temperature: float
    voltage_rails: tuple[float, ...]
    rpm: float
    timestamp: float


@dataclass(frozen=True)
class PerturbationThresholds:
    """Coupled amplitude at which each telemetry line starts reading garbage."""

    temperature_line: float = 0.5
    voltage_line: float = 0.5
    encoder_line: float = 0.5


def decay_rpm(previous: float, half_life: float = RPM_HALF_LIFE_CYCLES, floor: float = RPM_FLOOR) -> float:
    """One cycle of the encoder-glitch slowdown: exponential approach to ``floor``."""
    return floor + (previous - floor) * 0.5 ** (1.0 / half_life)


def perturb_monitoring(truth: MonitoringReadout, emi: EmiSource | None, channel: CouplingChannel,
                       thresholds: PerturbationThresholds = PerturbationThresholds(), seed=0,
                       previous: MonitoringReadout | None = None) -> MonitoringReadout:
    """Corrupt telemetry lines whose coupled amplitude reaches their threshold.

    Corruption is all-or-nothing: below a line's threshold its value passes
    through untouched, which is what makes recovery abrupt once the attack
    weakens.  Temperature is redrawn uniformly on [-200, 150] C, each rail
    uniformly within +/-50 % of its true value, and the RPM readout decays
    from ``previous.rpm`` (or the true RPM) toward 19 RPM, reported as an
    integer.
    """
    if emi is None:
        return truth
    rng = np.random.default_rng(seed)
    temperature, rails, rpm = truth.temperature, truth.voltage_rails, truth.rpm
    if coupled_amplitude(emi, channel, "temperature_line") >= thresholds.temperature_line:
        temperature = float(rng.uniform(*TEMPERATURE_GLITCH_RANGE))
    if coupled_amplitude(emi, channel, "voltage_line") >= thresholds.voltage_line:
        nominal = np.asarray(truth.voltage_rails, dtype=float)
        rails = tuple(float(v) for v in nominal * rng.uniform(0.5, 1.5, len(nominal)))
    if coupled_amplitude(emi, channel, "encoder_line") >= thresholds.encoder_line:
        start = truth.rpm if previous is None else previous.rpm
        value = decay_rpm(start)
        # Truncate toward the floor; rounding would stall one RPM above it.
        rpm = float(math.floor(value) if value >= RPM_FLOOR else math.ceil(value))
    return MonitoringReadout(temperature, rails, rpm, truth.timestamp)
