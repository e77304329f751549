"""Waveform-level time-of-flight pipeline.

The receive path is: echo pulse, plus coupled interference, plus receiver
noise, clipped at the receiver rail, point-sampled by the ADC with no
anti-alias filter, then reduced to one arrival time by peak search with
three-point parabolic refinement.  Range follows from R = c * (tau1 - tau0) / 2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .emi import CouplingChannel, EmiSource, receiver_interference
from .errors import OrderingError
from .lidar import SPEED_OF_LIGHT, LidarConfig

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class RangingConstants:
    c: float = SPEED_OF_LIGHT


RANGING = RangingConstants()


def pulse_shape(t, width):
    """Unit-peak Gaussian with full width at half maximum ``width``."""
    t = np.asarray(t, dtype=float)
    return np.exp(-4.0 * math.log(2.0) * (t / width) ** 2)


def gaussian_bandwidth(width, energy_fraction=0.99):
    """One-sided bandwidth holding ``energy_fraction`` of a Gaussian pulse's energy."""
    from scipy.special import erfinv

    sigma_t = width * FWHM_TO_SIGMA
    sigma_f = 1.0 / (2.0 * math.sqrt(2.0) * math.pi * sigma_t)
    return math.sqrt(2.0) * erfinv(energy_fraction) * sigma_f


@dataclass(frozen=True, eq=False)
class Waveform:
    sample_rate: float
    start_time: float
    samples: np.ndarray

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float)
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(len(self.samples)) / self.sample_rate

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def evaluate(self, t):
        """Linear interpolation at arbitrary times; zero outside the record."""
        t = np.asarray(t, dtype=float)
        if len(self.samples) == 0:
            return np.zeros_like(t)
        pos = (t - self.start_time) * self.sample_rate
        out = np.interp(pos.ravel(), np.arange(len(self.samples)), self.samples, left=0.0, right=0.0)
        return out.reshape(t.shape)

    @property
    def bandwidth(self) -> float:
        """Frequency below which 99 % of the (mean-removed) energy lies."""
        x = self.samples - self.samples.mean()
        power = np.abs(np.fft.rfft(x)) ** 2
        if power.sum() == 0:
            return 0.0
        freqs = np.fft.rfftfreq(len(x), 1.0 / self.sample_rate)
        idx = np.searchsorted(np.cumsum(power) / power.sum(), 0.99)
        return float(freqs[min(idx, len(freqs) - 1)])

    def __add__(self, other: "Waveform") -> "Waveform":
        if other.sample_rate != self.sample_rate or len(other) != len(self):
            raise ValueError("waveforms must share sample rate and length")
        return Waveform(self.sample_rate, self.start_time, self.samples + other.samples)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "amplitude"])
            for t, a in zip(self.times, self.samples):
                writer.writerow([repr(float(t)), repr(float(a))])


@dataclass(frozen=True, eq=False)
class PulseTrain:
    """Sparse baseband: Gaussian pulses at given peak times.

    Evaluates analytically at any instant, so a full revolution of spoof
    pulses never has to be materialized on a dense grid.
    """

    times: np.ndarray
    amplitudes: np.ndarray
    width: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        amps = np.broadcast_to(np.asarray(self.amplitudes, dtype=float), times.shape)
        order = np.argsort(times, kind="stable")
        object.__setattr__(self, "times", times[order])
        object.__setattr__(self, "amplitudes", np.array(amps[order]))

    def __len__(self):
        return len(self.times)

    def shifted(self, offset: float) -> "PulseTrain":
        return PulseTrain(self.times + offset, self.amplitudes, self.width)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        if len(self.times) == 0:
            return out
        support = 6.0 * self.width
        lo = np.searchsorted(self.times, t - support)
        hi = np.searchsorted(self.times, t + support)
        for j in range(int(np.max(hi - lo, initial=0))):
            idx = lo + j
            near = idx < hi
            safe = np.where(near, idx, 0)
            out += np.where(near, self.amplitudes[safe] * pulse_shape(t - self.times[safe], self.width), 0.0)
        return out

    @property
    def bandwidth(self) -> float:
        return gaussian_bandwidth(self.width) if len(self.times) else 0.0

    def sample(self, sample_rate: float, start_time: float, duration: float) -> Waveform:
        n = int(round(duration * sample_rate))
        t = start_time + np.arange(n) / sample_rate
        return Waveform(sample_rate, start_time, self.evaluate(t))

    def to_csv(self, path):
        """Pulse list as ``time,amplitude`` rows (peak instants)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "amplitude"])
            for t, a in zip(self.times, self.amplitudes):
                writer.writerow([repr(float(t)), repr(float(a))])


class EchoDetection(NamedTuple):
    tau1: float
    peak_amplitude: float


def intensity_model(reflectivity, range_m):
    """Echo amplitude: reflectivity with inverse-square falloff beyond 1 m, clamped to (0, 1]."""
    r = np.maximum(np.asarray(range_m, dtype=float), 1.0)
    return np.clip(np.asarray(reflectivity, dtype=float) / (r * r), 0.0, 1.0)


def synthesize_echo(range_m: float, reflectivity: float, emit_time: float, config: LidarConfig) -> Waveform:
    """Received laser echo over one receive window (one firing interval) at the dense rate.

    Out-of-bounds ranges produce an all-zero window (no return).
    """
    n = int(round(config.firing_interval * config.sim_sample_rate))
    t = emit_time + np.arange(n) / config.sim_sample_rate
    if not 0 < range_m <= config.max_range:
        return Waveform(config.sim_sample_rate, emit_time, np.zeros(n))
    peak_time = emit_time + 2.0 * range_m / RANGING.c
    amp = intensity_model(reflectivity, range_m)
    return Waveform(config.sim_sample_rate, emit_time, amp * pulse_shape(t - peak_time, config.pulse_width))


def couple_emi(echo: Waveform, emi: EmiSource | None, channel: CouplingChannel, window_start: float,
               phase=None) -> Waveform:
    """Superimpose the receiver-trace interference on ``echo``.

    ``window_start`` is the absolute simulation time of ``echo``'s first
    sample; the carrier phase runs continuously in absolute time.
    """
    t = window_start + np.arange(len(echo)) / echo.sample_rate
    interference = receiver_interference(emi, channel, t, phase)
    return Waveform(echo.sample_rate, echo.start_time, echo.samples + interference)


def add_noise(w: Waveform, sigma: float, rng: np.random.Generator) -> Waveform:
    if sigma == 0:
        return w
    return Waveform(w.sample_rate, w.start_time, w.samples + rng.normal(0.0, sigma, len(w)))


def saturate(w: Waveform, limit: float) -> Waveform:
    if not limit > 0:
        raise ValueError("limit must be positive")
    return Waveform(w.sample_rate, w.start_time, np.clip(w.samples, -limit, limit))


def digitize(w: Waveform, adc_rate: float) -> Waveform:
    """Point-sample ``w`` every ``1/adc_rate`` seconds from its first sample.

    No anti-alias filtering is applied.  When the rates are not commensurate
    the nearest dense sample is taken.
    """
    if adc_rate > w.sample_rate:
        raise ValueError("adc_rate must not exceed the waveform sample rate")
    if len(w) == 0:
        return Waveform(adc_rate, w.start_time, np.zeros(0))
    ratio = w.sample_rate / adc_rate
    n_out = int(math.floor((len(w) - 1) / ratio + 1e-9)) + 1
    idx = np.rint(np.arange(n_out) * ratio).astype(np.int64)
    idx = idx[idx < len(w)]
    return Waveform(adc_rate, w.start_time, w.samples[idx])


def alias_frequency(f: float, fs: float) -> float:
    """Apparent frequency of a tone at ``f`` after sampling at ``fs``, in [0, fs/2]."""
    if f < 0 or not fs > 0:
        raise ValueError("need f >= 0 and fs > 0")
    return abs(f - fs * round(f / fs))


def pattern_period(carrier_freq: float, cycle_period: float) -> float:
    """Cycles after which a CW interference pattern repeats across firing cycles.

    The carrier phase advances by ``frac(f*T)`` turns per cycle; folding that
    to the nearest whole turn gives the slowest visible drift.
    """
    frac = math.fmod(carrier_freq * cycle_period, 1.0)
    drift = min(frac, 1.0 - frac)
    return math.inf if drift < 1e-12 else 1.0 / drift


def detect_peaks(samples, start_times, sample_rate, threshold, pulse_width, margin=0.5):
    """Batch peak search over the rows of ``samples``.

    A row yields a detection when its global maximum reaches ``threshold``
    and stands out from everything farther than one pulse width away by at
    least ``margin`` of its own height.  A clipped plateau wider than a pulse
    therefore never qualifies.

    Returns:
        ``(tau1, peak, found)`` arrays.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    n, k_len = x.shape
    rows = np.arange(n)
    k = np.argmax(x, axis=1)
    peak = x[rows, k]
    half = int(math.ceil(pulse_width * sample_rate))
    far = np.abs(np.arange(k_len)[None, :] - k[:, None]) > half
    background = np.max(np.where(far, x, -np.inf), axis=1, initial=-np.inf)
    found = (peak >= threshold) & (peak - background >= margin * peak)

    inner = (k > 0) & (k < k_len - 1)
    km = np.clip(k - 1, 0, k_len - 1)
    kp = np.clip(k + 1, 0, k_len - 1)
    y0, y2 = x[rows, km], x[rows, kp]
    denom = y0 - 2.0 * peak + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = np.where(inner & (denom < 0), 0.5 * (y0 - y2) / denom, 0.0)
    tau = np.asarray(start_times, dtype=float) + (k + offset) / sample_rate
    return tau, peak, found


def detect_peak(w: Waveform, threshold: float, pulse_width: float = 10e-9,
                margin: float = 0.5) -> EchoDetection | None:
    """Arrival time of the strongest pulse in ``w`` or ``None`` when undetectable."""
    if len(w) == 0:
        raise ValueError("waveform is empty")
    tau, peak, found = detect_peaks(w.samples[None, :], [w.start_time], w.sample_rate, threshold,
                                    pulse_width, margin)
    if not found[0]:
        return None
    return EchoDetection(float(tau[0]), float(peak[0]))


def range_from_tof(tau0, tau1):
    """Range from emit and receive instants: ``0.5 * c * (tau1 - tau0)``.

    Raises:
        OrderingError: if any ``tau1`` precedes its ``tau0``.
    """
    delta = np.asarray(tau1, dtype=float) - np.asarray(tau0, dtype=float)
    if np.any(delta < 0):
        raise OrderingError("receive time precedes emit time")
    out = 0.5 * RANGING.c * delta
    return float(out) if out.ndim == 0 else out
