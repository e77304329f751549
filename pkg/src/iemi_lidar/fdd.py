"""Four-state fault detection and diagnostic (FDD) supervisor.

States: Initialization -> Normal on a clean self-check with the motor at
speed; any L1 fault in Initialization or Normal -> Warning; Warning returns
to Normal after ``debounce`` fault-free cycles; any L2 fault -> PowerOff,
which only a reboot leaves.

Fault thresholds are configurable defaults, not vendor values: temperature
outside [-20, 90] C (L1), any rail off nominal by more than 10 % (L1), RPM
off preset by more than 50 % (L2).  A fault is raised after ``debounce``
consecutive violating readouts and cleared after ``debounce`` consecutive
clean ones.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple

from .emi import MonitoringReadout


class LidarState(Enum):
    INITIALIZATION = "Initialization"
    NORMAL = "Normal"
    WARNING = "Warning"
    POWER_OFF = "PowerOff"


class FaultLevel(Enum):
    L1 = "L1"
    L2 = "L2"


class FaultCode(Enum):
    TEMP_OUT_OF_RANGE = "TempOutOfRange"
    VOLTAGE_OUT_OF_RANGE = "VoltageOutOfRange"
    RPM_DEVIATION = "RpmDeviation"
    SELF_CHECK_FAIL = "SelfCheckFail"


FAULT_LEVELS = {
    FaultCode.TEMP_OUT_OF_RANGE: FaultLevel.L1,
    FaultCode.VOLTAGE_OUT_OF_RANGE: FaultLevel.L1,
    FaultCode.RPM_DEVIATION: FaultLevel.L2,
    FaultCode.SELF_CHECK_FAIL: FaultLevel.L1,
}

FAULT_SOURCES = {
    FaultCode.TEMP_OUT_OF_RANGE: "temperature_line",
    FaultCode.VOLTAGE_OUT_OF_RANGE: "voltage_line",
    FaultCode.RPM_DEVIATION: "encoder_line",
    FaultCode.SELF_CHECK_FAIL: "self_check",
}

# Codes whose presence makes the LiDAR discard the cycle's points.
POINT_INVALIDATING = frozenset({FaultCode.TEMP_OUT_OF_RANGE, FaultCode.VOLTAGE_OUT_OF_RANGE})

MONITORED = (FaultCode.TEMP_OUT_OF_RANGE, FaultCode.VOLTAGE_OUT_OF_RANGE, FaultCode.RPM_DEVIATION)


class FaultEvent(NamedTuple):
    level: FaultLevel
    code: FaultCode
    source: str
    timestamp: float

    @classmethod
    def of(cls, code: FaultCode, timestamp: float = 0.0) -> "FaultEvent":
        return cls(FAULT_LEVELS[code], code, FAULT_SOURCES[code], timestamp)


@dataclass(frozen=True)
class FaultThresholds:
    temperature_low: float = -20.0
    temperature_high: float = 90.0
    nominal_rails: tuple[float, ...] = (12.0, 5.0, 3.3)
    rail_tolerance: float = 0.10
    rpm_deviation: float = 0.50
    rpm_ready: float = 0.05


def violations(readout: MonitoringReadout, thresholds: FaultThresholds, preset_rpm: float) -> set[FaultCode]:
    """Codes the readout violates right now, before debouncing."""
    found = set()
    if not thresholds.temperature_low <= readout.temperature <= thresholds.temperature_high:
        found.add(FaultCode.TEMP_OUT_OF_RANGE)
    for value, nominal in zip(readout.voltage_rails, thresholds.nominal_rails):
        if abs(value - nominal) > thresholds.rail_tolerance * abs(nominal):
            found.add(FaultCode.VOLTAGE_OUT_OF_RANGE)
            break
    if abs(readout.rpm - preset_rpm) / preset_rpm > thresholds.rpm_deviation:
        found.add(FaultCode.RPM_DEVIATION)
    return found


@dataclass(frozen=True)
class FddMachine:
    """Immutable supervisor value; :func:`step` and :func:`reboot` return new values.

    ``streaks`` maps each monitored code to ``(violating_run, clean_run)`` and
    ``active`` holds codes currently raised.
    """

    state: LidarState = LidarState.INITIALIZATION
    thresholds: FaultThresholds = FaultThresholds()
    debounce: int = 3
    preset_rpm: float = 600.0
    streaks: tuple = ()
    active: frozenset = frozenset()
    clean_cycles: int = 0
    last_rpm: float | None = None

    def __post_init__(self):
        if self.debounce < 1:
            raise ValueError("debounce must be >= 1")

    @classmethod
    def for_config(cls, config, **kwargs) -> "FddMachine":
        kwargs.setdefault("thresholds", FaultThresholds(nominal_rails=config.voltage_rails))
        kwargs.setdefault("preset_rpm", config.rpm)
        return cls(**kwargs)

    def streak(self, code: FaultCode) -> tuple[int, int]:
        return dict(self.streaks).get(code, (0, 0))

    def observe(self, readout: MonitoringReadout) -> tuple["FddMachine", list[FaultEvent]]:
        """Classify one readout and step the machine with the result."""
        faults = classify_faults(readout, self)
        return step(self, faults, readout), faults


def _updated_streaks(readout, machine):
    now = violations(readout, machine.thresholds, machine.preset_rpm)
    streaks, active = {}, set(machine.active)
    for code in MONITORED:
        bad, good = machine.streak(code)
        bad, good = (bad + 1, 0) if code in now else (0, good + 1)
        streaks[code] = (bad, good)
        if bad >= machine.debounce:
            active.add(code)
        elif good >= machine.debounce:
            active.discard(code)
    return streaks, active


def classify_faults(readout: MonitoringReadout, machine: FddMachine) -> list[FaultEvent]:
    """Debounced faults active once ``readout`` is taken into account."""
    _, active = _updated_streaks(readout, machine)
    return [FaultEvent.of(code, readout.timestamp) for code in MONITORED if code in active]


def step(machine: FddMachine, faults, readout: MonitoringReadout | None = None) -> FddMachine:
    """Advance the supervisor by one cycle.

    When ``readout`` is given its violations also update the debounce
    counters, and Initialization additionally requires the RPM readout to be
    within ``rpm_ready`` of preset before entering Normal.
    """
    if machine.state is LidarState.POWER_OFF:
        return machine
    faults = list(faults)
    levels = {f.level for f in faults}
    updates = {}
    if readout is not None:
        streaks, active = _updated_streaks(readout, machine)
        updates = dict(streaks=tuple(streaks.items()), active=frozenset(active), last_rpm=readout.rpm)

    state, clean = machine.state, machine.clean_cycles
    if FaultLevel.L2 in levels:
        state = LidarState.POWER_OFF
    elif FaultLevel.L1 in levels:
        state, clean = LidarState.WARNING, 0
    elif state is LidarState.WARNING:
        clean += 1
        if clean >= machine.debounce:
            state, clean = LidarState.NORMAL, 0
    elif state is LidarState.INITIALIZATION:
        rpm = readout.rpm if readout is not None else machine.preset_rpm
        if abs(rpm - machine.preset_rpm) <= machine.thresholds.rpm_ready * machine.preset_rpm:
            state = LidarState.NORMAL
    return replace(machine, state=state, clean_cycles=clean, **updates)


def reboot(machine: FddMachine) -> FddMachine:
    """Unconditional restart into Initialization with all counters cleared."""
    return replace(machine, state=LidarState.INITIALIZATION, streaks=(), active=frozenset(),
                   clean_cycles=0, last_rpm=None)


def points_invalid(machine: FddMachine, faults) -> bool:
    """True when the cycle's points must be flagged invalid."""
    return machine.state is LidarState.WARNING and any(f.code in POINT_INVALIDATING for f in faults)
