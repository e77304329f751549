"""INI configuration files for the sensor, scene, coupling channel and attacker.

Recognized sections::

    [lidar]                 LidarConfig fields
    [plane NAME]            normal, offset, reflectivity
    [sphere NAME]           center, radius, reflectivity
    [box NAME]              lower, upper, reflectivity
    [channel]               path_loss_exponent, reference_loss, am_detection
    [resonance NAME]        surface, center, width, peak_gain
    [emi]                   EmiSource fields (initial_phase = random draws it from the seed)
    [thresholds]            PerturbationThresholds fields
    [fdd]                   debounce plus FaultThresholds fields

Tuples are comma separated.  Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from .emi import CouplingChannel, EmiSource, PerturbationThresholds, Resonance
from .errors import ConfigurationError, DomainError
from .fdd import FaultThresholds
from .lidar import LidarConfig
from .scene import Box, Plane, Scene, Sphere

PRIMITIVES = {"plane": Plane, "sphere": Sphere, "box": Box}


@dataclass
class ConfigBundle:
    lidar: LidarConfig | None = None
    scene: Scene | None = None
    channel: CouplingChannel | None = None
    emi: EmiSource | None = None
    thresholds: PerturbationThresholds | None = None
    fault_thresholds: FaultThresholds | None = None
    debounce: int | None = None

    def merged(self, other: "ConfigBundle") -> "ConfigBundle":
        """Fields set in ``other`` override this bundle's."""
        out = ConfigBundle(**{f.name: getattr(self, f.name) for f in fields(self)})
        for f in fields(other):
            value = getattr(other, f.name)
            if value is not None:
                setattr(out, f.name, value)
        return out


def data_path(name: str) -> Path:
    """Path of a bundled data file such as ``demo_scene.ini``."""
    return Path(str(resources.files("iemi_lidar") / "data" / name))


def _convert(text: str, kind):
    text = text.strip()
    if kind is tuple:
        return tuple(float(v) for v in text.split(",") if v.strip())
    if kind is bool:
        return text.lower() in ("1", "true", "yes", "on")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def _kind(dc_field):
    hint = str(dc_field.type)
    if "tuple" in hint:
        return tuple
    if hint.startswith("int"):
        return int
    if "float" in hint:
        return float
    return str


def _build(cls, section, where, overrides=None):
    known = {f.name: f for f in fields(cls)}
    kwargs = dict(overrides or {})
    for key, text in section.items():
        if key in kwargs:
            continue
        if key not in known:
            raise ConfigurationError(f"{where}: unknown key {key!r}")
        try:
            kwargs[key] = _convert(text, _kind(known[key]))
        except ValueError as exc:
            raise ConfigurationError(f"{where}: bad value for {key!r}: {text!r}") from exc
    try:
        return cls(**kwargs)
    except (ConfigurationError, DomainError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{where}: {exc}") from exc


def load_ini(path) -> ConfigBundle:
    """Parse one configuration file.

    Raises:
        ConfigurationError: unreadable syntax, unknown section or key, or invalid values.
        OSError: the file cannot be read.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        try:
            parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc

    bundle = ConfigBundle()
    primitives, resonances = [], {}
    for name in parser.sections():
        section = parser[name]
        where = f"{path} [{name}]"
        head, _, label = name.partition(" ")
        if name == "lidar":
            angles = section.get("firing_order")
            overrides = {}
            if angles is not None:
                overrides["firing_order"] = tuple(int(float(v)) for v in angles.split(","))
            bundle.lidar = _build(LidarConfig, section, where, overrides)
        elif head in PRIMITIVES and label:
            primitives.append(_build(PRIMITIVES[head], section, where))
        elif name == "channel":
            bundle.channel = _build(CouplingChannel, section, where)
        elif head == "resonance" and label:
            keys = dict(section)
            surface = keys.pop("surface", None)
            if surface is None:
                raise ConfigurationError(f"{where}: missing key 'surface'")
            resonances.setdefault(surface, []).append(_build(Resonance, keys, where))
        elif name == "emi":
            overrides = {}
            if section.get("initial_phase", "").strip().lower() == "random":
                overrides["initial_phase"] = None
            if "baseband" in section:
                raise ConfigurationError(f"{where}: baseband comes from an attack plan, not a profile")
            bundle.emi = _build(EmiSource, section, where, overrides)
        elif name == "thresholds":
            bundle.thresholds = _build(PerturbationThresholds, section, where)
        elif name == "fdd":
            keys = dict(section)
            if "debounce" in keys:
                bundle.debounce = _convert(keys.pop("debounce"), int)
            bundle.fault_thresholds = _build(FaultThresholds, keys, where)
        else:
            raise ConfigurationError(f"{path}: unknown section [{name}]")
    if primitives:
        bundle.scene = Scene(tuple(primitives))
    if resonances:
        base = bundle.channel or CouplingChannel()
        try:
            bundle.channel = CouplingChannel(resonances, base.path_loss_exponent, base.reference_loss,
                                             base.am_detection)
        except DomainError as exc:
            raise ConfigurationError(f"{path}: {exc}") from exc
    return bundle


def load_many(paths) -> ConfigBundle:
    bundle = ConfigBundle()
    for path in paths:
        if path is not None:
            bundle = bundle.merged(load_ini(path))
    return bundle
