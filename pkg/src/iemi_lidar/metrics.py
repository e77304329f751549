"""Attack-effect metrics: Hausdorff distance, per-ray errors, effect labels, detector robustness."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud
from .errors import ComparisonError, UndefinedDistanceError
from .fdd import LidarState

INTERFERENCE_THRESHOLD = 0.02
REMOVAL_DISPLACEMENT = 1.0
REMOVAL_DROPPED_FRACTION = 0.5
REMOVED_ALL = "removed-all"


class EffectLabel(Enum):
    NONE = "None"
    POINTS_INTERFERENCE = "PointsInterference"
    POINTS_REMOVAL = "PointsRemoval"
    POWER_OFF = "PowerOff"


@dataclass(frozen=True)
class RayErrorStats:
    mean_abs_error: float
    max_abs_error: float
    matched_rays: int
    dropped_fraction: float
    injected_count: int


def _directed(a: np.ndarray, b: np.ndarray) -> float:
    # The tree only picks the neighbour; distances are recomputed so the result matches a
    # brute-force search bit for bit.
    _, idx = cKDTree(b).query(a, k=1)
    return float(np.max(np.sqrt(np.sum((a - b[idx]) ** 2, axis=-1))))


def hausdorff_xyz(a, b) -> float:
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise UndefinedDistanceError("Hausdorff distance needs two non-empty point sets")
    return max(_directed(a, b), _directed(b, a))


def hausdorff(a: PointCloud, b: PointCloud) -> float:
    """Symmetric Hausdorff distance between the valid points of two clouds, in meters.

    Raises:
        UndefinedDistanceError: either cloud has no valid points.
    """
    return hausdorff_xyz(a.xyz(), b.xyz())


def _ray_keys(pc: PointCloud) -> np.ndarray:
    keys = pc.cycle[pc.valid] * (1 << 20) + pc.channel[pc.valid]
    if len(np.unique(keys)) != len(keys):
        raise ValueError("cloud holds more than one valid point per ray")
    return keys


def ray_error_stats(benign: PointCloud, attacked: PointCloud) -> RayErrorStats:
    """Per-ray displacement between two clouds of the same sensor.

    Invalid attacked points count as dropped.

    Raises:
        ComparisonError: the clouds come from different configurations.
    """
    if benign.config_id != attacked.config_id:
        raise ComparisonError(f"config {benign.config_id!r} vs {attacked.config_id!r}")
    kb, ka = _ray_keys(benign), _ray_keys(attacked)
    _, ib, ia = np.intersect1d(kb, ka, assume_unique=True, return_indices=True)
    pb, pa = benign.xyz()[ib], attacked.xyz()[ia]
    err = np.sqrt(np.sum((pa - pb) ** 2, axis=-1))
    matched = len(err)
    dropped = 0.0 if len(kb) == 0 else (len(kb) - matched) / len(kb)
    return RayErrorStats(
        mean_abs_error=float(err.mean()) if matched else 0.0,
        max_abs_error=float(err.max()) if matched else 0.0,
        matched_rays=matched,
        dropped_fraction=float(dropped),
        injected_count=int(len(ka) - matched),
    )


def classify_effect(stats: RayErrorStats, final_state: LidarState) -> EffectLabel:
    """Effect label; exactly 2 cm counts as unaffected, exactly 1 m as removal."""
    if final_state is LidarState.POWER_OFF:
        return EffectLabel.POWER_OFF
    if stats.mean_abs_error >= REMOVAL_DISPLACEMENT or stats.dropped_fraction >= REMOVAL_DROPPED_FRACTION:
        return EffectLabel.POINTS_REMOVAL
    if stats.mean_abs_error > INTERFERENCE_THRESHOLD:
        return EffectLabel.POINTS_INTERFERENCE
    return EffectLabel.NONE


def robustness(ap_attacked: float, ap_benign: float) -> float:
    """Robustness coefficient: attacked over benign average precision.

    Raises:
        ZeroDivisionError: ``ap_benign`` is zero.
        ValueError: either value lies outside [0, 100].
    """
    for value in (ap_attacked, ap_benign):
        if not 0 <= value <= 100:
            raise ValueError(f"average precision {value!r} outside [0, 100]")
    if ap_benign == 0:
        raise ZeroDivisionError("benign average precision is zero")
    return ap_attacked / ap_benign


class SweepRow(NamedTuple):
    frequency: float
    hausdorff: float | str
    label: EffectLabel
    injected_count: int


def sweep_report(results, benign: PointCloud) -> list[SweepRow]:
    """Per-frequency Hausdorff distance (or ``"removed-all"``) and effect label, by ascending frequency."""
    rows = []
    for freq, cloud, state in sorted(results, key=lambda item: item[0]):
        stats = ray_error_stats(benign, cloud)
        try:
            dist = hausdorff(benign, cloud)
        except UndefinedDistanceError:
            dist = REMOVED_ALL
        rows.append(SweepRow(float(freq), dist, classify_effect(stats, state), stats.injected_count))
    return rows


def write_sweep_csv(rows, path):
    """Columns: ``freq_hz, hausdorff_m`` (number or ``removed-all``), ``effect_label, injected_count``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["freq_hz", "hausdorff_m", "effect_label", "injected_count"])
        for row in rows:
            dist = row.hausdorff if isinstance(row.hausdorff, str) else repr(row.hausdorff)
            writer.writerow([repr(row.frequency), dist, row.label.value, row.injected_count])


def write_stats_csv(stats: RayErrorStats, label: EffectLabel, path, hausdorff_m=None):
    """One header row and one data row: the stats fields, ``hausdorff_m`` and ``effect_label``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f.name for f in fields(stats)] + ["hausdorff_m", "effect_label"])
        dist = REMOVED_ALL if hausdorff_m is None else repr(hausdorff_m)
        writer.writerow([repr(v) for v in astuple(stats)] + [dist, label.value])
