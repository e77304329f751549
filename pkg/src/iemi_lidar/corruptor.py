"""Range-noise corruption of point clouds and the float32 ``.bin`` interchange format.

Records are four little-endian float32 values: x, y, z, intensity.
"""

from __future__ import annotations

import hashlib
import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import DomainError, FormatError

RECORD = np.dtype("<f4")
RECORD_BYTES = 16


@dataclass(frozen=True)
class CorruptionSpec:
    epsilon: float
    seed: int = 0
    distribution: str = "uniform"

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon!r}")
        if self.distribution != "uniform":
            raise DomainError("only the uniform distribution is supported")


def range_offsets(n: int, spec: CorruptionSpec) -> np.ndarray:
    """Offset for point ``i`` is the ``i``-th uniform draw on [-eps, eps) of the seeded stream."""
    if spec.epsilon == 0:
        return np.zeros(n)
    return np.random.default_rng(spec.seed).uniform(-spec.epsilon, spec.epsilon, n)


def corrupt_cloud(pc: PointCloud, spec: CorruptionSpec) -> PointCloud:
    """Add independent uniform range noise, clamped at zero; angles and intensities are untouched.

    Raises:
        DomainError: the cloud holds invalid points.
    """
    if not np.all(pc.valid):
        raise DomainError("corruption expects a cloud of valid points only")
    u = range_offsets(len(pc), spec)
    r_new = np.maximum(pc.r + u, 0.0)
    out = pc.replace(r=r_new)
    if pc.cartesian is not None:
        out.cartesian = _rescale(pc.cartesian, pc.r, r_new)
    return out


def _rescale(xyz, r_old, r_new):
    # Scaling along the ray keeps unchanged points bit-identical; a point at the origin moves along +z.
    xyz = np.asarray(xyz, dtype=float)
    out = np.empty_like(xyz)
    at_origin = r_old == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(at_origin, 0.0, r_new / np.where(at_origin, 1.0, r_old))
    out[:] = xyz * scale[:, None]
    out[at_origin] = 0.0
    out[at_origin, 2] = r_new[at_origin]
    return out


def read_cloud_bin(path) -> PointCloud:
    """Load a ``.bin`` file; ray ids are ordinal.

    Raises:
        FormatError: truncated trailing record or a non-finite value.
    """
    data = Path(path).read_bytes()
    whole = len(data) - len(data) % RECORD_BYTES
    if whole != len(data):
        raise FormatError("truncated record", whole)
    values = np.frombuffer(data, dtype=RECORD).reshape(-1, 4)
    bad = ~np.isfinite(values)
    if np.any(bad):
        flat = int(np.flatnonzero(bad.ravel())[0])
        raise FormatError("non-finite value", flat * RECORD.itemsize)
    xyz = values[:, :3].astype(float)
    return PointCloud.from_cartesian(xyz, intensity=values[:, 3].astype(float))


def write_cloud_bin(pc: PointCloud, path):
    """Write the valid points of ``pc``.

    Raises:
        FormatError: a coordinate does not fit a finite float32.
    """
    xyz = pc.xyz(valid_only=True)
    records = np.empty((len(xyz), 4), dtype=RECORD)
    with np.errstate(over="ignore"):
        records[:, :3] = xyz
        records[:, 3] = pc.intensity[pc.valid]
    bad = ~np.isfinite(records)
    if np.any(bad):
        raise FormatError("value not representable as finite float32",
                          int(np.flatnonzero(bad.ravel())[0]) * RECORD.itemsize)
    Path(path).write_bytes(records.tobytes())


def file_seed(master_seed: int, relative_path: str) -> int:
    """Per-file seed from the master seed and a hash of the relative path."""
    digest = int.from_bytes(hashlib.sha256(relative_path.encode("utf-8")).digest()[:8], "little")
    return int(np.random.SeedSequence([master_seed, digest]).generate_state(1, np.uint64)[0])


def corrupt_file(src, dst, spec: CorruptionSpec):
    write_cloud_bin(corrupt_cloud(read_cloud_bin(src), spec), dst)


def corrupt_tree(in_dir, out_dir, spec: CorruptionSpec, workers: int = 1) -> list[str]:
    """Mirror ``in_dir`` into ``out_dir``, corrupting every ``.bin`` file.

    Files are visited in lexicographic order of their relative paths and
    each gets its own derived seed, so the output does not depend on
    ``workers``.  Other files are copied verbatim.

    Returns:
        Relative paths of the corrupted files.
    """
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    files = sorted(p.relative_to(in_dir).as_posix() for p in in_dir.rglob("*") if p.is_file())
    jobs = []
    for rel in files:
        target = out_dir / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        if rel.endswith(".bin"):
            jobs.append((in_dir / rel, target, CorruptionSpec(spec.epsilon, file_seed(spec.seed, rel))))
        else:
            shutil.copyfile(in_dir / rel, target)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda job: corrupt_file(*job), jobs))
    else:
        for job in jobs:
            corrupt_file(*job)
    return [os.fspath(job[1].relative_to(out_dir).as_posix()) for job in jobs]
