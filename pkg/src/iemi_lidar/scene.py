"""Analytic scene primitives and exact ray intersection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


def _check_reflectivity(value):
    if not 0 < value <= 1:
        raise ConfigurationError(f"reflectivity must lie in (0, 1], got {value!r}")


@dataclass(frozen=True)
class Plane:
    """Infinite plane ``normal . x == offset``."""

    normal: tuple[float, float, float]
    offset: float
    reflectivity: float = 1.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if n.shape != (3,) or not norm > 0:
            raise ConfigurationError("plane normal must be a non-zero 3-vector")
        _check_reflectivity(self.reflectivity)
        object.__setattr__(self, "normal", tuple(float(v) for v in n / norm))
        object.__setattr__(self, "offset", float(self.offset) / norm)

    def intersect(self, origins, directions):
        n = np.asarray(self.normal)
        denom = directions @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.offset - origins @ n) / denom
        return np.where((np.abs(denom) > 1e-15) & (t > 0), t, np.inf)


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    reflectivity: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError("sphere radius must be positive")
        _check_reflectivity(self.reflectivity)
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))

    def intersect(self, origins, directions):
        oc = origins - np.asarray(self.center)
        b = np.einsum("ij,ij->i", oc, directions)
        cc = np.einsum("ij,ij->i", oc, oc) - self.radius ** 2
        disc = b * b - cc
        root = np.sqrt(np.maximum(disc, 0.0))
        near, far = -b - root, -b + root
        t = np.where(near > 0, near, np.where(far > 0, far, np.inf))
        return np.where(disc >= 0, t, np.inf)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; a ray starting inside hits the interior wall."""

    lower: tuple[float, float, float]
    upper: tuple[float, float, float]
    reflectivity: float = 1.0

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi <= lo):
            raise ConfigurationError("box upper corner must exceed lower corner on every axis")
        _check_reflectivity(self.reflectivity)
        object.__setattr__(self, "lower", tuple(lo))
        object.__setattr__(self, "upper", tuple(hi))

    def intersect(self, origins, directions):
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / directions
            t1 = (lo - origins) * inv
            t2 = (hi - origins) * inv
        # Axis-parallel rays: inside the slab contributes (-inf, inf), outside misses.
        parallel = directions == 0
        inside = (origins >= lo) & (origins <= hi)
        t1 = np.where(parallel, np.where(inside, -np.inf, np.inf), t1)
        t2 = np.where(parallel, np.where(inside, np.inf, -np.inf), t2)
        t_near = np.max(np.minimum(t1, t2), axis=1)
        t_far = np.min(np.maximum(t1, t2), axis=1)
        hit = t_far >= np.maximum(t_near, 0.0)
        t = np.where(t_near > 0, t_near, np.where(t_far > 0, t_far, np.inf))
        return np.where(hit, t, np.inf)


@dataclass(frozen=True)
class Scene:
    primitives: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))


def cast_rays(scene: Scene, origins, directions, max_range: float = np.inf):
    """Vectorized nearest-hit search.

    Returns ``(ranges, reflectivity)`` arrays; misses have range ``inf`` and
    reflectivity 0.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    origins = np.broadcast_to(np.asarray(origins, dtype=float), directions.shape)
    best = np.full(len(directions), np.inf)
    refl = np.zeros(len(directions))
    for prim in scene.primitives:
        t = prim.intersect(origins, directions)
        closer = t < best
        best = np.where(closer, t, best)
        refl = np.where(closer, prim.reflectivity, refl)
    miss = best > max_range
    best[miss] = np.inf
    refl[miss] = 0.0
    return best, refl


def cast_ray(scene: Scene, origin, direction, max_range: float = np.inf):
    """Nearest positive intersection along one ray, or ``None`` on a miss.

    Returns:
        ``(range_m, reflectivity)`` of the closest primitive within ``max_range``.
    """
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    ranges, refl = cast_rays(scene, np.asarray(origin, dtype=float)[None, :], direction[None, :], max_range)
    if not np.isfinite(ranges[0]):
        return None
    return float(ranges[0]), float(refl[0])
