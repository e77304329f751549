"""Spherical-coordinate point cloud container.

Angles are in degrees.  ``theta`` is the polar angle from +z and ``phi`` the
azimuth from +x toward +y, so a shot at elevation ``e`` has ``theta = 90 - e``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class Point(NamedTuple):
    r: float
    theta: float
    phi: float
    intensity: float
    valid: bool
    ray_id: tuple[int, int]


def spherical_to_cartesian(r, theta_deg, phi_deg):
    theta = np.radians(theta_deg)
    phi = np.radians(phi_deg)
    sin_t = np.sin(theta)
    return np.stack([r * sin_t * np.cos(phi), r * sin_t * np.sin(phi), r * np.cos(theta)], axis=-1)


def cartesian_to_spherical(xyz):
    xyz = np.asarray(xyz, dtype=float)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    rho = np.hypot(x, y)
    r = np.hypot(rho, z)
    theta = np.degrees(np.arctan2(rho, z))
    phi = np.degrees(np.arctan2(y, x))
    return r, theta, phi


@dataclass
class PointCloud:
    """One frame of measurements, stored column-wise.

    ``cycle`` and ``channel`` together form the ray id.  At most one point
    exists per ray id.  ``cartesian`` optionally keeps the exact coordinates a
    cloud was read from, since the spherical round trip is not bit-exact.
    """

    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    intensity: np.ndarray
    valid: np.ndarray
    cycle: np.ndarray
    channel: np.ndarray
    frame_index: int = 0
    config_id: str = ""
    cartesian: np.ndarray | None = None

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        self.intensity = np.asarray(self.intensity, dtype=float)
        self.valid = np.asarray(self.valid, dtype=bool)
        self.cycle = np.asarray(self.cycle, dtype=np.int64)
        self.channel = np.asarray(self.channel, dtype=np.int64)
        n = len(self.r)
        for name in ("theta", "phi", "intensity", "valid", "cycle", "channel"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has length {len(getattr(self, name))}, expected {n}")
        if self.cartesian is not None:
            self.cartesian = np.asarray(self.cartesian, dtype=float).reshape(n, 3)

    def __len__(self):
        return len(self.r)

    @classmethod
    def empty(cls, frame_index=0, config_id=""):
        z = np.zeros(0)
        return cls(z, z, z, z, np.zeros(0, bool), np.zeros(0, np.int64), np.zeros(0, np.int64),
                   frame_index, config_id)

    @classmethod
    def from_points(cls, points, frame_index=0, config_id=""):
        points = list(points)
        if not points:
            return cls.empty(frame_index, config_id)
        cols = list(zip(*points))
        ray_ids = np.asarray(cols[5], dtype=np.int64).reshape(-1, 2)
        return cls(cols[0], cols[1], cols[2], cols[3], cols[4], ray_ids[:, 0], ray_ids[:, 1],
                   frame_index, config_id)

    @classmethod
    def from_cartesian(cls, xyz, intensity=None, frame_index=0, config_id=""):
        xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
        r, theta, phi = cartesian_to_spherical(xyz)
        n = len(r)
        intensity = np.zeros(n) if intensity is None else intensity
        return cls(r, theta, phi, intensity, np.ones(n, bool), np.arange(n), np.zeros(n, np.int64),
                   frame_index, config_id, cartesian=xyz)

    @property
    def points(self) -> list[Point]:
        return [Point(float(r), float(t), float(p), float(i), bool(v), (int(c), int(ch)))
                for r, t, p, i, v, c, ch in zip(self.r, self.theta, self.phi, self.intensity,
                                                 self.valid, self.cycle, self.channel)]

    @property
    def ray_ids(self) -> np.ndarray:
        return np.stack([self.cycle, self.channel], axis=-1)

    def xyz(self, valid_only=True) -> np.ndarray:
        sel = self.valid if valid_only else slice(None)
        if self.cartesian is not None:
            return self.cartesian[sel]
        return spherical_to_cartesian(self.r[sel], self.theta[sel], self.phi[sel])

    def select(self, mask) -> "PointCloud":
        return PointCloud(self.r[mask], self.theta[mask], self.phi[mask], self.intensity[mask],
                          self.valid[mask], self.cycle[mask], self.channel[mask],
                          self.frame_index, self.config_id,
                          None if self.cartesian is None else self.cartesian[mask])

    def valid_points(self) -> "PointCloud":
        return self.select(self.valid)

    def replace(self, **columns) -> "PointCloud":
        data = dict(r=self.r, theta=self.theta, phi=self.phi, intensity=self.intensity, valid=self.valid,
                    cycle=self.cycle, channel=self.channel, frame_index=self.frame_index,
                    config_id=self.config_id, cartesian=self.cartesian)
        # Stale once the geometry changes.
        if {"r", "theta", "phi"} & columns.keys():
            data["cartesian"] = None
        data.update(columns)
        return PointCloud(**data)
