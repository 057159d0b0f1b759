"""Shared value types and sign conventions.

Conventions used across the package:

* forces in millinewtons (mN), lengths in meters, angles in radians,
  time in seconds
* fingertip sensor frames have +z along the outward normal of the pad,
  so a pressing contact reads a negative z force
* all controller math operates on the non-negative magnitudes produced
  by :func:`decompose`; the raw sign convention stops there
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class ConfigError(ValueError):
    """Raised when a config file (hand, decoder weights, scenario) is invalid."""


@dataclass(frozen=True)
class Vec3:
    """3D vector; unit depends on context (mN for forces, m for positions)."""

    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def add(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def scaled(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @staticmethod
    def from_array(a) -> "Vec3":
        return Vec3(float(a[0]), float(a[1]), float(a[2]))


ZERO3 = Vec3(0.0, 0.0, 0.0)

# Tolerance on R^T R = I and det(R) = 1 for pose rotations.
ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class Pose:
    """Rigid transform: world_point = rotation @ local_point + translation."""

    rotation: np.ndarray
    translation: Vec3

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got shape {r.shape}")
        if not np.all(np.isfinite(r)):
            raise ValueError("rotation contains non-finite entries")
        ortho_err = float(np.abs(r.T @ r - np.eye(3)).max())
        if ortho_err > ORTHONORMAL_TOL:
            raise ValueError(f"rotation is not orthonormal (max deviation {ortho_err:.3e})")
        det_err = abs(float(np.linalg.det(r)) - 1.0)
        if det_err > ORTHONORMAL_TOL:
            raise ValueError(f"rotation must be proper, det deviates by {det_err:.3e}")
        object.__setattr__(self, "rotation", r)
        if not self.translation.is_finite():
            raise ValueError("translation contains non-finite entries")

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), ZERO3)

    def compose(self, other: "Pose") -> "Pose":
        """Return self applied after other is expressed in self's frame."""
        r = self.rotation @ other.rotation
        t = self.rotation @ other.translation.as_array() + self.translation.as_array()
        return Pose(r, Vec3.from_array(t))

    def transform_point(self, p: Vec3) -> Vec3:
        return Vec3.from_array(self.rotation @ p.as_array() + self.translation.as_array())

    def rotate(self, v: Vec3) -> Vec3:
        return Vec3.from_array(self.rotation @ v.as_array())


class GraspType(Enum):
    """Closed set of precision grip labels conditioning posture decoding."""

    TRIPOD = "tripod"
    PINCH = "pinch"
    LATERAL_TRIPOD = "lateral_tripod"

    @staticmethod
    def parse(label: str) -> "GraspType":
        for member in GraspType:
            if member.value == label:
                return member
        known = ", ".join(m.value for m in GraspType)
        raise ValueError(f"unknown grasp type {label!r} (expected one of: {known})")


@dataclass(frozen=True)
class GraspContext:
    """The two controller outputs that condition posture decoding."""

    grasp_type: GraspType
    grasp_size_m: float


@dataclass(frozen=True)
class FingertipForce:
    """One 3-axis force sample in a fingertip frame, mN."""

    fingertip_id: str
    raw: Vec3
    timestamp_s: float


def decompose(sample: FingertipForce) -> tuple[float, Vec3, float]:
    """Split a raw fingertip sample into press magnitude and tangential part.

    Returns:
        (f_n, f_t_vec, f_t) where f_n = max(0, -raw.z) is the non-negative
        press magnitude, f_t_vec = (raw.x, raw.y, 0) the in-plane force and
        f_t its magnitude, all in mN.

    Raises:
        ValueError: if any raw component is non-finite.
    """
    raw = sample.raw
    if not raw.is_finite():
        raise ValueError(
            f"rejected sample from fingertip {sample.fingertip_id!r}: non-finite force"
        )
    f_n = max(0.0, -raw.z)
    f_t_vec = Vec3(raw.x, raw.y, 0.0)
    f_t = math.hypot(raw.x, raw.y)
    return f_n, f_t_vec, f_t
