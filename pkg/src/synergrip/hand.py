"""Config-driven kinematic hand model.

A hand is a set of serial revolute chains rooted in a shared palm frame.
Each joint contributes Trans(origin) * Rot(axis, angle) * Trans(link_length * x),
and an optional fixed tip rotation orients the fingertip sensor frame so
that +z is the outward normal of the pad.

Hand descriptions are JSON documents (schema "hand/1"); the package ships
a default three-finger precision-grasp model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .units import ConfigError, FingertipForce, Pose, Vec3, decompose

HAND_SCHEMA = "hand/1"

# Joint angles may exceed their limits by at most this much before FK rejects them.
LIMIT_TOL = 1e-9


@dataclass(frozen=True)
class Joint:
    """One revolute joint: rotation axis, mount offset, limits and link length."""

    axis: Vec3
    origin: Vec3
    lo: float
    hi: float
    link_length: float


@dataclass(frozen=True)
class Finger:
    name: str
    tag: str
    joints: tuple[Joint, ...]
    tip_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))


@dataclass(frozen=True)
class HandModel:
    fingers: tuple[Finger, ...]
    palm: Pose = field(default_factory=Pose.identity)

    @property
    def joint_count(self) -> int:
        return sum(len(f.joints) for f in self.fingers)

    @property
    def finger_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.fingers)

    def finger_by_tag(self, tag: str) -> Finger:
        for f in self.fingers:
            if f.tag == tag:
                return f
        raise ValueError(f"hand model has no finger tagged {tag!r}")

    def finger_slices(self) -> dict[str, slice]:
        """Map finger name to its slice of the flat joint-angle vector."""
        out = {}
        start = 0
        for f in self.fingers:
            out[f.name] = slice(start, start + len(f.joints))
            start += len(f.joints)
        return out

    def joint_limits(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([j.lo for f in self.fingers for j in f.joints])
        hi = np.array([j.hi for f in self.fingers for j in f.joints])
        return lo, hi

    def validate_configuration(self, q: "JointConfiguration") -> None:
        if len(q.angles) != self.joint_count:
            raise ValueError(
                f"joint configuration has {len(q.angles)} angles, model has "
                f"{self.joint_count} joints"
            )
        idx = 0
        for f in self.fingers:
            for jn, joint in enumerate(f.joints):
                a = q.angles[idx]
                if not math.isfinite(a):
                    raise ValueError(f"joint {f.name}.j{jn} angle is non-finite")
                if a < joint.lo - LIMIT_TOL or a > joint.hi + LIMIT_TOL:
                    raise ValueError(
                        f"joint {f.name}.j{jn} angle {a:.6f} outside limits "
                        f"[{joint.lo}, {joint.hi}]"
                    )
                idx += 1


@dataclass(frozen=True)
class JointConfiguration:
    """Flat vector of joint angles (rad), in model finger/joint order."""

    angles: tuple[float, ...]

    @staticmethod
    def from_sequence(values: Sequence[float]) -> "JointConfiguration":
        return JointConfiguration(tuple(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array(self.angles, dtype=float)

    def __len__(self) -> int:
        return len(self.angles)


def rotation_about_axis(axis: Vec3, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit axis."""
    k = axis.as_array()
    c, s = math.cos(angle), math.sin(angle)
    kx, ky, kz = k
    cross = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    return c * np.eye(3) + s * cross + (1.0 - c) * np.outer(k, k)


def rpy_to_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation from roll/pitch/yaw as Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    rx = rotation_about_axis(Vec3(1, 0, 0), roll)
    ry = rotation_about_axis(Vec3(0, 1, 0), pitch)
    rz = rotation_about_axis(Vec3(0, 0, 1), yaw)
    return rz @ ry @ rx


def _chain_pose(finger: Finger, angles: Sequence[float]) -> Pose:
    """Fingertip pose in the palm frame for one finger."""
    r = np.eye(3)
    p = np.zeros(3)
    for joint, angle in zip(finger.joints, angles):
        p = p + r @ joint.origin.as_array()
        r = r @ rotation_about_axis(joint.axis, angle)
        p = p + r @ np.array([joint.link_length, 0.0, 0.0])
    r = r @ finger.tip_rotation
    return Pose(r, Vec3.from_array(p))


def fingertip_poses_palm(model: HandModel, q: JointConfiguration) -> list[Pose]:
    """Fingertip poses in the palm frame, one per finger in model order."""
    model.validate_configuration(q)
    slices = model.finger_slices()
    return [
        model.palm.compose(_chain_pose(f, q.angles[slices[f.name]]))
        for f in model.fingers
    ]


def forward_kinematics(model: HandModel, q: JointConfiguration, hand_pose: Pose | None = None) -> list[Pose]:
    """World-frame fingertip poses for a joint configuration and hand pose."""
    if hand_pose is None:
        hand_pose = Pose.identity()
    return [hand_pose.compose(tip) for tip in fingertip_poses_palm(model, q)]


def thumb_index_distance(model: HandModel, q: JointConfiguration) -> float:
    """Euclidean thumb-tip to index-tip distance in the palm frame (m)."""
    thumb = model.finger_by_tag("THUMB")
    index = model.finger_by_tag("INDEX")
    slices = model.finger_slices()
    pt = _chain_pose(thumb, q.angles[slices[thumb.name]]).translation
    pi = _chain_pose(index, q.angles[slices[index.name]]).translation
    d = pt.add(pi.scaled(-1.0))
    return d.norm()


def world_tangential(
    model: HandModel,
    q: JointConfiguration,
    hand_pose: Pose,
    forces: Sequence[FingertipForce],
) -> Vec3:
    """Net tangential force in the world frame, mN.

    Each sample's in-plane component is rotated by its fingertip's world
    orientation and the results are summed. Samples must reference distinct
    fingers of the model; a subset of the fingers is accepted.
    """
    tips = forward_kinematics(model, q, hand_pose)
    by_name = dict(zip(model.finger_names, tips))
    seen = set()
    total = np.zeros(3)
    for sample in forces:
        if sample.fingertip_id not in by_name:
            raise ValueError(f"force sample references unknown fingertip {sample.fingertip_id!r}")
        if sample.fingertip_id in seen:
            raise ValueError(f"duplicate force sample for fingertip {sample.fingertip_id!r}")
        seen.add(sample.fingertip_id)
        _, f_t_vec, _ = decompose(sample)
        total = total + by_name[sample.fingertip_id].rotation @ f_t_vec.as_array()
    return Vec3.from_array(total)


def _vec3_from(value, where: str) -> Vec3:
    if not (isinstance(value, (list, tuple)) and len(value) == 3):
        raise ConfigError(f"{where}: expected a list of 3 numbers")
    try:
        v = Vec3(float(value[0]), float(value[1]), float(value[2]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if not v.is_finite():
        raise ConfigError(f"{where}: components must be finite")
    return v


def _finger_from(data: dict, where: str) -> Finger:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise ConfigError(f"{where}.name: required non-empty string")
    tag = data.get("tag", "")
    if not isinstance(tag, str):
        raise ConfigError(f"{where}.tag: must be a string")
    raw_joints = data.get("joints")
    if not isinstance(raw_joints, list) or not raw_joints:
        raise ConfigError(f"{where}.joints: required non-empty list")
    joints = []
    for i, jd in enumerate(raw_joints):
        jw = f"{where}.joints[{i}]"
        if not isinstance(jd, dict):
            raise ConfigError(f"{jw}: expected an object")
        axis = _vec3_from(jd.get("axis"), f"{jw}.axis")
        n = axis.norm()
        if n < 1e-12:
            raise ConfigError(f"{jw}.axis: must be non-zero")
        axis = axis.scaled(1.0 / n)
        origin = _vec3_from(jd.get("origin", [0, 0, 0]), f"{jw}.origin")
        limits = jd.get("limits")
        if not (isinstance(limits, (list, tuple)) and len(limits) == 2):
            raise ConfigError(f"{jw}.limits: expected [lo, hi]")
        lo, hi = float(limits[0]), float(limits[1])
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ConfigError(f"{jw}.limits: lo must be < hi and finite")
        link = jd.get("link_length")
        if not isinstance(link, (int, float)) or not link > 0:
            raise ConfigError(f"{jw}.link_length: must be > 0")
        joints.append(Joint(axis=axis, origin=origin, lo=lo, hi=hi, link_length=float(link)))
    tip_rotation = np.eye(3)
    if "tip_rpy" in data:
        rpy = data["tip_rpy"]
        if not (isinstance(rpy, (list, tuple)) and len(rpy) == 3):
            raise ConfigError(f"{where}.tip_rpy: expected [roll, pitch, yaw]")
        tip_rotation = rpy_to_matrix(float(rpy[0]), float(rpy[1]), float(rpy[2]))
    return Finger(name=name, tag=tag, joints=tuple(joints), tip_rotation=tip_rotation)


def hand_model_from_dict(data: dict) -> HandModel:
    if not isinstance(data, dict):
        raise ConfigError("hand model: expected a JSON object")
    if data.get("schema") != HAND_SCHEMA:
        raise ConfigError(f"hand model: schema must be {HAND_SCHEMA!r}, got {data.get('schema')!r}")
    raw_fingers = data.get("fingers")
    if not isinstance(raw_fingers, list) or len(raw_fingers) < 2:
        raise ConfigError("hand model: fingers must be a list with at least 2 entries")
    fingers = tuple(_finger_from(fd, f"fingers[{i}]") for i, fd in enumerate(raw_fingers))
    names = [f.name for f in fingers]
    if len(set(names)) != len(names):
        raise ConfigError("hand model: finger names must be unique")
    tags = [f.tag for f in fingers]
    if tags.count("THUMB") != 1 or tags.count("INDEX") != 1:
        raise ConfigError("hand model: exactly one THUMB and one INDEX tag required")
    return HandModel(fingers=fingers)


def load_hand_model(path: str | Path) -> HandModel:
    """Load and validate a hand/1 JSON hand description."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read hand model {path}: {exc}") from None
    return hand_model_from_dict(data)


def default_hand_model() -> HandModel:
    """The bundled three-finger precision-grasp hand."""
    text = resources.files("synergrip.data").joinpath("default_hand.json").read_text()
    return hand_model_from_dict(json.loads(text))
