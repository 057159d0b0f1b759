"""Quasi-static stand-in for the physical hand plus object.

Generates fingertip force readings from the commanded posture, object
properties and scripted events, and evolves slip and object status. The
contact is a simple spring: penetration of the commanded grasp into the
object width produces normal force, shared equally by the contacting
fingers; the tangential load (weight plus scripted pushes) is shared
equally and expressed in each fingertip frame via forward kinematics.
There are no inertial dynamics: the object state changes only through
slip accumulation or scripted events.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .controller import default_contact_fingers
from .hand import HandModel, forward_kinematics, thumb_index_distance
from .units import ConfigError, FingertipForce, GraspContext, GraspType, Pose, Vec3

GRAVITY_M_S2 = 9.81
MN_PER_N = 1000.0


@dataclass
class SimObject:
    """Grasped object: geometry, contact properties and status flags."""

    mass_kg: float
    width_m: float
    mu: float
    k_c_mN_per_m: float = 1.0e5
    c_slip_m_per_mN_s: float = 1.0e-5
    drop_threshold_m: float = 0.005
    position: Vec3 = Vec3(0.0, 0.0, 0.0)
    slip_accum_m: float = 0.0
    held: bool = False
    slipping: bool = False
    dropped: bool = False
    # Episodes start with the object resting on something.
    on_support: bool = True

    def __post_init__(self):
        if not self.mass_kg > 0:
            raise ConfigError("object mass_kg must be > 0")
        if not self.width_m > 0:
            raise ConfigError("object width_m must be > 0")
        if not self.mu > 0:
            raise ConfigError("object mu must be > 0")
        if not self.k_c_mN_per_m > 0:
            raise ConfigError("object k_c_mN_per_m must be > 0")
        if not self.c_slip_m_per_mN_s > 0:
            raise ConfigError("object c_slip_m_per_mN_s must be > 0")
        if not self.drop_threshold_m > 0:
            raise ConfigError("object drop_threshold_m must be > 0")

    @property
    def weight_mN(self) -> float:
        return self.mass_kg * GRAVITY_M_S2 * MN_PER_N

    @property
    def status(self) -> str:
        if self.dropped:
            return "dropped"
        if self.slipping:
            return "slipping"
        if self.on_support:
            return "on_support"
        return "held" if self.held else "free"


@dataclass
class SensorModel:
    """Sampling-rate, noise and quantization description of the force sensors."""

    rate_hz: float = 50.0
    noise_std_mN: float = 0.0
    quantization_mN: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.rate_hz > 0:
            raise ConfigError("sensor rate_hz must be > 0")
        if self.noise_std_mN < 0 or self.quantization_mN < 0:
            raise ConfigError("sensor noise/quantization must be >= 0")


# --- scripted events -------------------------------------------------------


@dataclass(frozen=True)
class LiftEvent:
    t_s: float
    ramp_s: float = 1.0


@dataclass(frozen=True)
class MoveEvent:
    t_s: float
    magnitude_mN: float
    duration_s: float
    direction: Vec3 = Vec3(1.0, 0.0, 0.0)


@dataclass(frozen=True)
class AddMassEvent:
    t_s: float
    mass_kg: float


@dataclass(frozen=True)
class SupportContactEvent:
    t_s: float
    push_mN: float = 200.0


@dataclass(frozen=True)
class PullUpEvent:
    t_s: float
    force_mN: float


@dataclass(frozen=True)
class ResetEvent:
    t_s: float


Event = LiftEvent | MoveEvent | AddMassEvent | SupportContactEvent | PullUpEvent | ResetEvent


def slip_update(
    obj: SimObject,
    fn_per_finger: Sequence[float],
    ft_required_total: float,
    dt: float,
) -> str:
    """Coulomb slip check: mutate the object's slip state and return its status.

    The grasp holds while mu * sum(f_n) >= required tangential; otherwise
    the object slips at a rate proportional to the force deficit, and the
    accumulated slip past the drop threshold drops the object.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if obj.dropped:
        return obj.status
    fn_total = sum(fn_per_finger)
    if obj.mu * fn_total >= ft_required_total:
        obj.slipping = False
        obj.held = fn_total > 0
    else:
        obj.slipping = True
        obj.held = False
        v_slip = obj.c_slip_m_per_mN_s * (ft_required_total - obj.mu * fn_total)
        obj.slip_accum_m += v_slip * dt
        obj.position = Vec3(obj.position.x, obj.position.y, obj.position.z - v_slip * dt)
        if obj.slip_accum_m > obj.drop_threshold_m:
            obj.dropped = True
            obj.held = False
            obj.slipping = False
    return obj.status


@dataclass(frozen=True)
class SimTick:
    """Ground-truth internals of one simulation step (for traces and oracles)."""

    t: float
    fn_total_mN: float
    ft_required_mN: float
    lift_fraction: float
    airborne: bool
    held: bool
    slipping: bool
    slip_accum_m: float
    status: str


class ContactSim:
    """Steps the contact model in lockstep with the controller.

    Call order per tick: ``apply_event`` for due events, ``contact_forces``
    to produce the sensor samples for the commanded grasp, then ``slip_step``
    to evolve slip with the same internals.
    """

    def __init__(
        self,
        obj: SimObject,
        sensor: SensorModel,
        model: HandModel,
        decoder,
        grasp_type: GraspType,
        *,
        contact_fingers: Sequence[str] | None = None,
    ):
        self.obj = obj
        self.sensor = sensor
        self.model = model
        self.decoder = decoder
        self.grasp_type = grasp_type
        if contact_fingers is None:
            contact_fingers = default_contact_fingers(model, grasp_type)
        self.contact_fingers = tuple(contact_fingers)
        self._rng = np.random.default_rng(sensor.seed)
        self._lift: LiftEvent | None = None
        self._move: MoveEvent | None = None
        self._pull_mN = 0.0
        self._push_mN = 0.0
        self._fn_per = 0.0
        self._in_contact = False
        self.trace: list[SimTick] = []

    # -- events --------------------------------------------------------

    def apply_event(self, event: Event) -> None:
        if isinstance(event, LiftEvent):
            self._lift = event
            self.obj.on_support = False
        elif isinstance(event, MoveEvent):
            self._move = event
        elif isinstance(event, AddMassEvent):
            self.obj.mass_kg += event.mass_kg
        elif isinstance(event, SupportContactEvent):
            self.obj.on_support = True
            self._push_mN = event.push_mN
            self._pull_mN = 0.0
        elif isinstance(event, PullUpEvent):
            # A receiving hand carries the object from below: externally
            # supported from here on, like a table contact.
            self._pull_mN = event.force_mN
            self.obj.on_support = True
        elif isinstance(event, ResetEvent):
            self._lift = None
            self._move = None
            self._pull_mN = 0.0
            self._push_mN = 0.0
        else:
            raise ConfigError(f"unknown event {event!r}")

    def lift_fraction(self, t: float) -> float:
        """Fraction of the object weight carried by the fingers at time t."""
        if self._lift is None or t < self._lift.t_s:
            return 0.0
        if self._lift.ramp_s <= 0:
            return 1.0
        return min(1.0, (t - self._lift.t_s) / self._lift.ramp_s)

    def tangential_load_world(self, t: float) -> Vec3:
        """World-frame tangential load the fingertips must carry, mN."""
        if self.obj.dropped:
            return Vec3(0.0, 0.0, 0.0)
        if self.obj.on_support and self._push_mN > 0.0:
            # Support carries the weight; continued lowering pushes the object up.
            z = self._push_mN
        else:
            z = -self.obj.weight_mN * self.lift_fraction(t) + self._pull_mN
        x = y = 0.0
        if self._move is not None and self._move.t_s <= t < self._move.t_s + self._move.duration_s:
            d = self._move.direction
            n = d.norm()
            if n > 0:
                x = self._move.magnitude_mN * d.x / n
                y = self._move.magnitude_mN * d.y / n
        return Vec3(x, y, z)

    # -- per-tick physics ------------------------------------------------

    def contact_forces(self, t: float, ctx: GraspContext, hand_pose: Pose) -> list[FingertipForce]:
        """Sensor samples for the commanded grasp context at time t."""
        posture = self.decoder.decode(ctx)
        q = posture.joints
        distance = thumb_index_distance(self.model, q)
        penetration = max(0.0, self.obj.width_m - distance)
        n_contact = len(self.contact_fingers)
        self._in_contact = penetration > 0.0 and not self.obj.dropped
        self._fn_per = (
            self.obj.k_c_mN_per_m * penetration / n_contact if self._in_contact else 0.0
        )
        load = self.tangential_load_world(t) if self._in_contact else Vec3(0.0, 0.0, 0.0)
        share = load.scaled(1.0 / n_contact)

        tips = forward_kinematics(self.model, q, hand_pose)
        noise = None
        if self.sensor.noise_std_mN > 0:
            noise = self._rng.normal(0.0, self.sensor.noise_std_mN, (len(self.model.fingers), 3))
        samples = []
        for i, finger in enumerate(self.model.fingers):
            if self._in_contact and finger.name in self.contact_fingers:
                local = tips[i].rotation.T @ share.as_array()
                fx, fy, fz = float(local[0]), float(local[1]), -self._fn_per
            else:
                fx = fy = fz = 0.0
            if noise is not None:
                fx += float(noise[i, 0])
                fy += float(noise[i, 1])
                fz += float(noise[i, 2])
            if self.sensor.quantization_mN > 0:
                step = self.sensor.quantization_mN
                fx = round(fx / step) * step
                fy = round(fy / step) * step
                fz = round(fz / step) * step
            samples.append(FingertipForce(finger.name, Vec3(fx, fy, fz), t))
        return samples

    def slip_step(self, t: float, dt: float) -> SimTick:
        """Evolve slip with the internals of the last contact_forces call."""
        fraction = self.lift_fraction(t)
        airborne = fraction > 0.0 and not self.obj.on_support and not self.obj.dropped
        fn_per_finger = [self._fn_per] * len(self.contact_fingers)
        if airborne:
            required = self.tangential_load_world(t).norm()
            slip_update(self.obj, fn_per_finger, required, dt)
        else:
            required = 0.0
            self.obj.slipping = False
            self.obj.held = self._in_contact and not self.obj.dropped
        tick = SimTick(
            t=t,
            fn_total_mN=self._fn_per * len(self.contact_fingers),
            ft_required_mN=required,
            lift_fraction=fraction,
            airborne=airborne,
            held=self.obj.held,
            slipping=self.obj.slipping,
            slip_accum_m=self.obj.slip_accum_m,
            status=self.obj.status,
        )
        self.trace.append(tick)
        return tick
