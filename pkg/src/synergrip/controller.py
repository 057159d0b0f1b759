"""Grasp-size force controller.

The controller regulates one scalar, the thumb-to-index grasp size, from
3-axis fingertip force readings:

* the desired normal force tracks the filtered tangential load (the
  object's weight share carried by friction) times a gain, plus a fixed
  contact offset;
* that desired force is used as a band [T_min, T_max] rather than a
  reference point, so in-band noise produces no command change at all;
* below the band the grasp tightens proportionally to the error, above
  it the grasp loosens, and a two-state machine (GRASP, RELEASE) opens
  the grasp once the net tangential load points against gravity for long
  enough, which is what a support surface or a receiving hand looks like
  from the fingertips.

All forces here are the non-negative magnitudes produced by
``units.decompose``; raw sensor sign conventions never reach this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from enum import Enum
from typing import NamedTuple, Sequence

from .filters import EmaFilter, mean_contact_force
from .hand import HandModel, JointConfiguration, world_tangential
from .units import ConfigError, FingertipForce, GraspContext, GraspType, Pose, Vec3, decompose


class Phase(Enum):
    GRASP = "GRASP"
    RELEASE = "RELEASE"


class LoadClass(Enum):
    GRAVITY = "gravity"
    SUPPORT = "support"


@dataclass
class ControllerParams:
    """Tuning constants for the grasp-size loop.

    ``K`` expresses the correction rate in the calibrated hardware-free
    unit; the size command moves by ``K * k_unit_scale`` meters per mN of
    force error per tick. At the defaults a 50 mN error moves the grasp
    0.5 mm per tick, which at 50 Hz closes an open hand in about two
    seconds.
    """

    gain_G: float = 2.0
    offset_mN: float = 50.0
    K: float = 100.0
    k_unit_scale: float = 1e-7
    band_width_mN: float = 50.0
    alpha_t: float = 0.7
    alpha_n: float = 0.5
    g_min: float = 0.02
    g_max: float = 0.12
    release_detach_mN: float = 5.0
    support_angle_deg: float = 90.0
    support_dwell_ticks: int = 5
    # Net tangential below this magnitude always classifies as gravity load;
    # an exactly-zero (or noise-level) tangential must not trigger release.
    support_min_tangential_mN: float = 20.0
    # False: filter per finger, then average. True: average raw, then filter.
    aggregate_first: bool = False

    def __post_init__(self):
        if self.offset_mN < 0:
            raise ConfigError("offset_mN must be >= 0")
        if not self.K > 0:
            raise ConfigError("K must be > 0")
        if not self.k_unit_scale > 0:
            raise ConfigError("k_unit_scale must be > 0")
        if not self.band_width_mN > 0:
            raise ConfigError("band_width_mN must be > 0")
        for name in ("alpha_t", "alpha_n"):
            a = getattr(self, name)
            if not 0.0 < a < 1.0:
                raise ConfigError(f"{name} must lie strictly inside (0, 1)")
        if not self.g_min < self.g_max:
            raise ConfigError("g_min must be < g_max")
        if self.release_detach_mN < 0:
            raise ConfigError("release_detach_mN must be >= 0")
        if not isinstance(self.support_dwell_ticks, int) or self.support_dwell_ticks < 1:
            raise ConfigError("support_dwell_ticks must be an integer >= 1")
        if self.support_min_tangential_mN < 0:
            raise ConfigError("support_min_tangential_mN must be >= 0")

    @property
    def k_scale_m_per_mN(self) -> float:
        return self.K * self.k_unit_scale

    @staticmethod
    def from_dict(data: dict) -> "ControllerParams":
        known = {f.name for f in fields(ControllerParams)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown controller parameter(s): {sorted(unknown)}")
        return ControllerParams(**data)


def desired_force(params: ControllerParams, f_t_filtered: float) -> float:
    """Lower force threshold T_min = gain_G * f_t + offset, mN."""
    if f_t_filtered < 0:
        raise ValueError("filtered tangential force must be >= 0")
    return params.gain_G * f_t_filtered + params.offset_mN


class GraspStep(NamedTuple):
    g_size: float
    t_min: float
    t_max: float
    clamped: bool


def grasp_step(params: ControllerParams, g_size: float, f_n_agg: float, f_t_agg: float) -> GraspStep:
    """One deadband update of the grasp size during the GRASP phase.

    Below the band the grasp tightens, above it it loosens, inside it the
    command is left exactly unchanged (band boundaries count as inside).
    The result is clamped to [g_min, g_max] and clamping is flagged.
    """
    t_min = desired_force(params, f_t_agg)
    t_max = t_min + params.band_width_mN
    k = params.k_scale_m_per_mN
    new_size = g_size
    if f_n_agg < t_min:
        new_size = g_size - k * (t_min - f_n_agg)
    elif f_n_agg > t_max:
        new_size = g_size + k * (f_n_agg - t_max)
    clamped = new_size < params.g_min or new_size > params.g_max
    new_size = min(params.g_max, max(params.g_min, new_size))
    return GraspStep(new_size, t_min, t_max, clamped)


class ReleaseStep(NamedTuple):
    g_size: float
    clamped: bool


def release_step(params: ControllerParams, g_size: float, f_n_agg: float) -> ReleaseStep:
    """One opening update during RELEASE: monotone non-decreasing in g_size."""
    new_size = g_size + params.k_scale_m_per_mN * max(0.0, f_n_agg)
    clamped = new_size > params.g_max
    return ReleaseStep(min(params.g_max, new_size), clamped)


def classify_load(
    net_tangential: Vec3,
    gravity_dir: Vec3,
    *,
    angle_deg: float = 90.0,
    min_tangential_mN: float = 0.0,
) -> LoadClass:
    """Decide whether the net tangential load is gravity or a support push.

    The angle between the net world tangential and the gravity direction
    decides: within ``angle_deg`` it is the object's weight pulling down
    (keep grasping), beyond it something is pushing the object up (a
    support surface or a receiving hand). A vanishing net tangential,
    where the angle is undefined, classifies as gravity so the grasp is
    never released before any load exists.
    """
    g_norm = gravity_dir.norm()
    if abs(g_norm - 1.0) > 1e-6:
        raise ValueError("gravity_dir must be a unit vector")
    magnitude = net_tangential.norm()
    if magnitude <= min_tangential_mN or magnitude == 0.0:
        return LoadClass.GRAVITY
    cos_angle = net_tangential.dot(gravity_dir) / magnitude
    angle = math.degrees(math.acos(min(1.0, max(-1.0, cos_angle))))
    return LoadClass.SUPPORT if angle > angle_deg else LoadClass.GRAVITY


@dataclass
class ControllerState:
    """Mutable per-episode controller state."""

    phase: Phase
    g_size: float
    support_evidence_ticks: int = 0
    detach_evidence_ticks: int = 0
    detached: bool = False
    tick_index: int = 0
    last_thresholds: tuple[float, float] = (float("nan"), float("nan"))


@dataclass(frozen=True)
class TelemetryRecord:
    """Every intermediate quantity of one control tick."""

    t: float
    phase: str
    fn_raw: dict[str, float]
    ft_raw: dict[str, float]
    fn_filt_agg: float
    ft_filt_agg: float
    t_min: float
    t_max: float
    g_size: float
    load_class: str
    clamped: bool
    error: str = ""


def default_contact_fingers(model: HandModel, grasp_type: GraspType) -> tuple[str, ...]:
    """Fingers expected in contact for a grasp type (pinch: thumb+index only)."""
    if grasp_type is GraspType.PINCH:
        return (model.finger_by_tag("THUMB").name, model.finger_by_tag("INDEX").name)
    return model.finger_names


class _TickRejected(Exception):
    pass


class GripController:
    """Ties the per-tick pipeline together for one episode.

    Single-owner: ``tick`` must be called serially. Feed it one sample per
    model fingertip each tick, the hand pose in the world frame, and the
    posture the hand is currently commanded to (its fingertip rotations
    turn local tangentials into world vectors).
    """

    def __init__(
        self,
        params: ControllerParams,
        model: HandModel,
        grasp_type: GraspType,
        *,
        contact_fingers: Sequence[str] | None = None,
        gravity_dir: Vec3 = Vec3(0.0, 0.0, -1.0),
    ):
        self.params = params
        self.model = model
        self.grasp_type = grasp_type
        if contact_fingers is None:
            contact_fingers = default_contact_fingers(model, grasp_type)
        unknown = set(contact_fingers) - set(model.finger_names)
        if unknown:
            raise ConfigError(f"contact fingers not in model: {sorted(unknown)}")
        if not contact_fingers:
            raise ConfigError("contact finger set must not be empty")
        self.contact_fingers = tuple(contact_fingers)
        self.gravity_dir = gravity_dir
        self.state = ControllerState(phase=Phase.GRASP, g_size=params.g_max)
        self._filters_n: dict[str, EmaFilter] = {}
        self._filters_t: dict[str, EmaFilter] = {}
        self._agg_filter_n = EmaFilter(params.alpha_n)
        self._agg_filter_t = EmaFilter(params.alpha_t)
        for name in self.contact_fingers:
            self._filters_n[name] = EmaFilter(params.alpha_n)
            self._filters_t[name] = EmaFilter(params.alpha_t)
        self._last_stamp: dict[str, float] = {}

    def reset(self) -> None:
        """Re-arm for a new episode: GRASP phase, fully open, filters cleared."""
        self.state = ControllerState(phase=Phase.GRASP, g_size=self.params.g_max)
        for filt in self._filters_n.values():
            filt.reset()
        for filt in self._filters_t.values():
            filt.reset()
        self._agg_filter_n.reset()
        self._agg_filter_t.reset()
        self._last_stamp.clear()

    def _validate(self, forces: Sequence[FingertipForce]) -> dict[str, FingertipForce]:
        by_id: dict[str, FingertipForce] = {}
        for sample in forces:
            if sample.fingertip_id in by_id:
                raise _TickRejected(f"duplicate sample for fingertip {sample.fingertip_id!r}")
            by_id[sample.fingertip_id] = sample
        expected = set(self.model.finger_names)
        if set(by_id) != expected:
            raise _TickRejected(
                f"sensor set mismatch: got {sorted(by_id)}, model has {sorted(expected)}"
            )
        for name, sample in by_id.items():
            if not sample.raw.is_finite() or not math.isfinite(sample.timestamp_s):
                raise _TickRejected(f"non-finite sample from fingertip {name!r}")
            last = self._last_stamp.get(name)
            if last is not None and sample.timestamp_s < last:
                raise _TickRejected(
                    f"timestamp regression on fingertip {name!r}: {sample.timestamp_s} < {last}"
                )
        return by_id

    def _error_record(self, t: float, message: str) -> TelemetryRecord:
        nan = float("nan")
        return TelemetryRecord(
            t=t,
            phase=self.state.phase.value,
            fn_raw={name: nan for name in self.model.finger_names},
            ft_raw={name: nan for name in self.model.finger_names},
            fn_filt_agg=nan,
            ft_filt_agg=nan,
            t_min=nan,
            t_max=nan,
            g_size=self.state.g_size,
            load_class="error",
            clamped=False,
            error=message,
        )

    def tick(
        self,
        forces: Sequence[FingertipForce],
        hand_pose: Pose,
        q: JointConfiguration,
    ) -> tuple[GraspContext, TelemetryRecord]:
        """Run one control step and return the new grasp command.

        On a rejected sensor set the state is left untouched and an error
        telemetry row is returned alongside the unchanged command.
        """
        t = forces[0].timestamp_s if forces else float("nan")
        try:
            by_id = self._validate(forces)
        except _TickRejected as exc:
            return (
                GraspContext(self.grasp_type, self.state.g_size),
                self._error_record(t, str(exc)),
            )
        for name, sample in by_id.items():
            self._last_stamp[name] = sample.timestamp_s

        fn_raw: dict[str, float] = {}
        ft_raw: dict[str, float] = {}
        for name in self.model.finger_names:
            f_n, _, f_t = decompose(by_id[name])
            fn_raw[name] = f_n
            ft_raw[name] = f_t

        if self.params.aggregate_first:
            f_n_agg = self._agg_filter_n.update(
                mean_contact_force([fn_raw[n] for n in self.contact_fingers])
            )
            f_t_agg = self._agg_filter_t.update(
                mean_contact_force([ft_raw[n] for n in self.contact_fingers])
            )
        else:
            f_n_agg = mean_contact_force(
                [self._filters_n[n].update(fn_raw[n]) for n in self.contact_fingers]
            )
            f_t_agg = mean_contact_force(
                [self._filters_t[n].update(ft_raw[n]) for n in self.contact_fingers]
            )

        net_t = world_tangential(
            self.model, q, hand_pose, [by_id[n] for n in self.contact_fingers]
        )
        load = classify_load(
            net_t,
            self.gravity_dir,
            angle_deg=self.params.support_angle_deg,
            min_tangential_mN=self.params.support_min_tangential_mN,
        )

        st = self.state
        if st.phase is Phase.GRASP:
            if load is LoadClass.SUPPORT:
                st.support_evidence_ticks += 1
                if st.support_evidence_ticks >= self.params.support_dwell_ticks:
                    st.phase = Phase.RELEASE
            else:
                st.support_evidence_ticks = 0

        if st.phase is Phase.GRASP:
            step = grasp_step(self.params, st.g_size, f_n_agg, f_t_agg)
            st.g_size = step.g_size
            t_min, t_max, clamped = step.t_min, step.t_max, step.clamped
        else:
            rel = release_step(self.params, st.g_size, f_n_agg)
            st.g_size = rel.g_size
            clamped = rel.clamped
            # Thresholds stay on the telemetry during release for plot continuity.
            t_min = desired_force(self.params, f_t_agg)
            t_max = t_min + self.params.band_width_mN
            if not st.detached:
                if f_n_agg < self.params.release_detach_mN:
                    st.detach_evidence_ticks += 1
                    if st.detach_evidence_ticks >= self.params.support_dwell_ticks:
                        st.detached = True
                else:
                    st.detach_evidence_ticks = 0

        st.last_thresholds = (t_min, t_max)
        st.tick_index += 1

        record = TelemetryRecord(
            t=t,
            phase=st.phase.value,
            fn_raw=fn_raw,
            ft_raw=ft_raw,
            fn_filt_agg=f_n_agg,
            ft_filt_agg=f_t_agg,
            t_min=t_min,
            t_max=t_max,
            g_size=st.g_size,
            load_class=load.value,
            clamped=clamped,
        )
        return GraspContext(self.grasp_type, st.g_size), record
