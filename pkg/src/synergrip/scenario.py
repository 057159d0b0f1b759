"""Scenario scripts and the seeded episode loop.

A scenario is a JSON document (schema "scenario/1") that fully determines
a run: object and sensor properties, controller parameters, grasp type,
a keyframed hand-pose timeline and a timed event list. Episodes step the
contact simulation and the controller in lockstep at the scripted rate,
persist telemetry plus a summary, and judge the script's expectations.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .controller import ControllerParams, GripController, TelemetryRecord
from .hand import HandModel, default_hand_model, rpy_to_matrix
from .report import (
    render_episode_figure,
    write_sensor_csv,
    write_summary_json,
    write_telemetry_csv,
)
from .sim import (
    AddMassEvent,
    ContactSim,
    Event,
    LiftEvent,
    MoveEvent,
    PullUpEvent,
    ResetEvent,
    SensorModel,
    SimObject,
    SimTick,
    SupportContactEvent,
)
from .units import ConfigError, FingertipForce, GraspContext, GraspType, Pose, Vec3

log = logging.getLogger("synergrip.scenario")

SCENARIO_SCHEMA = "scenario/1"

_EXPECT_KEYS = {
    "never_dropped",
    "max_slip_m",
    "phase_transitions",
    "final_status",
    "release_monotone",
    "detached",
    "no_slip_ticks",
    "tail_g_constant_ticks",
}


@dataclass(frozen=True)
class Keyframe:
    t_s: float
    pose: Pose


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    duration_s: float
    tick_hz: float
    seed: int
    grasp_type: GraspType
    object_config: dict
    sensor_config: dict
    controller: ControllerParams
    keyframes: tuple[Keyframe, ...]
    events: tuple[Event, ...]
    expect: dict
    source: str = ""

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration_s * self.tick_hz))


# --- pose timeline -----------------------------------------------------------


def _quat_from_matrix(r: np.ndarray) -> np.ndarray:
    """Unit quaternion [w, x, y, z] from a proper rotation matrix."""
    trace = r[0, 0] + r[1, 1] + r[2, 2]
    if trace > 0:
        s = math.sqrt(trace + 1.0) * 2
        w = 0.25 * s
        x = (r[2, 1] - r[1, 2]) / s
        y = (r[0, 2] - r[2, 0]) / s
        z = (r[1, 0] - r[0, 1]) / s
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2
        w = (r[2, 1] - r[1, 2]) / s
        x = 0.25 * s
        y = (r[0, 1] + r[1, 0]) / s
        z = (r[0, 2] + r[2, 0]) / s
    elif r[1, 1] > r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2
        w = (r[0, 2] - r[2, 0]) / s
        x = (r[0, 1] + r[1, 0]) / s
        y = 0.25 * s
        z = (r[1, 2] + r[2, 1]) / s
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2
        w = (r[1, 0] - r[0, 1]) / s
        x = (r[0, 2] + r[2, 0]) / s
        y = (r[1, 2] + r[2, 1]) / s
        z = 0.25 * s
    q = np.array([w, x, y, z])
    return q / np.linalg.norm(q)


def _matrix_from_quat(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def _slerp(r0: np.ndarray, r1: np.ndarray, u: float) -> np.ndarray:
    q0 = _quat_from_matrix(r0)
    q1 = _quat_from_matrix(r1)
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1, dot = -q1, -dot
    if dot > 0.9995:
        q = q0 + u * (q1 - q0)
    else:
        theta = math.acos(min(1.0, dot))
        q = (math.sin((1 - u) * theta) * q0 + math.sin(u * theta) * q1) / math.sin(theta)
    return _matrix_from_quat(q)


def interpolate_pose(keyframes: Sequence[Keyframe], t: float) -> Pose:
    """Linear position interpolation with slerp on rotations; clamped at the ends."""
    if not keyframes:
        return Pose.identity()
    if t <= keyframes[0].t_s:
        return keyframes[0].pose
    if t >= keyframes[-1].t_s:
        return keyframes[-1].pose
    for a, b in zip(keyframes, keyframes[1:]):
        if a.t_s <= t <= b.t_s:
            span = b.t_s - a.t_s
            u = 0.0 if span <= 0 else (t - a.t_s) / span
            pa, pb = a.pose.translation.as_array(), b.pose.translation.as_array()
            rot = _slerp(a.pose.rotation, b.pose.rotation, u)
            return Pose(rot, Vec3.from_array(pa + u * (pb - pa)))
    return keyframes[-1].pose


# --- script loading ----------------------------------------------------------

_EVENT_BUILDERS = {
    "lift": lambda t, p: LiftEvent(t_s=t, ramp_s=float(p.get("ramp_s", 1.0))),
    "move": lambda t, p: MoveEvent(
        t_s=t,
        magnitude_mN=float(p["magnitude_mN"]),
        duration_s=float(p.get("duration_s", 0.5)),
        direction=Vec3(*[float(v) for v in p.get("direction", [1, 0, 0])]),
    ),
    "add_mass": lambda t, p: AddMassEvent(t_s=t, mass_kg=float(p["mass_kg"])),
    "support_contact": lambda t, p: SupportContactEvent(t_s=t, push_mN=float(p.get("push_mN", 200.0))),
    "pull_up": lambda t, p: PullUpEvent(t_s=t, force_mN=float(p["force_mN"])),
    "reset": lambda t, p: ResetEvent(t_s=t),
}


def _script_from_dict(data: dict, source: str, errors: list[str]) -> ScenarioScript | None:
    def fail(msg: str):
        errors.append(msg)

    if not isinstance(data, dict):
        fail("scenario: expected a JSON object")
        return None
    if data.get("schema") != SCENARIO_SCHEMA:
        fail(f"schema: must be {SCENARIO_SCHEMA!r}, got {data.get('schema')!r}")
    name = data.get("name")
    if not isinstance(name, str) or not name:
        fail("name: required non-empty string")
        name = "unnamed"
    duration = data.get("duration_s")
    if not isinstance(duration, (int, float)) or not duration > 0:
        fail("duration_s: must be > 0")
        duration = 1.0
    tick_hz = data.get("tick_hz", 50.0)
    if not isinstance(tick_hz, (int, float)) or not tick_hz > 0:
        fail("tick_hz: must be > 0")
        tick_hz = 50.0
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        fail("seed: must be an integer")
        seed = 0
    grasp_type = GraspType.TRIPOD
    try:
        grasp_type = GraspType.parse(data.get("grasp_type", "tripod"))
    except ValueError as exc:
        fail(f"grasp_type: {exc}")

    object_config = data.get("object")
    if not isinstance(object_config, dict):
        fail("object: required object with mass_kg, width_m, mu")
        object_config = {"mass_kg": 0.1, "width_m": 0.06, "mu": 0.8}
    else:
        try:
            SimObject(**object_config)
        except (ConfigError, TypeError) as exc:
            fail(f"object: {exc}")

    sensor_config = data.get("sensor", {})
    if not isinstance(sensor_config, dict):
        fail("sensor: must be an object")
        sensor_config = {}
    else:
        try:
            SensorModel(rate_hz=tick_hz, seed=seed, **sensor_config)
        except (ConfigError, TypeError) as exc:
            fail(f"sensor: {exc}")

    controller = ControllerParams()
    ctrl_cfg = data.get("controller", {})
    if not isinstance(ctrl_cfg, dict):
        fail("controller: must be an object")
    else:
        try:
            controller = ControllerParams.from_dict(ctrl_cfg)
        except (ConfigError, TypeError) as exc:
            fail(f"controller: {exc}")

    keyframes: list[Keyframe] = []
    raw_frames = data.get("hand_pose", [])
    if not isinstance(raw_frames, list):
        fail("hand_pose: must be a list of keyframes")
        raw_frames = []
    for i, kf in enumerate(raw_frames):
        where = f"hand_pose[{i}]"
        if not isinstance(kf, dict):
            fail(f"{where}: expected an object")
            continue
        try:
            t_s = float(kf["t_s"])
            pos = [float(v) for v in kf.get("position", [0, 0, 0])]
            rpy = [float(v) for v in kf.get("rpy", [0, 0, 0])]
            pose = Pose(rpy_to_matrix(*rpy), Vec3(*pos))
            keyframes.append(Keyframe(t_s=t_s, pose=pose))
        except (KeyError, TypeError, ValueError) as exc:
            fail(f"{where}: {exc}")
    if any(b.t_s < a.t_s for a, b in zip(keyframes, keyframes[1:])):
        fail("hand_pose: keyframes must be time-sorted")

    events: list[Event] = []
    raw_events = data.get("events", [])
    if not isinstance(raw_events, list):
        fail("events: must be a list")
        raw_events = []
    for i, ev in enumerate(raw_events):
        where = f"events[{i}]"
        if not isinstance(ev, dict):
            fail(f"{where}: expected an object")
            continue
        kind = ev.get("kind")
        if kind not in _EVENT_BUILDERS:
            fail(f"{where}: unknown event kind {kind!r}")
            continue
        try:
            t_s = float(ev["t_s"])
        except (KeyError, TypeError, ValueError):
            fail(f"{where}: t_s required")
            continue
        if not 0.0 <= t_s <= duration:
            fail(f"{where}: t_s {t_s} outside [0, {duration}]")
        try:
            events.append(_EVENT_BUILDERS[kind](t_s, ev))
        except (KeyError, TypeError, ValueError) as exc:
            fail(f"{where}: {exc}")

    expect = data.get("expect", {})
    if not isinstance(expect, dict):
        fail("expect: must be an object")
        expect = {}
    unknown = set(expect) - _EXPECT_KEYS
    if unknown:
        fail(f"expect: unknown key(s) {sorted(unknown)}")

    return ScenarioScript(
        name=name,
        duration_s=float(duration),
        tick_hz=float(tick_hz),
        seed=seed,
        grasp_type=grasp_type,
        object_config=dict(object_config),
        sensor_config=dict(sensor_config),
        controller=controller,
        keyframes=tuple(sorted(keyframes, key=lambda k: k.t_s)),
        events=tuple(sorted(events, key=lambda e: e.t_s)),
        expect=dict(expect),
        source=source,
    )


def validate_script(path: str | Path) -> list[str]:
    """Structural and invariant checks; returns human-readable errors."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        return [f"cannot read scenario {path}: {exc}"]
    errors: list[str] = []
    _script_from_dict(data, str(path), errors)
    return errors


def load_script(path: str | Path) -> ScenarioScript:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from None
    errors: list[str] = []
    script = _script_from_dict(data, str(path), errors)
    if errors or script is None:
        raise ConfigError(f"invalid scenario {path}:\n  " + "\n  ".join(errors))
    return script


# --- episode loop ------------------------------------------------------------


@dataclass
class EpisodeReport:
    """Everything an episode produced, in memory plus file paths."""

    name: str
    verdict: bool
    criteria: dict[str, bool]
    final_status: str
    slip_max_m: float
    phase_changes: list[tuple[float, str]]
    detached: bool
    stages: dict[str, tuple[float, float]]
    telemetry_path: Path | None
    summary_path: Path | None
    figure_path: Path | None
    sensor_log_path: Path | None
    records: list[TelemetryRecord] = field(default_factory=list)
    sim_trace: list[SimTick] = field(default_factory=list)
    grasp_sizes: list[float] = field(default_factory=list)
    runtime_s: float = 0.0


def _evaluate_expectations(
    expect: dict,
    records: list[TelemetryRecord],
    trace: list[SimTick],
    final_status: str,
    detached: bool,
) -> dict[str, bool]:
    criteria: dict[str, bool] = {}
    slip_max = max((s.slip_accum_m for s in trace), default=0.0)
    transitions = sum(
        1 for a, b in zip(records, records[1:]) if a.phase == "GRASP" and b.phase == "RELEASE"
    )
    if "never_dropped" in expect:
        criteria["never_dropped"] = (not any(s.status == "dropped" for s in trace)) == bool(
            expect["never_dropped"]
        )
    if "max_slip_m" in expect:
        criteria["max_slip_m"] = slip_max <= float(expect["max_slip_m"])
    if "phase_transitions" in expect:
        criteria["phase_transitions"] = transitions == int(expect["phase_transitions"])
    if "final_status" in expect:
        criteria["final_status"] = final_status == expect["final_status"]
    if "release_monotone" in expect:
        gs = [r.g_size for r in records if r.phase == "RELEASE"]
        monotone = all(b >= a for a, b in zip(gs, gs[1:]))
        criteria["release_monotone"] = monotone == bool(expect["release_monotone"])
    if "detached" in expect:
        criteria["detached"] = detached == bool(expect["detached"])
    if "no_slip_ticks" in expect:
        criteria["no_slip_ticks"] = (not any(s.slipping for s in trace)) == bool(
            expect["no_slip_ticks"]
        )
    if "tail_g_constant_ticks" in expect:
        n = int(expect["tail_g_constant_ticks"])
        tail = [r.g_size for r in records[-n:]]
        criteria["tail_g_constant_ticks"] = len(tail) == n and len(set(tail)) == 1
    return criteria


def _detect_stages(script: ScenarioScript, records: list[TelemetryRecord]) -> dict[str, tuple[float, float]]:
    """Grasp/lift/transport/release boundaries from events and phase changes."""
    end = script.duration_s
    stages: dict[str, tuple[float, float]] = {}
    lift = next((e for e in script.events if isinstance(e, LiftEvent)), None)
    release_t = next(
        (b.t for a, b in zip(records, records[1:]) if a.phase == "GRASP" and b.phase == "RELEASE"),
        None,
    )
    grasp_end = lift.t_s if lift else (release_t if release_t is not None else end)
    stages["grasp"] = (0.0, grasp_end)
    if lift:
        lift_end = min(end, lift.t_s + lift.ramp_s)
        stages["lift"] = (lift.t_s, lift_end)
        stages["transport"] = (lift_end, release_t if release_t is not None else end)
    if release_t is not None:
        stages["release"] = (release_t, end)
    return stages


def run_episode(
    script: ScenarioScript,
    out_dir: str | Path | None,
    *,
    model: HandModel | None = None,
    decoder=None,
    seed: int | None = None,
    grasp_type: GraspType | None = None,
    plot: bool = False,
    record_sensors: bool = False,
) -> EpisodeReport:
    """Run one seeded episode and persist its outputs.

    ``out_dir`` may be None to skip all file output (library use). The
    run is deterministic: script plus seed fixes every byte of telemetry.
    """
    from .synergy import default_synergy  # local import to avoid a cycle at import time

    start = time.perf_counter()
    if model is None:
        model = default_hand_model()
    if decoder is None:
        decoder = default_synergy(model)
    gtype = grasp_type if grasp_type is not None else script.grasp_type
    params = script.controller
    use_seed = script.seed if seed is None else seed

    obj = SimObject(**script.object_config)
    sensor = SensorModel(rate_hz=script.tick_hz, seed=use_seed, **script.sensor_config)
    sim = ContactSim(obj, sensor, model, decoder, gtype)
    controller = GripController(params, model, gtype)

    n_ticks = script.n_ticks
    dt = 1.0 / script.tick_hz
    pending = list(script.events)
    records: list[TelemetryRecord] = []
    sensor_rows: list[tuple[float, Pose, list[FingertipForce]]] = []
    grasp_sizes: list[float] = []
    ctx = GraspContext(gtype, controller.state.g_size)

    for i in range(n_ticks):
        t = i * dt
        while pending and pending[0].t_s <= t:
            event = pending.pop(0)
            log.debug("t=%.3f applying event %r", t, event)
            if isinstance(event, ResetEvent):
                controller.reset()
                ctx = GraspContext(gtype, controller.state.g_size)
            sim.apply_event(event)
        pose = interpolate_pose(script.keyframes, t)
        forces = sim.contact_forces(t, ctx, pose)
        q = decoder.decode(ctx).joints
        ctx, record = controller.tick(forces, pose, q)
        if record.error:
            log.warning("t=%.3f tick error: %s", t, record.error)
        sim.slip_step(t, dt)
        records.append(record)
        grasp_sizes.append(ctx.grasp_size_m)
        if record_sensors:
            sensor_rows.append((t, pose, forces))

    final_status = obj.status
    detached = controller.state.detached
    criteria = _evaluate_expectations(script.expect, records, sim.trace, final_status, detached)
    verdict = all(criteria.values())
    stages = _detect_stages(script, records)
    slip_max = max((s.slip_accum_m for s in sim.trace), default=0.0)
    phase_changes = [(records[0].t, records[0].phase)] if records else []
    for a, b in zip(records, records[1:]):
        if a.phase != b.phase:
            phase_changes.append((b.t, b.phase))

    telemetry_path = summary_path = figure_path = sensor_log_path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        telemetry_path = out / "telemetry.csv"
        write_telemetry_csv(telemetry_path, records, model.finger_names)
        if record_sensors:
            sensor_log_path = out / "sensors.csv"
            write_sensor_csv(sensor_log_path, sensor_rows, model.finger_names)
        if plot:
            figure_path = out / "signals.png"
            render_episode_figure(figure_path, records, stages, title=script.name)
        summary_path = out / "summary.json"

    runtime = time.perf_counter() - start
    report = EpisodeReport(
        name=script.name,
        verdict=verdict,
        criteria=criteria,
        final_status=final_status,
        slip_max_m=slip_max,
        phase_changes=phase_changes,
        detached=detached,
        stages=stages,
        telemetry_path=telemetry_path,
        summary_path=summary_path,
        figure_path=figure_path,
        sensor_log_path=sensor_log_path,
        records=records,
        sim_trace=sim.trace,
        grasp_sizes=grasp_sizes,
        runtime_s=runtime,
    )
    if summary_path is not None:
        write_summary_json(
            summary_path,
            {
                "name": script.name,
                "verdict": "pass" if verdict else "fail",
                "criteria": criteria,
                "final_status": final_status,
                "slip_max_m": slip_max,
                "detached": detached,
                "phase_changes": [{"t": t, "phase": p} for t, p in phase_changes],
                "stages": {k: list(v) for k, v in stages.items()},
                "seed": use_seed,
                "grasp_type": gtype.value,
                "ticks": n_ticks,
                "telemetry": str(telemetry_path),
                "figure": str(figure_path) if figure_path else None,
                "sensors": str(sensor_log_path) if sensor_log_path else None,
                "runtime_s": runtime,
            },
        )
    log.info("episode %s: %s (%.2fs, %d ticks)", script.name, "pass" if verdict else "fail", runtime, n_ticks)
    return report


def run_from_recording(
    rows: Sequence[tuple[float, Pose, Sequence[FingertipForce]]],
    params: ControllerParams,
    model: HandModel,
    decoder,
    grasp_type: GraspType,
) -> list[float]:
    """Drive the controller from a recorded sensor stream; returns grasp sizes.

    This is the local twin of feeding the same recording through the wire
    bridge: identical inputs must produce the identical command sequence.
    """
    controller = GripController(params, model, grasp_type)
    ctx = GraspContext(grasp_type, controller.state.g_size)
    sizes: list[float] = []
    for _t, pose, forces in rows:
        q = decoder.decode(ctx).joints
        ctx, _record = controller.tick(forces, pose, q)
        sizes.append(ctx.grasp_size_m)
    return sizes


def with_param(script: ScenarioScript, name: str, value: float) -> ScenarioScript:
    """Copy of the script with one controller parameter replaced."""
    if not hasattr(script.controller, name):
        raise ConfigError(f"unknown controller parameter {name!r}")
    if name == "support_dwell_ticks":
        value = int(value)
    new_params = replace(script.controller, **{name: value})
    return replace(script, controller=new_params)
