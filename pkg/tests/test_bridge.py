from __future__ import annotations

import json
import socket
import threading

import pytest

from synergrip.bridge import (
    BridgeServer,
    encode_frame,
    pose_from_wire,
    pose_to_wire,
    replay_sensor_csv,
)
from synergrip.controller import ControllerParams
from synergrip.report import write_sensor_csv
from synergrip.scenario import run_from_recording
from synergrip.units import FingertipForce, GraspType, Pose, Vec3


@pytest.fixture()
def params():
    # Narrow travel so a short zero-force stream reaches the lower clamp.
    return ControllerParams(g_min=0.11, g_max=0.12)


@pytest.fixture()
def server(params, model, decoder):
    srv = BridgeServer(params, model, decoder, GraspType.TRIPOD)
    thread = threading.Thread(target=srv.serve_once)
    thread.start()
    yield srv
    thread.join(timeout=10)
    srv.close()


def zero_rows(model, n):
    rows = []
    for i in range(n):
        t = i * 0.02
        forces = [FingertipForce(name, Vec3(0, 0, 0), t) for name in model.finger_names]
        rows.append((t, Pose.identity(), forces))
    return rows


def test_pose_wire_roundtrip():
    pose = Pose([[0, -1, 0], [1, 0, 0], [0, 0, 1]], Vec3(0.1, -0.2, 0.3))
    back = pose_from_wire(pose_to_wire(pose))
    assert back.translation == pose.translation
    assert (back.rotation == pose.rotation).all()


def test_zero_force_stream_closes_until_clamp(server, params, model, decoder, tmp_path):
    rows = zero_rows(model, 40)
    csv = tmp_path / "sensors.csv"
    write_sensor_csv(csv, rows, model.finger_names)
    host, port = server.address
    commands = replay_sensor_csv(csv, host, port)
    assert len(commands) == len(rows)
    sizes = [c["grasp_size_m"] for c in commands]
    # strictly decreasing until the clamp, then pinned at g_min
    clamp_at = sizes.index(params.g_min)
    head = [params.g_max] + sizes[: clamp_at + 1]
    assert all(b < a for a, b in zip(head, head[1:]))
    assert all(s == params.g_min for s in sizes[clamp_at:])
    assert [len(c["joint_angles"]) for c in commands] == [model.joint_count] * len(rows)


def test_bridge_matches_local_controller(server, params, model, decoder, tmp_path):
    rows = zero_rows(model, 30)
    csv = tmp_path / "sensors.csv"
    write_sensor_csv(csv, rows, model.finger_names)
    host, port = server.address
    commands = replay_sensor_csv(csv, host, port)
    local = run_from_recording(rows, params, model, decoder, GraspType.TRIPOD)
    assert [c["grasp_size_m"] for c in commands] == local


def _sensor_payload(model, t, seq):
    return encode_frame(
        "sensor",
        seq,
        {
            "t": t,
            "hand_pose": pose_to_wire(Pose.identity()),
            "fingertips": [
                {"id": name, "fx": 0.0, "fy": 0.0, "fz": 0.0} for name in model.finger_names
            ],
        },
    )


def test_session_survives_malformed_and_drops_stale_frames(server, model):
    host, port = server.address
    with socket.create_connection((host, port), timeout=10) as conn:
        reader = conn.makefile("r", encoding="utf-8", newline="\n")

        conn.sendall(encode_frame("hello", 0, {}))
        hello = json.loads(reader.readline())
        assert hello["kind"] == "hello"
        assert hello["payload"]["fingers"] == list(model.finger_names)

        conn.sendall(b"this is not json\n")
        err = json.loads(reader.readline())
        assert err["kind"] == "error"

        conn.sendall(_sensor_payload(model, 0.0, 1))
        cmd = json.loads(reader.readline())
        assert cmd["kind"] == "command"
        assert cmd["seq"] == 1

        # stale seq: dropped without a reply; the next fresh frame answers
        conn.sendall(_sensor_payload(model, 0.02, 1))
        conn.sendall(_sensor_payload(model, 0.04, 2))
        cmd2 = json.loads(reader.readline())
        assert cmd2["kind"] == "command"
        assert cmd2["seq"] == 2

        # bad payload: error frame, session continues
        conn.sendall(encode_frame("sensor", 3, {"t": 0.06}))
        err2 = json.loads(reader.readline())
        assert err2["kind"] == "error"

        conn.sendall(_sensor_payload(model, 0.08, 4))
        cmd3 = json.loads(reader.readline())
        assert cmd3["kind"] == "command" and cmd3["seq"] == 4


def test_one_command_per_accepted_sensor_frame(server, model, decoder, tmp_path):
    rows = zero_rows(model, 10)
    csv = tmp_path / "sensors.csv"
    write_sensor_csv(csv, rows, model.finger_names)
    host, port = server.address
    commands = replay_sensor_csv(csv, host, port)
    assert len(commands) == 10
