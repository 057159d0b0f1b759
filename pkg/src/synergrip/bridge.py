"""Hardware-in-the-loop bridge: sensor frames in, grasp commands out.

Wire format: newline-delimited JSON over a TCP stream, UTF-8, one frame
per line. Frame kinds:

    hello   {"kind": "hello", "seq": n, "payload": {...}}
    sensor  {"kind": "sensor", "seq": n, "payload": {"t": s,
              "hand_pose": {"rotation": [9 row-major], "translation": [3]},
              "fingertips": [{"id": name, "fx": mN, "fy": mN, "fz": mN}, ...]}}
    command {"kind": "command", "seq": n, "payload": {"t": s,
              "grasp_type": label, "grasp_size_m": m, "joint_angles": [rad]}}
    error   {"kind": "error", "seq": n, "payload": {"message": str}}

The peer owns the clock; the controller uses frame timestamps. Sensor
seq numbers must be strictly increasing; each accepted sensor frame
produces exactly one command frame echoing its seq. Malformed frames get
an error frame and the session continues; out-of-order frames are
dropped. One session is served at a time.
"""

from __future__ import annotations

import json
import logging
import socket
from dataclasses import dataclass

from .controller import ControllerParams, GripController
from .hand import HandModel
from .units import FingertipForce, GraspContext, GraspType, Pose, Vec3

log = logging.getLogger("synergrip.bridge")

PROTOCOL = "grip-bridge/1"


@dataclass
class SessionStats:
    sensors_accepted: int = 0
    commands_sent: int = 0
    malformed: int = 0
    dropped: int = 0


def encode_frame(kind: str, seq: int, payload: dict) -> bytes:
    return (json.dumps({"kind": kind, "seq": seq, "payload": payload}) + "\n").encode("utf-8")


def pose_to_wire(pose: Pose) -> dict:
    return {
        "rotation": [float(v) for v in pose.rotation.reshape(-1)],
        "translation": [pose.translation.x, pose.translation.y, pose.translation.z],
    }


def pose_from_wire(data: dict) -> Pose:
    rot = data["rotation"]
    if len(rot) != 9:
        raise ValueError("hand_pose.rotation must hold 9 row-major values")
    tr = data["translation"]
    return Pose(
        [[float(rot[3 * i + j]) for j in range(3)] for i in range(3)],
        Vec3(float(tr[0]), float(tr[1]), float(tr[2])),
    )


def _parse_sensor_payload(payload: dict) -> tuple[float, Pose, list[FingertipForce]]:
    t = float(payload["t"])
    pose = pose_from_wire(payload["hand_pose"])
    forces = [
        FingertipForce(str(f["id"]), Vec3(float(f["fx"]), float(f["fy"]), float(f["fz"])), t)
        for f in payload["fingertips"]
    ]
    return t, pose, forces


class BridgeServer:
    """Serves one peer at a time, driving a fresh controller per session."""

    def __init__(
        self,
        params: ControllerParams,
        model: HandModel,
        decoder,
        grasp_type: GraspType,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        self.params = params
        self.model = model
        self.decoder = decoder
        self.grasp_type = grasp_type
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(1)

    @property
    def address(self) -> tuple[str, int]:
        return self._sock.getsockname()

    def close(self) -> None:
        self._sock.close()

    def serve_once(self) -> SessionStats:
        """Accept one connection and serve it until the peer disconnects."""
        conn, peer = self._sock.accept()
        log.info("session from %s:%d", *peer)
        stats = SessionStats()
        controller = GripController(self.params, self.model, self.grasp_type)
        ctx = GraspContext(self.grasp_type, controller.state.g_size)
        last_seq = None
        try:
            reader = conn.makefile("r", encoding="utf-8", newline="\n")
            for line in reader:
                line = line.strip()
                if not line:
                    continue
                try:
                    frame = json.loads(line)
                    kind = frame["kind"]
                    seq = int(frame["seq"])
                    payload = frame.get("payload", {})
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    stats.malformed += 1
                    conn.sendall(encode_frame("error", -1, {"message": f"malformed frame: {exc}"}))
                    continue
                if kind == "hello":
                    conn.sendall(
                        encode_frame(
                            "hello",
                            seq,
                            {
                                "protocol": PROTOCOL,
                                "fingers": list(self.model.finger_names),
                                "joint_count": self.model.joint_count,
                                "grasp_type": self.grasp_type.value,
                            },
                        )
                    )
                    continue
                if kind != "sensor":
                    stats.malformed += 1
                    conn.sendall(encode_frame("error", seq, {"message": f"unexpected kind {kind!r}"}))
                    continue
                if last_seq is not None and seq <= last_seq:
                    stats.dropped += 1
                    log.debug("dropped out-of-order frame seq=%d (last %d)", seq, last_seq)
                    continue
                try:
                    t, pose, forces = _parse_sensor_payload(payload)
                except (KeyError, TypeError, ValueError) as exc:
                    stats.malformed += 1
                    conn.sendall(encode_frame("error", seq, {"message": f"bad sensor payload: {exc}"}))
                    continue
                last_seq = seq
                q = self.decoder.decode(ctx).joints
                ctx, record = controller.tick(forces, pose, q)
                if record.error:
                    stats.malformed += 1
                    conn.sendall(encode_frame("error", seq, {"message": record.error}))
                    continue
                stats.sensors_accepted += 1
                posture = self.decoder.decode(ctx)
                conn.sendall(
                    encode_frame(
                        "command",
                        seq,
                        {
                            "t": t,
                            "grasp_type": ctx.grasp_type.value,
                            "grasp_size_m": ctx.grasp_size_m,
                            "joint_angles": list(posture.joints.angles),
                        },
                    )
                )
                stats.commands_sent += 1
        finally:
            conn.close()
        log.info(
            "session closed: %d accepted, %d commands, %d malformed, %d dropped",
            stats.sensors_accepted,
            stats.commands_sent,
            stats.malformed,
            stats.dropped,
        )
        return stats


def serve(
    params: ControllerParams,
    model: HandModel,
    decoder,
    grasp_type: GraspType,
    host: str,
    port: int,
) -> SessionStats:
    """Bind, serve a single session until the peer disconnects, clean up."""
    server = BridgeServer(params, model, decoder, grasp_type, host, port)
    try:
        return server.serve_once()
    finally:
        server.close()


def replay_sensor_csv(path, host: str, port: int, timeout_s: float = 30.0) -> list[dict]:
    """Test client: stream a recorded sensor CSV, return the command payloads.

    Frames are exchanged in lockstep (send one, read one), which keeps the
    client trivially deadlock-free at recording scale.
    """
    from .report import read_sensor_csv

    _finger_names, rows = read_sensor_csv(path)
    commands: list[dict] = []
    with socket.create_connection((host, port), timeout=timeout_s) as conn:
        reader = conn.makefile("r", encoding="utf-8", newline="\n")
        conn.sendall(encode_frame("hello", 0, {"protocol": PROTOCOL}))
        hello = json.loads(reader.readline())
        if hello.get("kind") != "hello":
            raise RuntimeError(f"handshake failed: {hello}")
        for i, (t, pose, forces) in enumerate(rows, start=1):
            payload = {
                "t": t,
                "hand_pose": pose_to_wire(pose),
                "fingertips": [
                    {"id": f.fingertip_id, "fx": f.raw.x, "fy": f.raw.y, "fz": f.raw.z}
                    for f in forces
                ],
            }
            conn.sendall(encode_frame("sensor", i, payload))
            reply = json.loads(reader.readline())
            if reply.get("kind") == "command":
                commands.append(reply["payload"])
            else:
                log.warning("replay frame %d got %s", i, reply.get("kind"))
    return commands
