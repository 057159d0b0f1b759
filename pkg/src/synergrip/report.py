"""Episode outputs: telemetry CSV, summary JSON, sensor recordings, figures.

Floats are written with ``repr`` so files round-trip bit exactly and two
runs of the same seeded script produce byte-identical telemetry.

Telemetry CSV column order (fingers in hand-model order):

    t, phase,
    fn_raw_<finger>, ft_raw_<finger>  (per finger),
    fn_filt, ft_filt, t_min, t_max, g_size, load_class, clamp_flag, error
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from .controller import TelemetryRecord
from .units import FingertipForce, Pose, Vec3


def format_float(value: float) -> str:
    return repr(float(value))


def telemetry_header(finger_names: Sequence[str]) -> list[str]:
    cols = ["t", "phase"]
    for name in finger_names:
        cols.append(f"fn_raw_{name}")
        cols.append(f"ft_raw_{name}")
    cols += ["fn_filt", "ft_filt", "t_min", "t_max", "g_size", "load_class", "clamp_flag", "error"]
    return cols


def telemetry_row(record: TelemetryRecord, finger_names: Sequence[str]) -> list[str]:
    row = [format_float(record.t), record.phase]
    for name in finger_names:
        row.append(format_float(record.fn_raw[name]))
        row.append(format_float(record.ft_raw[name]))
    row += [
        format_float(record.fn_filt_agg),
        format_float(record.ft_filt_agg),
        format_float(record.t_min),
        format_float(record.t_max),
        format_float(record.g_size),
        record.load_class,
        "1" if record.clamped else "0",
        record.error.replace(",", ";").replace("\n", " "),
    ]
    return row


def write_telemetry_csv(path: Path, records: Sequence[TelemetryRecord], finger_names: Sequence[str]) -> None:
    lines = [",".join(telemetry_header(finger_names))]
    lines += [",".join(telemetry_row(r, finger_names)) for r in records]
    path.write_text("\n".join(lines) + "\n")


def write_summary_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n")


# --- raw sensor recordings (replayable through the bridge) -----------------


def sensor_header(finger_names: Sequence[str]) -> list[str]:
    cols = ["t"]
    cols += [f"r{i}{j}" for i in range(3) for j in range(3)]
    cols += ["px", "py", "pz"]
    for name in finger_names:
        cols += [f"fx_{name}", f"fy_{name}", f"fz_{name}"]
    return cols


def write_sensor_csv(
    path: Path,
    rows: Sequence[tuple[float, Pose, Sequence[FingertipForce]]],
    finger_names: Sequence[str],
) -> None:
    lines = [",".join(sensor_header(finger_names))]
    for t, pose, forces in rows:
        by_id = {f.fingertip_id: f for f in forces}
        cells = [format_float(t)]
        cells += [format_float(pose.rotation[i, j]) for i in range(3) for j in range(3)]
        tr = pose.translation
        cells += [format_float(tr.x), format_float(tr.y), format_float(tr.z)]
        for name in finger_names:
            raw = by_id[name].raw
            cells += [format_float(raw.x), format_float(raw.y), format_float(raw.z)]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def read_sensor_csv(path: Path) -> tuple[list[str], list[tuple[float, Pose, list[FingertipForce]]]]:
    """Parse a sensor recording back into poses and fingertip samples."""
    lines = Path(path).read_text().strip().splitlines()
    if not lines:
        raise ValueError(f"empty sensor recording: {path}")
    header = lines[0].split(",")
    finger_names = []
    for col in header:
        if col.startswith("fx_"):
            finger_names.append(col[3:])
    if not finger_names:
        raise ValueError(f"no fingertip columns found in {path}")
    rows = []
    for line in lines[1:]:
        cells = line.split(",")
        values = [float(c) for c in cells]
        t = values[0]
        rot = [[values[1 + 3 * i + j] for j in range(3)] for i in range(3)]
        pose = Pose(rot, Vec3(values[10], values[11], values[12]))
        forces = []
        base = 13
        for k, name in enumerate(finger_names):
            fx, fy, fz = values[base + 3 * k : base + 3 * k + 3]
            forces.append(FingertipForce(name, Vec3(fx, fy, fz), t))
        rows.append((t, pose, forces))
    return finger_names, rows


# --- figures ----------------------------------------------------------------


def render_episode_figure(
    path: Path,
    records: Sequence[TelemetryRecord],
    stages: dict[str, tuple[float, float]] | None = None,
    title: str = "",
) -> None:
    """Render the control signals of an episode to an image file.

    Top panel: filtered normal force with its threshold band and the
    filtered tangential force. Bottom panel: the grasp size command, with
    the RELEASE span shaded.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ts = [r.t for r in records]
    fn = [r.fn_filt_agg for r in records]
    ft = [r.ft_filt_agg for r in records]
    t_min = [r.t_min for r in records]
    t_max = [r.t_max for r in records]
    g = [r.g_size for r in records]

    fig, (ax_f, ax_g) = plt.subplots(2, 1, sharex=True, figsize=(9, 6), height_ratios=[2, 1])
    ax_f.plot(ts, fn, color="tab:blue", label="normal force (filtered)")
    ax_f.plot(ts, t_min, color="purple", linestyle="--", linewidth=1.0, label="threshold low edge")
    ax_f.plot(ts, t_max, color="goldenrod", linestyle="--", linewidth=1.0, label="threshold high edge")
    ax_f.plot(ts, ft, color="tab:green", label="tangential force (filtered)")
    ax_f.set_ylabel("force [mN]")
    ax_f.legend(loc="upper left", fontsize=8)

    ax_g.plot(ts, g, color="tab:red", label="grasp size")
    ax_g.set_ylabel("grasp size [m]")
    ax_g.set_xlabel("time [s]")
    ax_g.legend(loc="upper left", fontsize=8)

    release_ts = [r.t for r in records if r.phase == "RELEASE"]
    if release_ts:
        for ax in (ax_f, ax_g):
            ax.axvspan(release_ts[0], ts[-1], color="tab:blue", alpha=0.08)
    if stages:
        for name, (t0, _t1) in stages.items():
            ax_f.axvline(t0, color="gray", linewidth=0.6, alpha=0.6)
            ax_f.text(t0, ax_f.get_ylim()[1], name, fontsize=7, va="top", ha="left", alpha=0.7)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
