"""Command line entry point.

Subcommands:

    run       execute a scenario script, write telemetry/summary/figure
    validate  check a scenario script without running it
    sweep     run one script across several values of a controller parameter
    serve     run the controller behind the line-protocol bridge
    replay    stream a recorded sensor CSV at a running bridge

Set SYNERGRIP_LOG=debug|info|warning to control verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import bridge as bridge_mod
from .hand import default_hand_model, load_hand_model
from .scenario import load_script, run_episode, validate_script, with_param
from .synergy import default_synergy, load_decoder_weights
from .units import ConfigError, GraspType


def _setup_logging() -> None:
    level_name = os.environ.get("SYNERGRIP_LOG", "warning").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _load_stack(args):
    model = load_hand_model(args.hand) if args.hand else default_hand_model()
    decoder = load_decoder_weights(args.decoder, model) if args.decoder else default_synergy(model)
    return model, decoder


def _add_stack_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hand", help="hand model JSON (hand/1); default: bundled hand")
    p.add_argument("--decoder", help="decoder weights JSON (decoder/1); default: analytic synergy")
    p.add_argument(
        "--grasp-type",
        choices=[t.value for t in GraspType],
        help="override the script's grasp type",
    )


def _cmd_run(args) -> int:
    script = load_script(args.script)
    model, decoder = _load_stack(args)
    out = Path(args.out) if args.out else Path("runs") / script.name
    report = run_episode(
        script,
        out,
        model=model,
        decoder=decoder,
        seed=args.seed,
        grasp_type=GraspType.parse(args.grasp_type) if args.grasp_type else None,
        plot=not args.no_plot,
        record_sensors=args.record_sensors,
    )
    for name, ok in report.criteria.items():
        print(f"  [{'PASS' if ok else 'FAIL'}] {name}")
    print(
        f"{script.name}: {'pass' if report.verdict else 'fail'} "
        f"(final={report.final_status}, slip={report.slip_max_m * 1000:.2f} mm, "
        f"{report.runtime_s:.2f}s)"
    )
    print(f"telemetry: {report.telemetry_path}")
    if report.figure_path:
        print(f"figure:    {report.figure_path}")
    return 0 if report.verdict else 1


def _cmd_validate(args) -> int:
    errors = validate_script(args.script)
    if errors:
        for err in errors:
            print(f"error: {err}")
        return 1
    print(f"{args.script}: ok")
    return 0


def _cmd_sweep(args) -> int:
    script = load_script(args.script)
    model, decoder = _load_stack(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        print(f"error: --values must be a comma-separated list of numbers, got {args.values!r}")
        return 2
    if not values:
        print("error: --values is empty")
        return 2
    out_base = Path(args.out) if args.out else Path("runs") / f"{script.name}_sweep_{args.param}"
    for value in values:
        variant = with_param(script, args.param, value)
        out = out_base / f"{args.param}_{value:g}"
        report = run_episode(
            variant,
            out,
            model=model,
            decoder=decoder,
            seed=args.seed,
            plot=not args.no_plot,
        )
        print(
            f"{args.param}={value:g}: {'pass' if report.verdict else 'fail'} "
            f"final={report.final_status} slip={report.slip_max_m * 1000:.2f}mm "
            f"-> {report.telemetry_path}"
        )
    return 0


def _parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"endpoint must be HOST:PORT, got {text!r}")
    return host, int(port)


def _cmd_serve(args) -> int:
    host, port = _parse_endpoint(args.listen)
    model, decoder = _load_stack(args)
    if args.script:
        script = load_script(args.script)
        params = script.controller
        gtype = script.grasp_type
    else:
        from .controller import ControllerParams

        params = ControllerParams()
        gtype = GraspType.TRIPOD
    if args.grasp_type:
        gtype = GraspType.parse(args.grasp_type)
    print(f"serving on {host}:{port} (grasp type {gtype.value}); one session, ctrl-c to abort")
    stats = bridge_mod.serve(params, model, decoder, gtype, host, port)
    print(
        f"session done: {stats.sensors_accepted} accepted, {stats.commands_sent} commands, "
        f"{stats.malformed} malformed, {stats.dropped} dropped"
    )
    return 0


def _cmd_replay(args) -> int:
    host, port = _parse_endpoint(args.connect)
    commands = bridge_mod.replay_sensor_csv(args.recording, host, port)
    if args.out:
        import json

        Path(args.out).write_text("\n".join(json.dumps(c) for c in commands) + "\n")
        print(f"wrote {len(commands)} commands to {args.out}")
    if commands:
        print(f"{len(commands)} commands, final grasp size {commands[-1]['grasp_size_m']:.6f} m")
    else:
        print("no commands received")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="synergrip",
        description="Fingertip-force grasp controller: scenario runner, tuning sweeps and HIL bridge.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario script")
    p_run.add_argument("script")
    p_run.add_argument("--out", help="output directory (default runs/<name>)")
    p_run.add_argument("--seed", type=int, help="override the script seed")
    p_run.add_argument("--no-plot", action="store_true", help="skip the signals figure")
    p_run.add_argument(
        "--record-sensors", action="store_true", help="also write the raw sensor stream CSV"
    )
    _add_stack_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="validate a scenario script")
    p_val.add_argument("script")
    p_val.set_defaults(func=_cmd_validate)

    p_sweep = sub.add_parser("sweep", help="run a script across controller parameter values")
    p_sweep.add_argument("script")
    p_sweep.add_argument("--param", required=True, help="controller parameter name, e.g. gain_G or K")
    p_sweep.add_argument("--values", required=True, help="comma-separated values, e.g. 0.5,1.0,2.0")
    p_sweep.add_argument("--out", help="output directory")
    p_sweep.add_argument("--seed", type=int)
    p_sweep.add_argument("--no-plot", action="store_true")
    _add_stack_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_serve = sub.add_parser("serve", help="serve the controller over the line protocol")
    p_serve.add_argument("--listen", required=True, metavar="HOST:PORT")
    p_serve.add_argument("--script", help="scenario supplying controller params and grasp type")
    _add_stack_flags(p_serve)
    p_serve.set_defaults(func=_cmd_serve)

    p_replay = sub.add_parser("replay", help="stream a recorded sensor CSV at a bridge")
    p_replay.add_argument("recording", help="sensor CSV written by run --record-sensors")
    p_replay.add_argument("--connect", required=True, metavar="HOST:PORT")
    p_replay.add_argument("--out", help="write received commands as JSON lines")
    p_replay.set_defaults(func=_cmd_replay)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
