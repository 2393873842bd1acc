"""Command-line entry point.

Subcommands:
    serve        run the station + control API from a config file
    simulate     time-bounded station run with the configured simulator
    replay       time-bounded station run replaying a recorded log
    record       generate a replay log offline from a scenario file
    stats        print objects/senders tables from a running station's API
    encode-test  encode one MAVLink frame from the command line as hex

Exit codes: 0 success, 1 runtime error, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
import urllib.error
import urllib.request
from dataclasses import replace
from typing import Optional

import yaml

from . import mavlink
from .clocks import ThreadRuntime, VirtualClock, VirtualRuntime
from .config import ConfigError, load_station_config, parse_bind_address
from .ingest import ScenarioSpec, simulate_step, write_replay_log
from .station import Station

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class FieldParseError(Exception):
    pass


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _override_seed(config, seed: Optional[int]):
    if seed is None or config.ingest.scenario is None:
        return config
    scenario = replace(config.ingest.scenario, seed=seed)
    return replace(config, ingest=replace(config.ingest, scenario=scenario))


def _print_summary(station: Station) -> None:
    print("\nobjects:")
    for view in station.snapshot_world():
        drop = "n/a" if view.drop_rate is None else f"{view.drop_rate:.4f}"
        p = view.latest.position_mm
        print(
            f"  {view.name:<12} frames={view.latest.frame_number:<8} "
            f"capture_rate={view.capture_rate_hz:6.1f} Hz  drop_rate={drop}  "
            f"pos_mm=({p[0]:.1f}, {p[1]:.1f}, {p[2]:.1f})"
        )
    senders = station.list_senders() or station.final_sender_stats()
    if senders:
        print("senders:")
        for sid, cfg, st in senders:
            print(
                f"  #{sid} {cfg.object_name:<12} -> {cfg.endpoint.host}:{cfg.endpoint.port} "
                f"@ {cfg.rate_hz:g} Hz  ticks={st.ticks_total} frames={st.frames_sent} "
                f"misses={st.deadline_misses} stale={st.stale_skips} "
                f"rate={st.measured_output_rate_hz:.2f} Hz"
            )


def _run_station(config, *, duration: Optional[float], virtual: bool) -> int:
    if virtual:
        if duration is None:
            return _fail("--virtual-clock requires --duration", EXIT_USAGE)
        runtime = VirtualRuntime(VirtualClock())
    else:
        runtime = ThreadRuntime()
    station = Station(config, runtime)
    station.start()
    try:
        if virtual:
            runtime.run_for(duration)
        elif duration is not None:
            time.sleep(duration)
        else:
            while True:
                time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        station.stop()
        runtime.stop_all()
        _print_summary(station)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import build_api

    config = load_station_config(args.config)
    if args.api:
        config = replace(config, api_bind=args.api)
    host, port = parse_bind_address(config.api_bind, "api.bind")
    runtime = ThreadRuntime()
    station = Station(config, runtime)
    station.start()
    app = build_api(station)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        station.stop()
        runtime.stop_all()
        _print_summary(station)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_station_config(args.config)
    if config.ingest.source != "simulate":
        return _fail("simulate requires ingest.source: simulate in the config", EXIT_USAGE)
    config = _override_seed(config, args.seed)
    return _run_station(config, duration=args.duration, virtual=args.virtual_clock)


def cmd_replay(args: argparse.Namespace) -> int:
    config = load_station_config(args.config)
    if args.log:
        config = replace(config, ingest=replace(config.ingest, source="replay", replay_path=args.log))
    if config.ingest.source != "replay" or not config.ingest.replay_path:
        return _fail("replay requires ingest.source: replay (or --log PATH)", EXIT_USAGE)
    if args.fast:
        config = replace(config, ingest=replace(config.ingest, replay_pacing="fast"))
    return _run_station(config, duration=args.duration, virtual=args.virtual_clock)


def cmd_record(args: argparse.Namespace) -> int:
    try:
        with open(args.scenario, "r", encoding="utf-8") as f:
            doc = yaml.safe_load(f) or {}
        spec = ScenarioSpec.from_dict(doc)
    except FileNotFoundError:
        return _fail(f"scenario file not found: {args.scenario}", EXIT_USAGE)
    except (TypeError, ValueError, yaml.YAMLError) as e:
        return _fail(f"invalid scenario: {e}", EXIT_USAGE)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    frames = int(round(args.duration * spec.rate_hz))
    samples = []
    for k in range(frames):
        samples.extend(simulate_step(spec, k / spec.rate_hz))
    write_replay_log(args.out, samples)
    print(f"wrote {len(samples)} samples ({frames} frames) to {args.out}")
    return EXIT_OK


def _fetch_json(api: str, path: str):
    url = f"http://{api}{path}"
    with urllib.request.urlopen(url, timeout=5.0) as resp:
        return json.loads(resp.read().decode("utf-8"))


def _print_stats_tables(api: str) -> None:
    objects = _fetch_json(api, "/api/objects")
    senders = _fetch_json(api, "/api/senders")
    print(f"objects ({len(objects)}):")
    for o in objects:
        drop = "n/a" if o["drop_rate"] is None else f"{o['drop_rate']:.4f}"
        p = o["position_capture_m"]
        print(
            f"  {o['name']:<12} rate={o['capture_rate_hz']:6.1f} Hz  drop={drop}  "
            f"pos_m=({p[0]:+.3f}, {p[1]:+.3f}, {p[2]:+.3f})  "
            f"{'STALE' if o['stale'] else 'live'}"
        )
    if senders:
        print(f"senders ({len(senders)}):")
        for s in senders:
            st = s["stats"]
            print(
                f"  #{s['id']} {s['object']:<12} -> {s['host']}:{s['port']} @ {s['rate_hz']:g} Hz  "
                f"measured={st['measured_output_rate_hz']:.2f} Hz  frames={st['frames_sent']}  "
                f"misses={st['deadline_misses']}  stale={st['stale_skips']}"
            )


def cmd_stats(args: argparse.Namespace) -> int:
    try:
        if not args.watch:
            _print_stats_tables(args.api)
            return EXIT_OK
        deadline = None if args.duration is None else time.monotonic() + args.duration
        while deadline is None or time.monotonic() < deadline:
            _print_stats_tables(args.api)
            time.sleep(1.0)
    except KeyboardInterrupt:
        return EXIT_OK
    except (urllib.error.URLError, OSError) as e:
        return _fail(f"cannot reach station at {args.api}: {e}", EXIT_RUNTIME)
    return EXIT_OK


def _parse_message_fields(cls, assignments: list[str]):
    values = {}
    fields = {f.name: f for f in dataclasses.fields(cls)}
    for item in assignments:
        name, sep, raw = item.partition("=")
        if not sep:
            raise FieldParseError(f"expected field=value, got {item!r}")
        if name not in fields:
            raise FieldParseError(f"{cls.NAME} has no field {name!r}")
        ann = fields[name].type
        try:
            if name == "q":
                parts = [float(v) for v in raw.split(",")]
                if len(parts) != 4:
                    raise ValueError("q needs 4 comma-separated components")
                values[name] = tuple(parts)
            elif "int" in ann:
                values[name] = int(raw, 0)
            else:
                values[name] = float(raw)
        except ValueError as e:
            raise FieldParseError(f"field {name!r}: {e}") from None
    return values


def cmd_encode_test(args: argparse.Namespace) -> int:
    cls = mavlink.MESSAGE_NAMES.get(args.type)
    if cls is None:
        return _fail(
            f"unknown message type {args.type!r} (choose from {sorted(mavlink.MESSAGE_NAMES)})",
            EXIT_USAGE,
        )
    defaults = {}
    for f in dataclasses.fields(cls):
        if f.default is dataclasses.MISSING:
            defaults[f.name] = (1.0, 0.0, 0.0, 0.0) if f.name == "q" else (0 if "int" in f.type else 0.0)
    try:
        defaults.update(_parse_message_fields(cls, args.set or []))
        message = cls(**defaults)
        header = mavlink.MavFrameHeader(
            sequence=args.seq,
            system_id=args.sysid,
            component_id=args.compid,
            message_id=cls.MESSAGE_ID,
            protocol_version=1 if args.v1 else 2,
        )
        frame = mavlink.encode_frame(header, message)
    except (FieldParseError, mavlink.CodecError) as e:
        return _fail(str(e), EXIT_USAGE)
    print(frame.hex())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mocaplink", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the station and control API until interrupted")
    p.add_argument("--config", required=True, help="station config file (YAML)")
    p.add_argument("--api", help="override the control API bind address (HOST:PORT)")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("simulate", help="run the configured simulator scenario, then print a summary")
    p.add_argument("--config", required=True)
    p.add_argument("--duration", type=float, help="seconds to run (default: until interrupted)")
    p.add_argument("--virtual-clock", action="store_true", help="deterministic simulated time")
    p.add_argument("--seed", type=int, help="override the scenario RNG seed")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("replay", help="stream a recorded log through the station")
    p.add_argument("--config", required=True)
    p.add_argument("--log", help="replay log path (overrides the config ingest)")
    p.add_argument("--fast", action="store_true", help="ignore capture timing, replay as fast as possible")
    p.add_argument("--duration", type=float)
    p.add_argument("--virtual-clock", action="store_true")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("record", help="generate a replay log from a scenario file")
    p.add_argument("--scenario", required=True, help="scenario spec file (YAML)")
    p.add_argument("--out", required=True, help="output log path")
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_record)

    p = sub.add_parser("stats", help="print live tables from a running station")
    p.add_argument("--api", default="127.0.0.1:8750")
    p.add_argument("--watch", action="store_true", help="refresh at 1 Hz")
    p.add_argument("--duration", type=float, help="stop watching after this many seconds")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("encode-test", help="encode one frame and print it as hex")
    p.add_argument("--type", required=True, help="HIL_GPS | LOCAL_POSITION_NED | ATT_POS_MOCAP")
    p.add_argument("--set", action="append", metavar="FIELD=VALUE", help="set a message field")
    p.add_argument("--seq", type=int, default=0)
    p.add_argument("--sysid", type=int, default=1)
    p.add_argument("--compid", type=int, default=1)
    p.add_argument("--v1", action="store_true", help="emit MAVLink v1 framing")
    p.set_defaults(fn=cmd_encode_test)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        return _fail(str(e), EXIT_USAGE)
    except (urllib.error.URLError, ConnectionError) as e:
        return _fail(str(e), EXIT_RUNTIME)
    except Exception as e:  # runtime failures map to exit 1
        return _fail(f"{type(e).__name__}: {e}", EXIT_RUNTIME)


if __name__ == "__main__":
    sys.exit(main())
