"""Command line entry points: `vr-gcs serve` and `vr-gcs analyze`."""

import argparse
import logging
import os
import statistics
import sys

from .config import ConfigError, ServerConfig, load_config
from .server import run_server
from .sim import ScriptError, parse_script
from .telemetry import read_csv
from .world import WorldError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vr-gcs",
        description="Simulated hexacopter ground station with live "
                    "streaming of pose and reconstructed environment mesh.")
    sub = parser.add_subparsers(dest="command", required=True)

    serve_p = sub.add_parser("serve", help="run the ground-station server")
    serve_p.add_argument("--config", help="key = value config file")
    serve_p.add_argument("--world", help="world file (overrides config)")
    serve_p.add_argument("--port", type=int, help="listen port (overrides "
                                                  "config)")
    serve_p.add_argument("--script", help="scripted command file for "
                                          "headless runs")
    serve_p.add_argument("--fast", action="store_true",
                         help="run simulation faster than wall clock")
    serve_p.add_argument("--latency-csv", help="write probe log here on "
                                               "shutdown")
    serve_p.add_argument("--duration", type=float,
                         help="stop after this much simulated time (s)")
    serve_p.add_argument("--state-log", help="write the vehicle trajectory "
                                             "CSV here on shutdown")
    serve_p.add_argument("--frontend", help="serve this directory of static "
                                            "files over HTTP on the same port")

    analyze_p = sub.add_parser("analyze", help="print latency statistics "
                                               "from an exported CSV")
    analyze_p.add_argument("--csv", required=True)
    return parser


def cmd_serve(args) -> int:
    try:
        config = load_config(args.config) if args.config else ServerConfig()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.world:
        config.world_file = args.world
    if args.port is not None:
        config.listen_port = args.port

    script = None
    if args.script:
        try:
            script = parse_script(args.script)
        except (ScriptError, OSError) as exc:
            print(f"script error: {exc}", file=sys.stderr)
            return 2
    try:
        run_server(config, fast=args.fast, script=script,
                   duration_s=args.duration, latency_csv=args.latency_csv,
                   state_log=args.state_log, static_dir=args.frontend)
    except (WorldError, OSError) as exc:
        print(f"startup error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_analyze(args) -> int:
    try:
        rows = read_csv(args.csv)
    except (OSError, ValueError) as exc:
        print(f"cannot read {args.csv}: {exc}", file=sys.stderr)
        return 2
    if not rows:
        print("no probes in log", file=sys.stderr)
        return 1
    ms = [r[2] for r in rows]
    print(f"probes: {len(ms)}")
    print(f"mean one-way latency:   {statistics.fmean(ms):8.3f} ms")
    print(f"median one-way latency: {statistics.median(ms):8.3f} ms")
    print(f"max one-way latency:    {max(ms):8.3f} ms")
    mapped = [m for m, r in zip(ms, rows) if r[3]]
    if mapped and len(mapped) < len(ms):
        print(f"while mapping: {len(mapped)} probes, "
              f"mean {statistics.fmean(mapped):.3f} ms")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("VR_GCS_LOG", "INFO").upper(),
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(args)
    return cmd_analyze(args)


if __name__ == "__main__":
    sys.exit(main())
