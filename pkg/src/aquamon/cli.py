"""Command line front end.

Subcommands: sim (run a synthetic mission), replay (rebuild station
state from a log), export (write estimate rasters), report (water
suitability), broker (stand-alone telemetry broker).

Exit codes: 0 success, 1 usage or configuration error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import station as station_mod
from .config import load_config, world_origin, world_spec
from .errors import AquamonError, ConfigError
from .gateway import Gateway
from .link import Broker
from .simrun import run_sim
from .vehicle import AutopilotConfig
from .world import generate_world


class _Parser(argparse.ArgumentParser):
    """argparse that treats every usage problem as exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    p = _Parser(prog="aquamon", description="lake-monitoring mission tools")
    sub = p.add_subparsers(dest="command", metavar="command")

    sim = sub.add_parser("sim", help="run a synthetic mission end to end")
    sim.add_argument("--config", help="JSON overrides merged onto the defaults")
    sim.add_argument("--seed", type=int, default=0, help="world and sensor seed")
    sim.add_argument("--duration-s", type=float, default=6000.0, help="time budget")
    sim.add_argument("--log", default="mission_log.ndjson", help="event log path")
    sim.add_argument("--no-log", action="store_true", help="skip writing the log")
    sim.add_argument("--broker", action="store_true", help="loop telemetry through a TCP broker")
    sim.add_argument("--serve", action="store_true", help="expose the HTTP gateway while running")
    sim.add_argument("--rate", type=float, help="pace factor (1 = real time; default: flat out, 1 with --serve)")
    sim.add_argument("--gateway-port", type=int, help="gateway port override")

    rep = sub.add_parser("replay", help="rebuild station state from a log")
    rep.add_argument("--log", required=True)
    rep.add_argument("--config")
    rep.add_argument("--seed", type=int, default=0)

    exp = sub.add_parser("export", help="write mean and sd rasters for a parameter")
    exp.add_argument("--log", required=True)
    exp.add_argument("--param", required=True)
    exp.add_argument("--out", required=True, help="output path for the mean raster")
    exp.add_argument("--config")
    exp.add_argument("--seed", type=int, default=0)

    rpt = sub.add_parser("report", help="print the suitability report")
    rpt.add_argument("--log", required=True)
    rpt.add_argument("--config")
    rpt.add_argument("--seed", type=int, default=0)

    brk = sub.add_parser("broker", help="run a stand-alone telemetry broker")
    brk.add_argument("--host", default="127.0.0.1")
    brk.add_argument("--port", type=int, default=1884)

    return p


def _static_dir() -> str | None:
    for cand in ("frontend/dist", os.path.join(os.path.dirname(__file__), "static")):
        if os.path.isdir(cand):
            return os.path.abspath(cand)
    return None


def _rebuild(args) -> station_mod.Station:
    cfg = load_config(args.config)
    world = generate_world(args.seed, world_spec(cfg))
    gp_cfg = cfg["gp"]
    return station_mod.replay(
        args.log,
        world.grid,
        world_origin(cfg),
        gp_config=gp_cfg,
        thresholds=cfg["thresholds"],
        vehicle_config=AutopilotConfig.from_dict(cfg["vehicle"]),
        refit_every=int(gp_cfg.get("refit_every", 25)),
        inflate_radius=float(cfg["mission"].get("inflate_radius_m", 1.0)),
    )


def _cmd_sim(args) -> int:
    cfg = load_config(args.config)
    rate = args.rate if args.rate is not None else (1.0 if args.serve else 0.0)
    log_path = None if args.no_log else args.log
    holder: dict = {}

    def on_ready(h):
        holder["handles"] = h
        if args.serve:
            link = cfg.get("link", {})
            gw = Gateway(
                h.station,
                h.bus,
                vehicle_id=h.vehicle_id,
                mission=h.mission,
                host=str(link.get("gateway_host", "127.0.0.1")),
                port=int(
                    args.gateway_port
                    if args.gateway_port is not None
                    else link.get("gateway_port", 8765)
                ),
                static_dir=_static_dir(),
            )
            gw.start()
            holder["gateway"] = gw
            print(f"gateway: {gw.url}", flush=True)

    gw = None
    try:
        try:
            result = run_sim(
                cfg,
                seed=args.seed,
                duration_s=args.duration_s,
                log_path=log_path,
                use_broker=args.broker,
                rate=rate,
                on_ready=on_ready,
            )
        except KeyboardInterrupt:
            print("\ninterrupted", flush=True)
            return 0
        gw = holder.get("gateway")
        lap = "n/a" if result.lap_time_s is None else f"{result.lap_time_s:.1f} s"
        done = "n/a" if result.mission_time_s is None else f"{result.mission_time_s:.1f} s"
        batt = (
            "n/a"
            if result.battery_pct_at_lap is None
            else f"{result.battery_pct_at_lap:.1f}%"
        )
        print(f"seed {result.seed}: {result.ticks} ticks, {result.sim_time_s:.1f} s simulated")
        print(f"lap of {result.lap_waypoints} waypoints: {lap} (battery {batt})")
        print(f"mission parked: {done}, final mode {result.final_mode}")
        print(
            f"travelled {result.distance_m:.0f} m, battery {result.battery_pct_end:.1f}% left"
        )
        print(
            f"{result.sample_count} samples, {result.detection_count} detections, "
            f"{result.refit_count} refits, {result.quarantined} quarantined"
        )
        for n in result.notes:
            print(f"note: {n}")
        if result.log_path:
            print(f"log: {result.log_path}")
        if gw is not None:
            print("serving until interrupted (Ctrl+C)", flush=True)
            try:
                while True:
                    time.sleep(0.5)
            except KeyboardInterrupt:
                pass
        return 0
    finally:
        if holder.get("gateway") is not None:
            holder["gateway"].stop()


def _cmd_replay(args) -> int:
    st = _rebuild(args)
    snap = st.snapshot()
    print(f"events: {st.last_seq}, samples: {st.sample_count}, refits: {st.refit_count}")
    for param, info in snap["models"].items():
        print(
            f"{param}: n={info['n']} lengthscale={info['lengthscale']:.1f} m "
            f"variance={info['variance']:.4g}"
        )
    for vid, view in snap["vehicles"].items():
        print(f"{vid}: mode={view['mode']} track={view['track_len']} poses")
    if st.quarantined:
        print(f"quarantined: {st.quarantined}")
    return 0


def _cmd_export(args) -> int:
    st = _rebuild(args)
    if args.param not in st.models:
        print(f"no fitted model for {args.param!r}", file=sys.stderr)
        return 2
    mean_path, sd_path = st.export_rasters(args.param, args.out)
    print(mean_path)
    print(sd_path)
    return 0


def _cmd_report(args) -> int:
    st = _rebuild(args)
    rep = st.compliance_report()
    for v in rep.verdicts:
        lo = "-inf" if v.low is None else f"{v.low:g}"
        hi = "+inf" if v.high is None else f"{v.high:g}"
        state = "ok" if v.passed else "EXCEEDED"
        print(f"{v.parameter}: median {v.median:.3g} in [{lo}, {hi}] -> {state}")
    for n in rep.notices:
        print(f"notice: {n}")
    print(f"suitable: {'yes' if rep.suitable else 'no'}")
    return 0


def _cmd_broker(args) -> int:
    broker = Broker(host=args.host, port=args.port)
    broker.start()
    try:
        print(f"broker listening on {broker.host}:{broker.port}", flush=True)
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        broker.stop()
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    handler = {
        "sim": _cmd_sim,
        "replay": _cmd_replay,
        "export": _cmd_export,
        "report": _cmd_report,
        "broker": _cmd_broker,
    }[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except AquamonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
