"""Single `irida` entry point: icu / sim / ivu / replay / demo subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import threading
import time

from . import headless, icu, netstate, sim

log = logging.getLogger("irida.cli")

ENV_ICU_CONFIG = "IRIDA_ICU_CONFIG"

ICU_DEFAULTS = {
    "data_port": icu.DEFAULT_DATA_PORT,
    "control_port": icu.DEFAULT_CONTROL_PORT,
    "ws_port": None,
    "ivu_ttl_secs": 60.0,
}


def endpoint(text: str) -> tuple[str, int]:
    """Parse 'host:port' into an address tuple."""
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ValueError(f"expected host:port, got {text!r}")
    return host, int(port)


def grid(text: str) -> tuple[int, int]:
    """Parse 'WxH' like '4x4' into (width, height)."""
    w, sep, h = text.lower().partition("x")
    if not sep:
        raise ValueError(f"expected WxH, got {text!r}")
    return int(w), int(h)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irida",
        description="Real-time WSN visualization pipeline: control unit, node simulator, visualizers.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_icu = sub.add_parser("icu", help="run the control unit (ingest + fanout relay)")
    p_icu.add_argument("--data-port", type=int, default=None, help="UDP port for protocol lines (default 47000)")
    p_icu.add_argument("--control-port", type=int, default=None, help="UDP port for IVU registration (default 47001)")
    p_icu.add_argument("--ws-port", type=int, default=None, help="WebSocket relay port (off unless given)")
    p_icu.add_argument("--stdin", action="store_true", help="also ingest lines from standard input")
    p_icu.add_argument("--validate", action="store_true", help="parse-check lines (count + warn, never drop)")
    p_icu.add_argument("--ivu-ttl-secs", type=float, default=None, help="expire IVUs not pinging within this (default 60)")
    p_icu.add_argument("--static-dir", default=None, help="serve this directory over HTTP on the WS port")
    p_icu.add_argument("--log-level", default="info")

    p_sim = sub.add_parser("sim", help="run the simulated node network")
    p_sim.add_argument("--grid", type=grid, default=(4, 4), help="grid size as WxH (default 4x4)")
    p_sim.add_argument("--icu", type=endpoint, default=None, help="ICU data endpoint host:port (live mode)")
    p_sim.add_argument("--script", default=None, help="event script file: 'at <ms> shake <id> <val>' / 'stop <ms>'")
    p_sim.add_argument("--out", default=None, help="scripted mode: write emitted lines here (default stdout)")
    p_sim.add_argument("--seed", type=int, default=None, help="RNG seed (required with --script)")
    p_sim.add_argument("--hello-period", type=float, default=15.0)
    p_sim.add_argument("--hello-jitter-max", type=float, default=5.0)
    p_sim.add_argument("--listen-base", type=float, default=1.0)
    p_sim.add_argument("--listen-jitter-max", type=float, default=0.2)
    p_sim.add_argument("--extra-read-window", type=float, default=1.0)
    p_sim.add_argument("--heartbeat-period", type=float, default=5.0)
    p_sim.add_argument("--neighbor-distance-max", type=int, default=2)
    p_sim.add_argument("--radio-range", type=int, default=None, help="Chebyshev reach in cells (default: whole grid)")
    p_sim.add_argument("--loss-probability", type=float, default=0.0)
    p_sim.add_argument("--deaf-while-busy", action="store_true")
    p_sim.add_argument("--accel-threshold", type=float, default=1.0)
    p_sim.add_argument("--dedup-capacity", type=int, default=32)
    p_sim.add_argument("--time-scale", type=float, default=1.0, help="wall seconds per virtual second (0 = flat out)")
    p_sim.add_argument("--log-level", default="info")

    p_ivu = sub.add_parser("ivu", help="run a headless IVU (record / snapshot oracle)")
    p_ivu.add_argument("--icu", type=endpoint, default=None, help="ICU control endpoint host:port")
    p_ivu.add_argument("--port", type=int, default=0, help="local UDP port to receive the stream (0 = ephemeral)")
    p_ivu.add_argument("--record", default=None, help="journal received lines to this file")
    p_ivu.add_argument("--dump-on-exit", default=None, help="write the final state snapshot here")
    p_ivu.add_argument("--node-fade", type=float, default=30.0)
    p_ivu.add_argument("--link-fade", type=float, default=30.0)
    p_ivu.add_argument("--pulse-duration", type=float, default=0.8)
    p_ivu.add_argument("--packet-duration", type=float, default=0.6)
    p_ivu.add_argument("--inactive-alpha", type=float, default=0.5)
    p_ivu.add_argument("--log-level", default="info")

    p_rep = sub.add_parser("replay", help="re-emit a recorded journal over UDP")
    p_rep.add_argument("journal", help="journal file written by `irida ivu --record`")
    p_rep.add_argument("--target", type=endpoint, required=True, help="destination host:port")
    speed = p_rep.add_mutually_exclusive_group()
    speed.add_argument("--speed", type=float, default=1.0, help="playback speed factor")
    speed.add_argument("--instant", action="store_true", help="send back-to-back, no pacing")
    p_rep.add_argument("--log-level", default="info")

    p_demo = sub.add_parser("demo", help="ICU + simulated grid + headless IVU in one process")
    p_demo.add_argument("--grid", type=grid, default=(4, 4))
    p_demo.add_argument("--seed", type=int, default=0)
    p_demo.add_argument("--data-port", type=int, default=icu.DEFAULT_DATA_PORT)
    p_demo.add_argument("--control-port", type=int, default=icu.DEFAULT_CONTROL_PORT)
    p_demo.add_argument("--ws-port", type=int, default=47002)
    p_demo.add_argument("--static-dir", default=None, help="serve the browser IVU from this directory")
    p_demo.add_argument("--time-scale", type=float, default=1.0)
    p_demo.add_argument("--record", default=None)
    p_demo.add_argument("--dump-on-exit", default=None)
    p_demo.add_argument("--duration", type=float, default=0.0, help="stop after this many seconds (0 = run until ^C)")
    p_demo.add_argument("--log-level", default="info")

    return parser


def setup_logging(level_name: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level_name.upper(), logging.INFO),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def load_env_icu_config() -> dict:
    """Read key=value pairs from the file named by IRIDA_ICU_CONFIG, if any."""
    path = os.environ.get(ENV_ICU_CONFIG)
    if not path:
        return {}
    values = {}
    with open(path, encoding="utf-8") as fp:
        for lineno, raw in enumerate(fp, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}: line {lineno}: expected key=value")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def make_icu_config(args) -> icu.IcuConfig:
    """Merge defaults < env config file < explicit flags."""
    file_values = load_env_icu_config()

    def pick(name, cast, default):
        if getattr(args, name, None) is not None:
            return getattr(args, name)
        if name in file_values:
            return cast(file_values[name])
        return default

    return icu.IcuConfig(
        data_port=pick("data_port", int, ICU_DEFAULTS["data_port"]),
        control_port=pick("control_port", int, ICU_DEFAULTS["control_port"]),
        ws_port=pick("ws_port", int, ICU_DEFAULTS["ws_port"]),
        stdin_source=args.stdin or file_values.get("stdin") == "true",
        validate=args.validate or file_values.get("validate") == "true",
        ivu_ttl_secs=pick("ivu_ttl_secs", float, ICU_DEFAULTS["ivu_ttl_secs"]),
        static_dir=pick("static_dir", str, None),
    )


def make_sim_config(args) -> sim.SimConfig:
    return sim.SimConfig(
        grid_width=args.grid[0],
        grid_height=args.grid[1],
        hello_period=args.hello_period,
        hello_jitter_max=args.hello_jitter_max,
        listen_base=args.listen_base,
        listen_jitter_max=args.listen_jitter_max,
        extra_read_window=args.extra_read_window,
        heartbeat_period=args.heartbeat_period,
        neighbor_distance_max=args.neighbor_distance_max,
        radio_range=args.radio_range,
        loss_probability=args.loss_probability,
        deaf_while_busy=args.deaf_while_busy,
        accel_threshold=args.accel_threshold,
        dedup_capacity=args.dedup_capacity,
        seed=args.seed if args.seed is not None else 0,
        icu_endpoint=args.icu,
        time_scale=args.time_scale,
    )


def cmd_icu(args, stop_event=None) -> int:
    icu.run_icu(make_icu_config(args), stop_event=stop_event)
    return 0


def cmd_sim(args, parser, stop_event=None) -> int:
    if args.script is not None and args.seed is None:
        parser.error("--seed is required in scripted mode")
    config = make_sim_config(args)
    if args.script is None:
        if args.icu is None:
            parser.error("--icu host:port is required in live mode")
        sim.run_simulation(config, stop_event=stop_event)
        return 0
    with open(args.script, encoding="utf-8") as fp:
        script_text = fp.read()
    result = sim.run_simulation(config, script_text=script_text)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for t, line in result.lines:
            out.write(json.dumps({"t": int(round(t * 1000)), "line": line}) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_ivu(args, stop_event=None) -> int:
    fade = netstate.FadeConfig(
        node_fade=args.node_fade,
        link_fade=args.link_fade,
        pulse_duration=args.pulse_duration,
        packet_duration=args.packet_duration,
        inactive_alpha=args.inactive_alpha,
    )
    headless.run_headless(
        icu_control=args.icu,
        local_port=args.port,
        record_path=args.record,
        dump_on_exit=args.dump_on_exit,
        fade_config=fade,
        stop_event=stop_event,
    )
    return 0


def cmd_replay(args) -> int:
    sent = headless.replay(args.journal, args.target, speed=args.speed, instant=args.instant)
    print(f"replayed {sent} lines to {args.target[0]}:{args.target[1]}")
    return 0


def cmd_demo(args, stop_event=None) -> int:
    """ICU + simulated grid + headless IVU wired together over loopback."""
    stop_event = stop_event or threading.Event()
    server = icu.IcuServer(
        icu.IcuConfig(
            data_port=args.data_port,
            control_port=args.control_port,
            ws_port=args.ws_port,
            static_dir=args.static_dir,
        )
    )
    server.start()
    ivu = headless.HeadlessIvu(
        icu_control=("127.0.0.1", server.control_port),
        record_path=args.record,
    )
    ivu.start()
    # nodes introduce themselves once (first heartbeat carries the position),
    # so the IVU must be registered before the grid powers on
    deadline = time.monotonic() + 10.0
    while not ivu.registered and time.monotonic() < deadline:
        time.sleep(0.01)
    if not ivu.registered:
        print("headless IVU failed to register with the ICU", file=sys.stderr)
        ivu.stop()
        server.stop()
        return 1

    config = sim.SimConfig(
        grid_width=args.grid[0],
        grid_height=args.grid[1],
        seed=args.seed,
        icu_endpoint=("127.0.0.1", server.data_port),
        time_scale=args.time_scale,
    )
    sim_thread = threading.Thread(
        target=sim.run_simulation, kwargs={"config": config, "stop_event": stop_event}, daemon=True
    )
    sim_thread.start()

    print(f"ICU data udp/{server.data_port}, control udp/{server.control_port}")
    print(f"WebSocket stream: ws://127.0.0.1:{server.ws_port}/stream")
    if args.static_dir:
        print(f"Browser IVU: http://127.0.0.1:{server.ws_port}/")
    print(f"Simulating {args.grid[0]}x{args.grid[1]} nodes; headless IVU on udp/{ivu.port}. Ctrl-C to stop.")

    deadline = time.monotonic() + args.duration if args.duration > 0 else None
    try:
        while not stop_event.is_set():
            if deadline is not None and time.monotonic() >= deadline:
                break
            time.sleep(0.1)
    except KeyboardInterrupt:
        pass
    finally:
        stop_event.set()
        sim_thread.join(timeout=3.0)
        ivu.stop()
        if args.dump_on_exit:
            ivu.dump_snapshot(args.dump_on_exit)
        server.stop()
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        if args.subcommand == "icu":
            return cmd_icu(args)
        if args.subcommand == "sim":
            return cmd_sim(args, parser)
        if args.subcommand == "ivu":
            return cmd_ivu(args)
        if args.subcommand == "replay":
            return cmd_replay(args)
        if args.subcommand == "demo":
            return cmd_demo(args)
    except (icu.IcuError, sim.ConfigError, headless.JournalError) as exc:
        print(f"irida {args.subcommand}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"irida {args.subcommand}: {exc}", file=sys.stderr)
        return 1
    parser.error(f"unknown subcommand {args.subcommand}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
