"""Command line entry points: serve, sim and eval.

Every option can also come from the environment with a ``TELEOP_``
prefix (e.g. ``TELEOP_PORT=9100 softteleop serve``); explicit flags win.
"""

from __future__ import annotations

import argparse
import asyncio
import contextlib
import logging
import os
import signal
import sys

from .config import AppConfig, load_config
from .evaluate import TrajectorySpec, build_report, dump_samples, emit_report, run_eval
from .server import DEFAULT_TCP_PORT, DEFAULT_WS_PORT, run_sim, serve


def _env(name: str, fallback):
    raw = os.environ.get(f"TELEOP_{name}")
    if raw is None:
        return fallback
    if isinstance(fallback, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(fallback, int):
        return int(raw)
    if isinstance(fallback, float):
        return float(raw)
    return raw


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softteleop",
        description="Teleoperation stack for modular parallel soft manipulators",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the teleoperation server")
    p_serve.add_argument("--config", default=_env("CONFIG", None))
    p_serve.add_argument("--host", default=_env("HOST", "127.0.0.1"))
    p_serve.add_argument("--port", type=int, default=_env("PORT", DEFAULT_TCP_PORT))
    p_serve.add_argument("--ws-port", type=int, default=_env("WS_PORT", DEFAULT_WS_PORT))
    p_serve.add_argument(
        "--plant", default=_env("PLANT", "sim"),
        help="'sim' for the built-in plant or 'tcp:<host:port>' for a remote one",
    )

    p_sim = sub.add_parser("sim", help="run the standalone plant simulator")
    p_sim.add_argument("--config", default=_env("CONFIG", None))
    p_sim.add_argument("--listen", default=_env("LISTEN", "127.0.0.1:9100"))

    p_eval = sub.add_parser("eval", help="run an observer evaluation")
    p_eval.add_argument("--config", default=_env("CONFIG", None))
    p_eval.add_argument("--traj", default=_env("TRAJ", "builtin:circle"),
                        help="'builtin:circle', 'builtin:lemniscate', 'builtin:hold' "
                             "or a JSON trajectory file")
    p_eval.add_argument("--duration-s", type=float, default=_env("DURATION_S", 60.0))
    p_eval.add_argument("--period-ms", type=float, default=_env("PERIOD_MS", 100.0))
    p_eval.add_argument("--amplitude-mm", type=float, default=_env("AMPLITUDE_MM", 6.0))
    p_eval.add_argument("--seed", type=int, default=_env("SEED", 0))
    p_eval.add_argument("--mode", choices=("chord", "cc"), default=_env("MODE", "chord"))
    p_eval.add_argument("--out", default=_env("OUT", "report.csv"))
    p_eval.add_argument("--format", choices=("csv", "json"), default=None,
                        help="default follows the --out extension")
    p_eval.add_argument("--dump", default=_env("DUMP", None),
                        help="also write per-sample estimate/truth CSV here")
    return parser


def _load_traj(args) -> TrajectorySpec:
    if args.traj.startswith("builtin:"):
        kind = args.traj.split(":", 1)[1]
        return TrajectorySpec(
            kind=kind,
            amplitude_mm=args.amplitude_mm,
            duration_s=args.duration_s,
            sample_period_ms=args.period_ms,
        )
    import json

    data = json.loads(open(args.traj).read())
    return TrajectorySpec(
        kind=data.get("kind", "waypoints"),
        amplitude_mm=float(data.get("amplitude_mm", args.amplitude_mm)),
        period_s=float(data.get("period_s", 20.0)),
        duration_s=float(data.get("duration_s", args.duration_s)),
        sample_period_ms=float(data.get("sample_period_ms", args.period_ms)),
        waypoints=[tuple(w) for w in data["waypoints"]] if "waypoints" in data else None,
    )


async def _serve_until_signal(args, config: AppConfig) -> None:
    server = await serve(config, host=args.host, port=args.port,
                         ws_port=args.ws_port, plant=args.plant)
    loop = asyncio.get_event_loop()
    stop = asyncio.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        with contextlib.suppress(NotImplementedError):
            loop.add_signal_handler(sig, stop.set)
    await stop.wait()
    await server.stop()


async def _sim_until_signal(args, config: AppConfig) -> None:
    host, _, port = args.listen.rpartition(":")
    stop = asyncio.Event()
    loop = asyncio.get_event_loop()
    for sig in (signal.SIGINT, signal.SIGTERM):
        with contextlib.suppress(NotImplementedError):
            loop.add_signal_handler(sig, stop.set)
    await run_sim(config, host or "127.0.0.1", int(port), stop_event=stop)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )
    args = _build_parser().parse_args(argv)
    config = load_config(args.config)

    if args.command == "serve":
        asyncio.run(_serve_until_signal(args, config))
        return 0

    if args.command == "sim":
        asyncio.run(_sim_until_signal(args, config))
        return 0

    if args.command == "eval":
        traj = _load_traj(args)
        samples = run_eval(config, traj, seed=args.seed, mode=args.mode)
        report = build_report(samples)
        fmt = args.format or ("json" if str(args.out).endswith(".json") else "csv")
        out = emit_report(report, fmt, args.out)
        print(f"wrote {out} ({report.sample_count} samples, "
              f"global MAE {report.global_xy.mae_mm:.3f} mm)")
        if args.dump:
            print(f"wrote {dump_samples(samples, args.dump)}")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
