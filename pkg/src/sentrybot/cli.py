"""Console entry points for the simulator, central server and front agent."""

from __future__ import annotations

import argparse
import asyncio
import dataclasses
import itertools
import logging
import os
import sys
import time
from pathlib import Path

from .agent import AgentConfig, ClearDepth, FrontAgent, load_agent_config
from .detection import FixtureBackend, GridConfig, OracleBackend
from .node import FrontNode
from .server import DEFAULT_HTTP_LISTEN, SessionCore
from .service import CentralService
from .sim import (ScriptFeeder, SimCamera, WorldHandle, build_world,
                  load_scenario, make_sim_agent)


def _host_port(value: str, default_host: str = "0.0.0.0") -> tuple[str, int]:
    if ":" in value:
        host, _, port = value.rpartition(":")
        return host or default_host, int(port)
    return default_host, int(value)


def sim_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sentrybot-sim",
        description="Deterministic robot simulator speaking the front-node protocol")
    parser.add_argument("--scenario", required=True, help="scenario file path")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--connect", metavar="HOST:PORT",
                      help="dial the central server as the front node")
    mode.add_argument("--serve", metavar="PORT", type=int,
                      help="listen for the central server")
    parser.add_argument("--telemetry-hz", type=float, default=20.0)
    parser.add_argument("--frame-hz", type=float, default=10.0)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    cfg = GridConfig.coco_default()
    world = build_world(scenario, class_names=cfg.class_names)
    handle = WorldHandle(world)
    agent_cfg = AgentConfig(geometry=world.geometry,
                            telemetry_hz=args.telemetry_hz,
                            frame_hz=args.frame_hz)
    agent = make_sim_agent(handle, SimCamera(), cfg, agent_cfg)
    node = FrontNode(agent, ScriptFeeder(scenario.script))

    async def run():
        if args.serve is not None:
            server = await node.serve("0.0.0.0", args.serve)
            async with server:
                await server.serve_forever()
        else:
            host, port = _host_port(args.connect)
            while True:
                try:
                    await node.connect(host, port)
                except OSError:
                    pass
                await asyncio.sleep(1.0)

    return _run_forever(run())


def server_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sentrybot-server",
        description="Central node: detection pipeline, event log, operator API")
    parser.add_argument("--listen", default=DEFAULT_HTTP_LISTEN,
                        metavar="HOST:PORT", help="operator HTTP address")
    parser.add_argument("--agent-addr", metavar="HOST:PORT",
                        help="dial the front node at this address")
    parser.add_argument("--agent-listen", metavar="PORT", type=int,
                        help="accept a front-node connection on this port")
    parser.add_argument("--backend", default="oracle",
                        help="oracle | fixture:PATH")
    parser.add_argument("--log-dir", default="./logs")
    parser.add_argument("--console-dir", default=None,
                        help="static operator console directory "
                             "(defaults to ./frontend/dist when present)")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if args.backend == "oracle":
        backend = OracleBackend()
    elif args.backend.startswith("fixture:"):
        backend = FixtureBackend(args.backend.split(":", 1)[1])
    else:
        parser.error("--backend must be 'oracle' or 'fixture:PATH'")

    console_dir = args.console_dir
    if console_dir is None and Path("frontend/dist").is_dir():
        console_dir = "frontend/dist"

    core = SessionCore(backend, GridConfig.coco_default())
    service = CentralService(core, args.log_dir, console_dir=console_dir)

    async def run():
        host, port = _host_port(args.listen)
        http_server = await service.start_http(host, port)
        if args.agent_listen is not None:
            await service.listen_for_agent("0.0.0.0", args.agent_listen)
        dial_task = None
        if args.agent_addr is not None:
            agent_host, agent_port = _host_port(args.agent_addr, "127.0.0.1")
            # keep a strong reference: the loop only holds tasks weakly
            dial_task = asyncio.ensure_future(
                service.dial_agent(agent_host, agent_port))
        try:
            async with http_server:
                await http_server.serve_forever()
        finally:
            if dial_task is not None:
                dial_task.cancel()

    return _run_forever(run())


class _DirectoryCamera:
    """Cycles JPEG files from a directory as camera frames."""

    def __init__(self, directory):
        self._files = sorted(Path(directory).glob("*.jpg")) + \
            sorted(Path(directory).glob("*.jpeg"))
        if not self._files:
            raise SystemExit(f"no jpeg files in {directory}")
        self._cycle = itertools.cycle(self._files)
        self._last_ts = -1

    def next_frame(self) -> tuple[int, bytes]:
        ts = int(time.time() * 1000)
        if ts <= self._last_ts:
            ts = self._last_ts + 1
        self._last_ts = ts
        return ts, next(self._cycle).read_bytes()


def agent_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sentrybot-agent",
        description="Front-node agent (bench build: no motors attached)")
    parser.add_argument("--listen", default=os.environ.get("AGENT_LISTEN", "0.0.0.0:7071"),
                        metavar="HOST:PORT")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--frames", help="directory of JPEGs to stream as camera frames")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    config = load_agent_config(args.config) if args.config else AgentConfig()
    camera = _DirectoryCamera(args.frames) if args.frames else None
    agent = FrontAgent(config, ClearDepth(), camera=camera)
    node = FrontNode(agent)

    async def run():
        host, port = _host_port(args.listen)
        server = await node.serve(host, port)
        async with server:
            await server.serve_forever()

    return _run_forever(run())


def _run_forever(coro) -> int:
    try:
        asyncio.run(coro)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
    return 0
