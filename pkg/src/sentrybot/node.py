"""Asyncio transport loop for front nodes (the real agent or the sim).

One connection at a time speaks the wire protocol; timer tasks drive the
control tick and the camera cadence. Tick dt is the nominal period, not
the measured one, so simulated worlds advance deterministically even
when the event loop jitters.
"""

from __future__ import annotations

import asyncio
import logging
import time

from . import protocol
from .agent import FrontAgent
from .sim import ScriptFeeder

log = logging.getLogger(__name__)


def _now_ms() -> int:
    return int(time.time() * 1000)


class FrontNode:
    """Runs a FrontAgent over one wire-protocol connection."""

    def __init__(self, agent: FrontAgent, feeder: ScriptFeeder | None = None):
        self.agent = agent
        self.feeder = feeder
        self._writer: asyncio.StreamWriter | None = None
        self._lock = asyncio.Lock()
        self._sim_time_s = 0.0

    async def serve(self, host: str, port: int) -> asyncio.AbstractServer:
        server = await asyncio.start_server(self._accept, host, port)
        log.info("front node listening on %s:%d", host, port)
        return server

    async def connect(self, host: str, port: int) -> None:
        reader, writer = await asyncio.open_connection(host, port)
        log.info("front node dialed %s:%d", host, port)
        await self._run_connection(reader, writer)

    async def _accept(self, reader: asyncio.StreamReader,
                      writer: asyncio.StreamWriter) -> None:
        if self._writer is not None:
            writer.close()  # one session at a time
            return
        await self._run_connection(reader, writer)

    async def _run_connection(self, reader: asyncio.StreamReader,
                              writer: asyncio.StreamWriter) -> None:
        self._writer = writer
        decoder = protocol.StreamDecoder()
        tick = asyncio.ensure_future(self._tick_loop())
        frames = asyncio.ensure_future(self._frame_loop())
        try:
            await self._send(protocol.Hello(protocol.ROLE_FRONT))
            while True:
                data = await reader.read(65536)
                if not data:
                    break
                try:
                    messages = decoder.feed(data)
                except protocol.ProtocolError as exc:
                    log.warning("dropping connection: %s", exc)
                    break
                for m in messages:
                    for reply in self.agent.handle_message(m, _now_ms()):
                        await self._send(reply)
        except ConnectionError:
            pass
        finally:
            tick.cancel()
            frames.cancel()
            self._writer = None
            writer.close()

    async def _send(self, m: protocol.WireMessage) -> None:
        writer = self._writer
        if writer is None:
            return
        async with self._lock:
            writer.write(protocol.encode_frame(m))
            await writer.drain()

    async def _tick_loop(self) -> None:
        period = 1.0 / self.agent.config.telemetry_hz
        while True:
            await asyncio.sleep(period)
            now = _now_ms()
            if self.feeder is not None:
                self._sim_time_s += period
                for m in self.feeder.due(self._sim_time_s):
                    self.agent.handle_message(m, now)
            telemetry, _applied = self.agent.tick(period, now)
            await self._send(telemetry)

    async def _frame_loop(self) -> None:
        if self.agent.camera is None:
            return
        period = 1.0 / self.agent.config.frame_hz
        while True:
            await asyncio.sleep(period)
            frame = self.agent.next_frame()
            if frame is not None:
                await self._send(frame)
