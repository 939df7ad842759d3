"""Central-node service: one serialized session loop, the front-node
link, the detection worker, plan execution, and the operator HTTP/WS API.

HTTP handlers never touch session state directly; they post requests
into the loop and await the reply. Pipeline work runs on a worker thread
and its results come back as loop events, so a slow inference never
stalls ingest.
"""

from __future__ import annotations

import asyncio
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import httpd, protocol
from .clocks import WallClock
from .detection import PipelineError
from .eventlog import EventLog, EventRecord, iter_lines_since
from .kinematics import Twist
from .server import CommandOutcome, SessionCore, detections_to_json

log = logging.getLogger(__name__)

_BUILTIN_INDEX = """<!doctype html>
<html><head><title>sentrybot</title></head>
<body style="font-family: sans-serif; background:#202125; color:#eee">
<h1>sentrybot central server</h1>
<p>No operator console is built. API endpoints:</p>
<ul>
<li><a href="/snapshot">GET /snapshot</a></li>
<li><a href="/detections">GET /detections</a></li>
<li><a href="/events">GET /events?since=MS</a></li>
<li><a href="/stream">GET /stream</a> (MJPEG)</li>
<li>POST /command, WebSocket /ws</li>
</ul>
</body></html>
"""


@dataclass
class _OpRequest:
    body: dict
    future: asyncio.Future


class CentralService:
    """Owns the SessionCore and serializes every touch of it."""

    def __init__(self, core: SessionCore, log_dir, clock=None,
                 console_dir=None):
        self.core = core
        self.clock = clock or WallClock()
        self.events = EventLog(log_dir, self.clock.now_ms())
        self._queue: asyncio.Queue = asyncio.Queue()
        self._executor = ThreadPoolExecutor(max_workers=1)
        self.wire_seen = 0  # inbound messages fully dequeued; test harnesses sync on it
        self._inflight_frames = 0
        self._pending_frame: protocol.FrameData | None = None
        self._agent_writer: asyncio.StreamWriter | None = None
        self._plan_task: asyncio.Task | None = None
        self._loop_task: asyncio.Task | None = None
        self._mjpeg_clients: list[asyncio.Queue] = []
        self._ws_clients: list[asyncio.Queue] = []
        self._http = httpd.HttpServer()
        self._console_dir = console_dir
        self._wire_routes()

    # -- lifecycle -------------------------------------------------------

    async def start_http(self, host: str, port: int) -> asyncio.AbstractServer:
        self._loop_task = asyncio.ensure_future(self._session_loop())
        server = await asyncio.start_server(self._http.handle_connection, host, port)
        log.info("operator API on %s:%d", host, port)
        return server

    def ensure_loop(self) -> None:
        if self._loop_task is None:
            self._loop_task = asyncio.ensure_future(self._session_loop())

    async def close(self) -> None:
        if self._plan_task is not None:
            self._plan_task.cancel()
        if self._loop_task is not None:
            self._loop_task.cancel()
        self._executor.shutdown(wait=False)
        self.events.close()

    # -- agent link --------------------------------------------------------

    async def dial_agent(self, host: str, port: int, retry_s: float = 1.0) -> None:
        """Keep one front-node session alive, redialing on loss."""
        while True:
            try:
                reader, writer = await asyncio.open_connection(host, port)
            except OSError:
                await asyncio.sleep(retry_s)
                continue
            await self._run_agent_link(reader, writer)
            await asyncio.sleep(retry_s)

    async def listen_for_agent(self, host: str, port: int) -> asyncio.AbstractServer:
        async def accept(reader, writer):
            if self._agent_writer is not None:
                writer.close()
                return
            await self._run_agent_link(reader, writer)

        return await asyncio.start_server(accept, host, port)

    async def _run_agent_link(self, reader: asyncio.StreamReader,
                              writer: asyncio.StreamWriter) -> None:
        self._agent_writer = writer
        self.core.connected = True
        decoder = protocol.StreamDecoder()
        try:
            writer.write(protocol.encode_frame(protocol.Hello(protocol.ROLE_CENTRAL)))
            await writer.drain()
            while True:
                data = await reader.read(65536)
                if not data:
                    break
                try:
                    messages = decoder.feed(data)
                except protocol.ProtocolError as exc:
                    log.warning("agent link corrupt (%s); dropping", exc)
                    break
                for m in messages:
                    await self._queue.put(("wire", m))
        except ConnectionError:
            pass
        finally:
            self.core.connected = False
            self._agent_writer = None
            writer.close()

    async def _send_to_agent(self, m: protocol.WireMessage) -> None:
        writer = self._agent_writer
        if writer is None:
            return
        try:
            writer.write(protocol.encode_frame(m))
            await writer.drain()
        except ConnectionError:
            log.warning("agent link lost while sending")

    # -- the session loop ----------------------------------------------------

    async def _session_loop(self) -> None:
        while True:
            kind, *rest = await self._queue.get()
            try:
                if kind == "wire":
                    await self._on_wire(rest[0])
                elif kind == "detections":
                    await self._on_detection_result(rest[0])
                elif kind == "op":
                    await self._on_operator(rest[0])
                elif kind == "plan_step":
                    await self._on_plan_step(rest[0])
                elif kind == "drain":
                    rest[0].set_result(None)
            except Exception:
                log.exception("session loop event %s failed", kind)
            finally:
                self._queue.task_done()

    async def _on_wire(self, m: protocol.WireMessage) -> None:
        self.wire_seen += 1
        now = self.clock.now_ms()
        if isinstance(m, protocol.FrameData):
            self.core.store_frame(m)
            self._broadcast_frame(m.payload)
            if self._inflight_frames > 0:
                self._pending_frame = m  # supersedes any queued frame
                return
            self._submit_frame(m)
            return
        replies, records = self.core.ingest(m, now)
        for r in records:
            self._append(r)
        for reply in replies:
            await self._send_to_agent(reply)
        if records:
            self._push_snapshot()

    def _submit_frame(self, m: protocol.FrameData) -> None:
        self._inflight_frames += 1
        loop = asyncio.get_running_loop()
        future = loop.run_in_executor(self._executor, self.core.detect_frame, m)

        def done(fut):
            self._inflight_frames -= 1
            try:
                result = fut.result()
            except Exception as exc:  # executor teardown etc.
                result = PipelineError(m.timestamp_ms, str(exc))
            self._queue.put_nowait(("detections", result))

        future.add_done_callback(done)

    async def _on_detection_result(self, result) -> None:
        for r in self.core.store_detection_result(result, self.clock.now_ms()):
            self._append(r)
        if self._pending_frame is not None:
            nxt, self._pending_frame = self._pending_frame, None
            self._submit_frame(nxt)
        self._push_snapshot()

    async def _on_operator(self, op: _OpRequest) -> None:
        outcome = self.core.operator_command(op.body, self.clock.now_ms())
        for r in outcome.records:
            self._append(r)
        for m in outcome.messages:
            await self._send_to_agent(m)
        if outcome.plan is not None:
            self._start_plan(outcome.plan)
        if "dialog" in outcome.response:
            self._push_prompt(outcome.response["dialog"])
        if not op.future.done():
            op.future.set_result(outcome)

    async def _on_plan_step(self, step) -> None:
        now = self.clock.now_ms()
        if step == "stop":
            m, rec = self.core.issue_stop(now)
        else:
            m, rec = self.core.issue_drive(step, now)
        self._append(rec)
        await self._send_to_agent(m)

    def _start_plan(self, plan: list[tuple[Twist, float]]) -> None:
        if self._plan_task is not None and not self._plan_task.done():
            self._plan_task.cancel()
        self._plan_task = asyncio.ensure_future(self._run_plan(plan))

    async def _run_plan(self, plan: list[tuple[Twist, float]]) -> None:
        for twist, duration in plan:
            await self._queue.put(("plan_step", twist))
            if duration > 0:
                await asyncio.sleep(duration)
        await self._queue.put(("plan_step", "stop"))

    def _append(self, record: EventRecord) -> None:
        self.events.append(record)

    async def drain(self) -> None:
        """Wait until every queued event and in-flight inference settled."""
        while True:
            future = asyncio.get_running_loop().create_future()
            await self._queue.put(("drain", future))
            await future
            if self._inflight_frames == 0 and self._queue.empty():
                return

    # -- broadcasting ---------------------------------------------------------

    def _broadcast_frame(self, jpeg: bytes) -> None:
        for q in list(self._mjpeg_clients):
            if q.full():
                try:
                    q.get_nowait()
                except asyncio.QueueEmpty:
                    pass
            q.put_nowait(jpeg)

    def _push_snapshot(self) -> None:
        if not self._ws_clients:
            return
        payload = {"type": "snapshot",
                   "data": self.core.snapshot(self.clock.now_ms(),
                                              self.events.healthy)}
        self._push_ws(payload)

    def _push_prompt(self, dialog_view: dict) -> None:
        self._push_ws({"type": "prompt", "data": dialog_view})

    def _push_ws(self, payload: dict) -> None:
        for q in list(self._ws_clients):
            if q.full():
                try:
                    q.get_nowait()
                except asyncio.QueueEmpty:
                    pass
            q.put_nowait(payload)

    # -- HTTP ----------------------------------------------------------------

    def _wire_routes(self) -> None:
        self._http.route("GET", "/snapshot", self._h_snapshot)
        self._http.route("GET", "/detections", self._h_detections)
        self._http.route("GET", "/events", self._h_events)
        self._http.route("POST", "/command", self._h_command)
        self._http.route("GET", "/stream", self._h_stream)
        self._http.route("GET", "/ws", self._h_ws)
        self._http.route("GET", "/", self._h_index)
        if self._console_dir is not None and Path(self._console_dir).is_dir():
            self._http.set_static(self._console_dir)

    async def _h_index(self, request, reader, writer):
        if self._console_dir is not None:
            index = Path(self._console_dir) / "index.html"
            if index.is_file():
                return httpd.Response(200, index.read_bytes(),
                                      "text/html; charset=utf-8")
        return httpd.Response(200, _BUILTIN_INDEX.encode("utf-8"),
                              "text/html; charset=utf-8")

    async def _h_snapshot(self, request, reader, writer):
        return httpd.Response.json(
            self.core.snapshot(self.clock.now_ms(), self.events.healthy))

    async def _h_detections(self, request, reader, writer):
        return httpd.Response.json(detections_to_json(self.core.detections))

    async def _h_events(self, request, reader, writer):
        try:
            since = request.query_int("since", -1)
        except ValueError:
            return httpd.Response.json(
                {"ok": False, "error": {"type": "bad_request",
                                        "message": "since must be an integer"}}, 400)
        if not self.events.healthy:
            return httpd.Response.json(
                {"ok": False, "error": {"type": "log_unhealthy",
                                        "message": "event log lost its disk"}}, 503)
        lines = "\n".join(iter_lines_since(self.events.path, since))
        return httpd.Response(200, (lines + "\n" if lines else "").encode("utf-8"),
                              "application/x-ndjson")

    async def _h_command(self, request, reader, writer):
        try:
            body = json.loads(request.body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return httpd.Response.json(
                {"ok": False, "error": {"type": "bad_request",
                                        "message": "body must be JSON"}}, 400)
        future = asyncio.get_running_loop().create_future()
        await self._queue.put(("op", _OpRequest(body, future)))
        outcome: CommandOutcome = await future
        return httpd.Response.json(outcome.response, outcome.status)

    async def _h_stream(self, request, reader, writer):
        queue: asyncio.Queue = asyncio.Queue(maxsize=4)
        self._mjpeg_clients.append(queue)
        if self.core.frame is not None:
            queue.put_nowait(self.core.frame[1])
        try:
            await httpd.serve_mjpeg(writer, queue)
        except (ConnectionError, OSError):
            pass
        finally:
            self._mjpeg_clients.remove(queue)
        return None

    async def _h_ws(self, request, reader, writer):
        if not await httpd.ws_handshake(request, writer):
            return None
        queue: asyncio.Queue = asyncio.Queue(maxsize=16)
        self._ws_clients.append(queue)
        queue.put_nowait({"type": "snapshot",
                          "data": self.core.snapshot(self.clock.now_ms(),
                                                     self.events.healthy)})

        async def reader_side():
            while True:
                frame = await httpd.ws_read_frame(reader)
                if frame is None or frame[0] == 0x8:  # close
                    return
                if frame[0] == 0x9:  # ping
                    writer.write(httpd.ws_frame(frame[1], 0xA))
                    await writer.drain()

        reader_task = asyncio.ensure_future(reader_side())
        try:
            while not reader_task.done():
                get_task = asyncio.ensure_future(queue.get())
                done, _ = await asyncio.wait({get_task, reader_task},
                                             return_when=asyncio.FIRST_COMPLETED)
                if get_task in done:
                    await httpd.ws_send_json(writer, get_task.result())
                else:
                    get_task.cancel()
        except (ConnectionError, OSError):
            pass
        finally:
            reader_task.cancel()
            self._ws_clients.remove(queue)
        return None
