"""Minimal asyncio HTTP/1.1 server with MJPEG and WebSocket support.

Just enough protocol for the operator console: request parsing, JSON
responses, a multipart/x-mixed-replace stream, the RFC 6455 handshake
plus server-push frames, and static files. Connections are one request
each (Connection: close) except the two hijacked long-lived routes.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import json
import logging
import mimetypes
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Awaitable, Callable
from urllib.parse import parse_qs, urlsplit

log = logging.getLogger(__name__)

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
MAX_BODY = 4 * 1024 * 1024
MJPEG_BOUNDARY = "sentryframe"

_STATUS_TEXT = {200: "OK", 400: "Bad Request", 404: "Not Found",
                405: "Method Not Allowed", 422: "Unprocessable Entity",
                500: "Internal Server Error", 503: "Service Unavailable"}


@dataclass
class Request:
    method: str
    path: str
    query: dict[str, list[str]]
    headers: dict[str, str]
    body: bytes

    def query_int(self, name: str, default: int) -> int:
        values = self.query.get(name)
        if not values:
            return default
        return int(values[0])


@dataclass
class Response:
    status: int = 200
    body: bytes = b""
    content_type: str = "application/json"
    headers: dict[str, str] = field(default_factory=dict)

    @classmethod
    def json(cls, obj, status: int = 200) -> "Response":
        return cls(status, json.dumps(obj).encode("utf-8"))

    @classmethod
    def text(cls, text: str, status: int = 200) -> "Response":
        return cls(status, text.encode("utf-8"), "text/plain; charset=utf-8")


Handler = Callable[[Request, asyncio.StreamReader, asyncio.StreamWriter],
                   Awaitable[Response | None]]


async def read_request(reader: asyncio.StreamReader) -> Request | None:
    try:
        line = await reader.readline()
    except (ConnectionError, asyncio.LimitOverrunError):
        return None
    if not line:
        return None
    parts = line.decode("latin-1").strip().split()
    if len(parts) != 3:
        return None
    method, target, _version = parts
    headers: dict[str, str] = {}
    while True:
        raw = await reader.readline()
        if raw in (b"\r\n", b"\n", b""):
            break
        name, _, value = raw.decode("latin-1").partition(":")
        headers[name.strip().lower()] = value.strip()
    length = int(headers.get("content-length", "0") or 0)
    if length > MAX_BODY:
        return None
    body = await reader.readexactly(length) if length else b""
    split = urlsplit(target)
    return Request(method.upper(), split.path, parse_qs(split.query), headers, body)


def _head(status: int, content_type: str, length: int | None,
          extra: dict[str, str] | None = None) -> bytes:
    lines = [f"HTTP/1.1 {status} {_STATUS_TEXT.get(status, 'Status')}"]
    if content_type:
        lines.append(f"Content-Type: {content_type}")
    if length is not None:
        lines.append(f"Content-Length: {length}")
    lines.append("Connection: close")
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    return ("\r\n".join(lines) + "\r\n\r\n").encode("latin-1")


async def write_response(writer: asyncio.StreamWriter, r: Response) -> None:
    writer.write(_head(r.status, r.content_type, len(r.body), r.headers))
    writer.write(r.body)
    await writer.drain()


class HttpServer:
    """Route table plus the per-connection read/dispatch loop."""

    def __init__(self):
        self._routes: dict[tuple[str, str], Handler] = {}
        self._static_dir: Path | None = None
        self._fallback: Handler | None = None

    def route(self, method: str, path: str, handler: Handler) -> None:
        self._routes[(method, path)] = handler

    def set_static(self, directory) -> None:
        self._static_dir = Path(directory) if directory else None

    def set_fallback(self, handler: Handler) -> None:
        self._fallback = handler

    async def handle_connection(self, reader: asyncio.StreamReader,
                                writer: asyncio.StreamWriter) -> None:
        try:
            request = await read_request(reader)
            if request is None:
                return
            response = await self._dispatch(request, reader, writer)
            if response is not None:
                await write_response(writer, response)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        except Exception:
            log.exception("http handler failed")
            try:
                await write_response(writer, Response.json(
                    {"ok": False, "error": {"type": "internal", "message": "handler failed"}},
                    500))
            except ConnectionError:
                pass
        finally:
            try:
                writer.close()
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    async def _dispatch(self, request: Request, reader, writer) -> Response | None:
        handler = self._routes.get((request.method, request.path))
        if handler is not None:
            return await handler(request, reader, writer)
        if request.method == "GET":
            served = self._try_static(request.path)
            if served is not None:
                return served
        if self._fallback is not None:
            return await self._fallback(request, reader, writer)
        return Response.json({"ok": False, "error": {"type": "not_found",
                                                     "message": request.path}}, 404)

    def _try_static(self, path: str) -> Response | None:
        if self._static_dir is None:
            return None
        name = "index.html" if path == "/" else path.lstrip("/")
        target = (self._static_dir / name).resolve()
        root = self._static_dir.resolve()
        if root not in target.parents and target != root:
            return None
        if not target.is_file():
            return None
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        return Response(200, target.read_bytes(), ctype)


async def serve_mjpeg(writer: asyncio.StreamWriter,
                      frames: "asyncio.Queue[bytes]") -> None:
    """Forward JPEG frames as multipart/x-mixed-replace until disconnect."""
    writer.write(_head(200, f"multipart/x-mixed-replace; boundary={MJPEG_BOUNDARY}",
                       None))
    await writer.drain()
    while True:
        jpeg = await frames.get()
        writer.write(f"--{MJPEG_BOUNDARY}\r\n"
                     f"Content-Type: image/jpeg\r\n"
                     f"Content-Length: {len(jpeg)}\r\n\r\n".encode("latin-1"))
        writer.write(jpeg)
        writer.write(b"\r\n")
        await writer.drain()


def ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _WS_GUID).encode("latin-1")).digest()
    return base64.b64encode(digest).decode("latin-1")


async def ws_handshake(request: Request, writer: asyncio.StreamWriter) -> bool:
    key = request.headers.get("sec-websocket-key")
    if key is None or "upgrade" not in request.headers.get("connection", "").lower():
        await write_response(writer, Response.text("expected websocket upgrade", 400))
        return False
    head = ("HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {ws_accept_key(key)}\r\n\r\n")
    writer.write(head.encode("latin-1"))
    await writer.drain()
    return True


def ws_frame(payload: bytes, opcode: int = 0x1) -> bytes:
    """One unmasked server-to-client frame."""
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 1 << 16:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


async def ws_read_frame(reader: asyncio.StreamReader) -> tuple[int, bytes] | None:
    """Read one client frame (masked per RFC 6455); None on EOF."""
    try:
        first = await reader.readexactly(2)
    except (asyncio.IncompleteReadError, ConnectionError):
        return None
    opcode = first[0] & 0x0F
    masked = first[1] & 0x80
    n = first[1] & 0x7F
    if n == 126:
        (n,) = struct.unpack(">H", await reader.readexactly(2))
    elif n == 127:
        (n,) = struct.unpack(">Q", await reader.readexactly(8))
    mask = await reader.readexactly(4) if masked else b"\x00" * 4
    payload = await reader.readexactly(n) if n else b""
    if masked:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return opcode, payload


async def ws_send_json(writer: asyncio.StreamWriter, obj) -> None:
    writer.write(ws_frame(json.dumps(obj).encode("utf-8")))
    await writer.drain()
