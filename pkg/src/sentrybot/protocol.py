"""Framed binary wire protocol linking the front node and the central node.

Frame layout, bit-exact and normative for both peers:

    magic   2 bytes  0x50 0x42
    version 1 byte   0x01
    type    1 byte   message type tag
    length  u32 LE   payload byte count (<= 16 MiB)
    payload length bytes
    crc     u32 LE   CRC-32 (IEEE reflected, init/xor 0xFFFFFFFF)
                     over magic..payload

Numeric payload fields are little-endian; texts are u16-length-prefixed
UTF-8. Corruption is fatal for the stream: a CRC mismatch means the peer
is broken and the caller must drop the connection (no resync).
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass
from typing import Union

from .kinematics import Pose

MAGIC = b"\x50\x42"
PROTO_VERSION = 1
MAX_PAYLOAD = 16 * 1024 * 1024
_HEADER = struct.Struct("<2sBBI")
_CRC = struct.Struct("<I")

TYPE_HELLO = 0x01
TYPE_PING = 0x02
TYPE_PONG = 0x03
TYPE_DRIVE_CMD = 0x10
TYPE_STOP_CMD = 0x11
TYPE_TELEMETRY = 0x20
TYPE_FRAME_DATA = 0x30
TYPE_DETECTIONS = 0x40
TYPE_SPEAK = 0x50

ROLE_FRONT = "front"
ROLE_CENTRAL = "central"
_ROLE_CODES = {ROLE_FRONT: 0, ROLE_CENTRAL: 1}
_CODE_ROLES = {v: k for k, v in _ROLE_CODES.items()}

ENCODING_JPEG = "jpeg"


class EncodeError(ValueError):
    """Message cannot be represented on the wire."""


@dataclass(frozen=True)
class Hello:
    node_role: str
    proto_version: int = PROTO_VERSION


@dataclass(frozen=True)
class Ping:
    nonce: int


@dataclass(frozen=True)
class Pong:
    nonce: int


@dataclass(frozen=True)
class DriveCmd:
    linear: float
    angular: float
    seq: int


@dataclass(frozen=True)
class StopCmd:
    seq: int


@dataclass(frozen=True)
class Telemetry:
    pose: Pose
    battery_pct: float
    link_age_ms: int
    seq: int


@dataclass(frozen=True)
class FrameData:
    timestamp_ms: int
    payload: bytes
    encoding: str = ENCODING_JPEG


@dataclass(frozen=True)
class DetectionEntry:
    class_id: int
    score: float
    box: tuple[int, int, int, int]


@dataclass(frozen=True)
class Detections:
    timestamp_ms: int
    items: tuple[DetectionEntry, ...]


@dataclass(frozen=True)
class Speak:
    lang: str
    text: str


WireMessage = Union[Hello, Ping, Pong, DriveCmd, StopCmd, Telemetry,
                    FrameData, Detections, Speak]


class NeedMoreData:
    """Decoder verdict: the buffer holds no complete frame yet."""

    def __repr__(self) -> str:
        return "NeedMoreData()"


NEED_MORE_DATA = NeedMoreData()


@dataclass(frozen=True)
class CorruptFrame:
    """Decoder verdict: the stream is broken; drop the connection.

    reason is one of bad_magic, bad_version, oversize, bad_crc,
    bad_payload, truncated (frame cut short at end of stream).
    """

    reason: str


class ProtocolError(RuntimeError):
    """Stream-level wrapper raised by StreamDecoder on corruption."""

    def __init__(self, corrupt: CorruptFrame):
        super().__init__(f"corrupt frame: {corrupt.reason}")
        self.corrupt = corrupt


def _crc32(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


def _check_u64(value: int, name: str) -> int:
    if not 0 <= value < 1 << 64:
        raise EncodeError(f"{name} out of u64 range")
    return value


def _check_f32(value: float, name: str) -> float:
    if not math.isfinite(value):
        raise EncodeError(f"{name} must be finite")
    return value


def _pack_str16(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise EncodeError("text too long for u16 length prefix")
    return struct.pack("<H", len(raw)) + raw


def _encode_payload(m: WireMessage) -> tuple[int, bytes]:
    if isinstance(m, Hello):
        if m.node_role not in _ROLE_CODES:
            raise EncodeError(f"unknown node role {m.node_role!r}")
        if not 0 <= m.proto_version <= 0xFF:
            raise EncodeError("proto_version out of u8 range")
        return TYPE_HELLO, struct.pack("<BB", _ROLE_CODES[m.node_role], m.proto_version)
    if isinstance(m, Ping):
        return TYPE_PING, struct.pack("<Q", _check_u64(m.nonce, "nonce"))
    if isinstance(m, Pong):
        return TYPE_PONG, struct.pack("<Q", _check_u64(m.nonce, "nonce"))
    if isinstance(m, DriveCmd):
        return TYPE_DRIVE_CMD, struct.pack(
            "<ffQ", _check_f32(m.linear, "linear"), _check_f32(m.angular, "angular"),
            _check_u64(m.seq, "seq"))
    if isinstance(m, StopCmd):
        return TYPE_STOP_CMD, struct.pack("<Q", _check_u64(m.seq, "seq"))
    if isinstance(m, Telemetry):
        p = m.pose
        for v, name in ((p.x, "pose.x"), (p.y, "pose.y"), (p.theta, "pose.theta")):
            if not math.isfinite(v):
                raise EncodeError(f"{name} must be finite")
        if not 0.0 <= m.battery_pct <= 100.0:
            raise EncodeError("battery_pct must lie in [0, 100]")
        if not 0 <= m.link_age_ms <= 0xFFFFFFFF:
            raise EncodeError("link_age_ms out of u32 range")
        return TYPE_TELEMETRY, struct.pack(
            "<dddfIQ", p.x, p.y, p.theta, m.battery_pct, m.link_age_ms,
            _check_u64(m.seq, "seq"))
    if isinstance(m, FrameData):
        if m.encoding != ENCODING_JPEG:
            raise EncodeError(f"unsupported frame encoding {m.encoding!r}")
        return TYPE_FRAME_DATA, struct.pack(
            "<QB", _check_u64(m.timestamp_ms, "timestamp_ms"), 1) + m.payload
    if isinstance(m, Detections):
        if len(m.items) > 0xFFFF:
            raise EncodeError("too many detection items")
        parts = [struct.pack("<QH", _check_u64(m.timestamp_ms, "timestamp_ms"),
                             len(m.items))]
        for item in m.items:
            if not 0 <= item.class_id <= 0xFFFF:
                raise EncodeError("class_id out of u16 range")
            if not (math.isfinite(item.score) and 0.0 <= item.score <= 1.0):
                raise EncodeError("score must lie in [0, 1]")
            parts.append(struct.pack("<Hf4i", item.class_id, item.score, *item.box))
        return TYPE_DETECTIONS, b"".join(parts)
    if isinstance(m, Speak):
        if not m.lang:
            raise EncodeError("lang must be non-empty")
        return TYPE_SPEAK, _pack_str16(m.lang) + _pack_str16(m.text)
    raise EncodeError(f"not a wire message: {type(m).__name__}")


def encode_frame(m: WireMessage) -> bytes:
    """Serialize one message as a complete frame."""
    msg_type, payload = _encode_payload(m)
    if len(payload) > MAX_PAYLOAD:
        raise EncodeError(f"payload of {len(payload)} bytes exceeds the frame cap")
    head = _HEADER.pack(MAGIC, PROTO_VERSION, msg_type, len(payload))
    return head + payload + _CRC.pack(_crc32(head + payload))


def _read_str16(buf: bytes, off: int) -> tuple[str, int]:
    if off + 2 > len(buf):
        raise ValueError("short string header")
    (n,) = struct.unpack_from("<H", buf, off)
    off += 2
    if off + n > len(buf):
        raise ValueError("short string body")
    return buf[off : off + n].decode("utf-8"), off + n


def _decode_payload(msg_type: int, payload: bytes) -> WireMessage:
    if msg_type == TYPE_HELLO:
        role_code, version = struct.unpack("<BB", payload)
        if role_code not in _CODE_ROLES:
            raise ValueError("unknown role code")
        return Hello(_CODE_ROLES[role_code], version)
    if msg_type == TYPE_PING:
        return Ping(*struct.unpack("<Q", payload))
    if msg_type == TYPE_PONG:
        return Pong(*struct.unpack("<Q", payload))
    if msg_type == TYPE_DRIVE_CMD:
        linear, angular, seq = struct.unpack("<ffQ", payload)
        if not (math.isfinite(linear) and math.isfinite(angular)):
            raise ValueError("non-finite drive command")
        return DriveCmd(linear, angular, seq)
    if msg_type == TYPE_STOP_CMD:
        return StopCmd(*struct.unpack("<Q", payload))
    if msg_type == TYPE_TELEMETRY:
        x, y, theta, battery, link_age, seq = struct.unpack("<dddfIQ", payload)
        if not all(math.isfinite(v) for v in (x, y, theta, battery)):
            raise ValueError("non-finite telemetry")
        if not 0.0 <= battery <= 100.0:
            raise ValueError("battery out of range")
        return Telemetry(Pose(x, y, theta), battery, link_age, seq)
    if msg_type == TYPE_FRAME_DATA:
        if len(payload) < 9:
            raise ValueError("short frame header")
        ts, enc = struct.unpack_from("<QB", payload, 0)
        if enc != 1:
            raise ValueError("unknown frame encoding")
        return FrameData(ts, payload[9:])
    if msg_type == TYPE_DETECTIONS:
        if len(payload) < 10:
            raise ValueError("short detections header")
        ts, count = struct.unpack_from("<QH", payload, 0)
        if len(payload) != 10 + 22 * count:
            raise ValueError("detections length mismatch")
        items = []
        for k in range(count):
            class_id, score, x0, y0, x1, y1 = struct.unpack_from(
                "<Hf4i", payload, 10 + 22 * k)
            if not (math.isfinite(score) and 0.0 <= score <= 1.0):
                raise ValueError("score out of range")
            items.append(DetectionEntry(class_id, score, (x0, y0, x1, y1)))
        return Detections(ts, tuple(items))
    if msg_type == TYPE_SPEAK:
        lang, off = _read_str16(payload, 0)
        text, off = _read_str16(payload, off)
        if off != len(payload) or not lang:
            raise ValueError("malformed speak payload")
        return Speak(lang, text)
    raise ValueError(f"unknown message type 0x{msg_type:02x}")


def decode_frame(buf: bytes | bytearray | memoryview, eof: bool = False):
    """Incrementally decode the first frame in `buf`.

    Returns (message, bytes_consumed) on success, NEED_MORE_DATA while the
    buffer holds only a prefix, or a CorruptFrame verdict. With eof=True a
    dangling partial frame is corruption (reason "truncated") instead of
    NEED_MORE_DATA, since no more bytes can arrive.
    """
    buf = bytes(buf)
    n = len(buf)

    def _incomplete():
        if eof and n > 0:
            return CorruptFrame("truncated")
        return NEED_MORE_DATA

    if n >= 1 and buf[0] != MAGIC[0]:
        return CorruptFrame("bad_magic")
    if n >= 2 and buf[1] != MAGIC[1]:
        return CorruptFrame("bad_magic")
    if n >= 3 and buf[2] != PROTO_VERSION:
        return CorruptFrame("bad_version")
    if n < _HEADER.size:
        return _incomplete()

    _, _, msg_type, length = _HEADER.unpack_from(buf, 0)
    if length > MAX_PAYLOAD:
        return CorruptFrame("oversize")
    total = _HEADER.size + length + _CRC.size
    if n < total:
        return _incomplete()

    body = buf[: _HEADER.size + length]
    (crc,) = _CRC.unpack_from(buf, _HEADER.size + length)
    if _crc32(body) != crc:
        return CorruptFrame("bad_crc")
    try:
        message = _decode_payload(msg_type, buf[_HEADER.size : _HEADER.size + length])
    except (ValueError, struct.error):
        return CorruptFrame("bad_payload")
    return message, total


def decode_all(buf: bytes) -> tuple[list[WireMessage], int]:
    """Decode every complete frame in the buffer; raises on corruption."""
    out: list[WireMessage] = []
    pos = 0
    while pos < len(buf):
        verdict = decode_frame(buf[pos:])
        if verdict is NEED_MORE_DATA:
            break
        if isinstance(verdict, CorruptFrame):
            raise ProtocolError(verdict)
        message, consumed = verdict
        out.append(message)
        pos += consumed
    return out, pos


class StreamDecoder:
    """Per-connection decoder state over an ordered byte stream."""

    def __init__(self) -> None:
        self._buf = bytearray()

    @property
    def pending(self) -> int:
        return len(self._buf)

    def feed(self, data: bytes) -> list[WireMessage]:
        """Buffer bytes and return every newly completed message."""
        self._buf += data
        messages, consumed = decode_all(bytes(self._buf))
        del self._buf[:consumed]
        return messages

    def close(self) -> None:
        """Signal end of stream; pending bytes mean a truncated frame."""
        if self._buf:
            verdict = decode_frame(bytes(self._buf), eof=True)
            if isinstance(verdict, CorruptFrame):
                raise ProtocolError(verdict)
            raise ProtocolError(CorruptFrame("truncated"))
