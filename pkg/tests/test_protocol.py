import math
import random
import struct

import pytest

from sentrybot import protocol as P
from sentrybot.kinematics import Pose

from support import crc32_reference


def f32(value: float) -> float:
    """Round to the nearest float32 so wire round-trips compare equal."""
    return struct.unpack("<f", struct.pack("<f", value))[0]


def random_message(rng: random.Random, variant: type) -> P.WireMessage:
    if variant is P.Hello:
        return P.Hello(rng.choice((P.ROLE_FRONT, P.ROLE_CENTRAL)), rng.randrange(256))
    if variant is P.Ping:
        return P.Ping(rng.randrange(1 << 64))
    if variant is P.Pong:
        return P.Pong(rng.randrange(1 << 64))
    if variant is P.DriveCmd:
        return P.DriveCmd(f32(rng.uniform(-2, 2)), f32(rng.uniform(-7, 7)),
                          rng.randrange(1 << 64))
    if variant is P.StopCmd:
        return P.StopCmd(rng.randrange(1 << 64))
    if variant is P.Telemetry:
        return P.Telemetry(
            Pose(rng.uniform(-100, 100), rng.uniform(-100, 100),
                 rng.uniform(-math.pi, math.pi)),
            f32(rng.uniform(0, 100)), rng.randrange(1 << 32), rng.randrange(1 << 64))
    if variant is P.FrameData:
        return P.FrameData(rng.randrange(1 << 48),
                           rng.randbytes(rng.randrange(0, 300)))
    if variant is P.Detections:
        items = tuple(
            P.DetectionEntry(rng.randrange(1 << 16), f32(rng.random()),
                             (rng.randrange(-10, 2000), rng.randrange(-10, 2000),
                              rng.randrange(-10, 2000), rng.randrange(-10, 2000)))
            for _ in range(rng.randrange(0, 12)))
        return P.Detections(rng.randrange(1 << 48), items)
    if variant is P.Speak:
        alphabet = "abc देवनागरी xyz àéîõü 你好 "
        text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 40)))
        return P.Speak(rng.choice(("en", "hi", "fr")), text)
    raise AssertionError(variant)


ALL_VARIANTS = (P.Hello, P.Ping, P.Pong, P.DriveCmd, P.StopCmd, P.Telemetry,
                P.FrameData, P.Detections, P.Speak)


class TestEncode:
    def test_ping_frame_layout_matches_reference_crc(self):
        frame = P.encode_frame(P.Ping(0))
        assert frame[:8] == bytes.fromhex("50 42 01 02 08 00 00 00".replace(" ", ""))
        assert frame[8:16] == bytes(8)
        expected_crc = crc32_reference(frame[:16])
        assert frame[16:] == expected_crc.to_bytes(4, "little")

    def test_crc_matches_reference_on_every_variant(self):
        rng = random.Random(0)
        for variant in ALL_VARIANTS:
            frame = P.encode_frame(random_message(rng, variant))
            body, crc = frame[:-4], int.from_bytes(frame[-4:], "little")
            assert crc == crc32_reference(body)

    def test_drive_cmd_payload_is_16_bytes(self):
        frame = P.encode_frame(P.DriveCmd(0.2, 0.0, 1))
        length = int.from_bytes(frame[4:8], "little")
        assert length == 16

    def test_telemetry_payload_is_40_bytes(self):
        frame = P.encode_frame(P.Telemetry(Pose(1, 2, 3), 100.0, 5, 7))
        assert int.from_bytes(frame[4:8], "little") == 40

    def test_oversize_payload_rejected(self):
        with pytest.raises(P.EncodeError):
            P.encode_frame(P.FrameData(0, bytes(P.MAX_PAYLOAD + 1)))

    def test_non_finite_rejected(self):
        with pytest.raises(P.EncodeError):
            P.encode_frame(P.DriveCmd(math.nan, 0, 1))
        with pytest.raises(P.EncodeError):
            P.encode_frame(P.Telemetry(Pose(math.inf, 0, 0), 50, 0, 1))

    def test_battery_range_enforced(self):
        with pytest.raises(P.EncodeError):
            P.encode_frame(P.Telemetry(Pose(), 101.0, 0, 1))

    def test_unknown_role_rejected(self):
        with pytest.raises(P.EncodeError):
            P.encode_frame(P.Hello("sideways"))


class TestRoundTrip:
    @pytest.mark.parametrize("variant", ALL_VARIANTS,
                             ids=lambda v: v.__name__)
    def test_random_messages_roundtrip(self, variant):
        rng = random.Random(hash(variant.__name__) & 0xFFFF)
        for _ in range(500):
            m = random_message(rng, variant)
            decoded, consumed = P.decode_frame(P.encode_frame(m))
            assert decoded == m
            assert consumed == len(P.encode_frame(m))

    def test_telemetry_pose_is_float64_exact(self):
        pose = Pose(1.2345678901234567, -9.876543210987654, 0.1234567890123456)
        m = P.Telemetry(pose, 100.0, 17, 3)
        decoded, _ = P.decode_frame(P.encode_frame(m))
        assert decoded.pose == pose


class TestDecode:
    def test_every_prefix_of_a_valid_frame_needs_more_data(self):
        frame = P.encode_frame(P.DriveCmd(0.25, -0.5, 9))
        for cut in range(len(frame)):
            verdict = P.decode_frame(frame[:cut])
            assert verdict is P.NEED_MORE_DATA, f"prefix of {cut} bytes"

    def test_bad_magic(self):
        frame = bytearray(P.encode_frame(P.Ping(1)))
        frame[0] ^= 0x01
        assert P.decode_frame(bytes(frame)) == P.CorruptFrame("bad_magic")

    def test_bad_version(self):
        frame = bytearray(P.encode_frame(P.Ping(1)))
        frame[2] = 0x07
        assert P.decode_frame(bytes(frame)) == P.CorruptFrame("bad_version")

    def test_oversize_length(self):
        frame = bytearray(P.encode_frame(P.Ping(1)))
        struct.pack_into("<I", frame, 4, P.MAX_PAYLOAD + 1)
        assert P.decode_frame(bytes(frame)) == P.CorruptFrame("oversize")

    def test_payload_flip_is_bad_crc(self):
        frame = bytearray(P.encode_frame(P.Ping(1)))
        frame[10] ^= 0x40
        assert P.decode_frame(bytes(frame)) == P.CorruptFrame("bad_crc")

    def test_unknown_type_behind_valid_crc_is_bad_payload(self):
        head = struct.pack("<2sBBI", P.MAGIC, P.PROTO_VERSION, 0x7F, 0)
        frame = head + crc32_reference(head).to_bytes(4, "little")
        assert P.decode_frame(frame) == P.CorruptFrame("bad_payload")

    def test_exhaustive_bit_flips_never_decode(self):
        rng = random.Random(123)
        samples = [P.Ping(0), P.DriveCmd(0.2, 0.0, 1),
                   random_message(rng, P.Telemetry),
                   random_message(rng, P.Speak),
                   P.FrameData(42, b"\xff\xd8 jpeg-ish \xff\xd9")]
        for m in samples:
            frame = P.encode_frame(m)
            for bit in range(len(frame) * 8):
                corrupted = bytearray(frame)
                corrupted[bit // 8] ^= 1 << (bit % 8)
                verdict = P.decode_frame(bytes(corrupted), eof=True)
                assert isinstance(verdict, P.CorruptFrame), f"bit {bit}: {verdict!r}"

    def test_truncated_at_eof(self):
        frame = P.encode_frame(P.Ping(1))
        assert P.decode_frame(frame[:11], eof=True) == P.CorruptFrame("truncated")

    def test_empty_buffer_at_eof_is_clean(self):
        assert P.decode_frame(b"", eof=True) is P.NEED_MORE_DATA

    def test_concatenated_frames_decode_in_order_with_exact_accounting(self):
        rng = random.Random(5)
        messages = [random_message(rng, rng.choice(ALL_VARIANTS)) for _ in range(40)]
        blob = b"".join(P.encode_frame(m) for m in messages)
        decoded, consumed = P.decode_all(blob)
        assert decoded == messages
        assert consumed == len(blob)

    def test_decode_all_raises_on_corruption(self):
        blob = bytearray(P.encode_frame(P.Ping(1)) + P.encode_frame(P.Ping(2)))
        blob[len(blob) - 3] ^= 0xFF
        with pytest.raises(P.ProtocolError):
            P.decode_all(bytes(blob))


class TestStreamDecoder:
    def test_byte_by_byte_feeding(self):
        rng = random.Random(6)
        messages = [random_message(rng, rng.choice(ALL_VARIANTS)) for _ in range(10)]
        blob = b"".join(P.encode_frame(m) for m in messages)
        decoder = P.StreamDecoder()
        seen = []
        for i in range(len(blob)):
            seen.extend(decoder.feed(blob[i:i + 1]))
        assert seen == messages
        assert decoder.pending == 0

    def test_close_with_partial_frame_raises(self):
        decoder = P.StreamDecoder()
        decoder.feed(P.encode_frame(P.Ping(1))[:5])
        with pytest.raises(P.ProtocolError):
            decoder.close()

    def test_clean_close(self):
        decoder = P.StreamDecoder()
        decoder.feed(P.encode_frame(P.Ping(1)))
        decoder.close()
