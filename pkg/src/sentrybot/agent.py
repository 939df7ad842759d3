"""Front-node logic: command handling, safety gates, odometry, telemetry.

The front agent never parses language; it executes low-level drive and
stop commands only, so the safety-critical node stays minimal. Motion is
gated twice on every tick: the watchdog zeroes stale commands and the
obstacle gate zeroes forward motion into anything closer than the stop
distance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

from . import protocol
from .kinematics import (DriveGeometry, Pose, Twist, ZERO_TWIST,
                         integrate_pose, watchdog_gate)

log = logging.getLogger(__name__)

U32_MAX = 0xFFFFFFFF

DEFAULT_WATCHDOG_TIMEOUT_S = 0.5
DEFAULT_STOP_DISTANCE_M = 0.3
DEFAULT_TELEMETRY_HZ = 20.0
DEFAULT_FRAME_HZ = 10.0
DEFAULT_LISTEN = "0.0.0.0:7071"
BATTERY_STUB_PCT = 100.0


@dataclass(frozen=True)
class DepthProfile:
    """Horizontal fan of range samples, left to right across the fov.

    Samples are meters; +inf marks no return.
    """

    samples: tuple[float, ...]
    fov: float

    def __post_init__(self) -> None:
        if len(self.samples) < 1:
            raise ValueError("depth profile needs at least one sample")
        if any((not s > 0.0) and not math.isinf(s) for s in self.samples):
            raise ValueError("depth samples must be positive or +inf")
        if math.isnan(self.fov) or not 0.0 < self.fov < math.pi:
            raise ValueError("fov must lie in (0, pi)")


def central_third(n: int) -> tuple[int, int]:
    """Index range [lo, hi) covering the middle third of n samples."""
    lo = n // 3
    hi = -(-2 * n // 3)
    return lo, max(hi, lo + 1)


def obstacle_gate(d: DepthProfile, t: Twist, stop_distance: float) -> Twist:
    """Zero forward motion when the forward corridor is blocked.

    Only the central third of the profile counts (it approximates the
    robot's path), rotation is always preserved, and reverse motion is
    never gated.
    """
    if t.linear <= 0.0:
        return t
    lo, hi = central_third(len(d.samples))
    if min(d.samples[lo:hi]) < stop_distance:
        return Twist(0.0, t.angular)
    return t


class CameraSource(Protocol):
    """Frame producer; timestamps must strictly increase."""

    def next_frame(self) -> tuple[int, bytes]: ...


class DepthSource(Protocol):
    def current_profile(self) -> DepthProfile: ...


class ClearDepth:
    """Depth source that never sees anything (bench use)."""

    def __init__(self, n: int = 31, fov: float = math.pi / 3):
        self._profile = DepthProfile((math.inf,) * n, fov)

    def current_profile(self) -> DepthProfile:
        return self._profile


@dataclass(frozen=True)
class AgentConfig:
    geometry: DriveGeometry = DriveGeometry()
    watchdog_timeout_s: float = DEFAULT_WATCHDOG_TIMEOUT_S
    stop_distance_m: float = DEFAULT_STOP_DISTANCE_M
    telemetry_hz: float = DEFAULT_TELEMETRY_HZ
    frame_hz: float = DEFAULT_FRAME_HZ


def load_agent_config(path) -> AgentConfig:
    """Parse the key=value config file; unknown keys are rejected."""
    values: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            values[key.strip()] = float(value.strip())
    geom_keys = {"wheel_radius", "track_width", "max_wheel_speed"}
    known = geom_keys | {"watchdog_timeout", "stop_distance",
                         "telemetry_hz", "frame_hz"}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    geometry = DriveGeometry(
        wheel_radius=values.get("wheel_radius", DriveGeometry.wheel_radius),
        track_width=values.get("track_width", DriveGeometry.track_width),
        max_wheel_speed=values.get("max_wheel_speed", DriveGeometry.max_wheel_speed),
    )
    return AgentConfig(
        geometry=geometry,
        watchdog_timeout_s=values.get("watchdog_timeout", DEFAULT_WATCHDOG_TIMEOUT_S),
        stop_distance_m=values.get("stop_distance", DEFAULT_STOP_DISTANCE_M),
        telemetry_hz=values.get("telemetry_hz", DEFAULT_TELEMETRY_HZ),
        frame_hz=values.get("frame_hz", DEFAULT_FRAME_HZ),
    )


@dataclass
class AgentState:
    pose: Pose = field(default_factory=Pose)
    last_cmd: Twist = ZERO_TWIST
    last_cmd_time_ms: int | None = None
    last_seq: dict[int, int] = field(default_factory=dict)
    telemetry_seq: int = 0


MoveFn = Callable[[Pose, Twist, float], Pose]


class FrontAgent:
    """Single-owner agent core; the surrounding loop serializes calls.

    `move` defaults to pure odometry; the simulator swaps in its
    contact-aware stepper so the same agent drives both worlds.
    """

    def __init__(self, config: AgentConfig, depth: DepthSource,
                 camera: CameraSource | None = None,
                 move: MoveFn | None = None,
                 start_pose: Pose = Pose()):
        self.config = config
        self.depth = depth
        self.camera = camera
        self._move: MoveFn = move or integrate_pose
        self.state = AgentState(pose=start_pose)

    def handle_message(self, m: protocol.WireMessage, now_ms: int
                       ) -> list[protocol.WireMessage]:
        """Apply one inbound message; returns messages to send back."""
        s = self.state
        if isinstance(m, protocol.Ping):
            return [protocol.Pong(m.nonce)]
        if isinstance(m, protocol.DriveCmd):
            if not self._fresh(protocol.TYPE_DRIVE_CMD, m.seq):
                return []
            s.last_cmd = Twist(m.linear, m.angular)
            s.last_cmd_time_ms = now_ms
            return []
        if isinstance(m, protocol.StopCmd):
            if not self._fresh(protocol.TYPE_STOP_CMD, m.seq):
                return []
            s.last_cmd = ZERO_TWIST
            s.last_cmd_time_ms = now_ms
            return []
        if isinstance(m, protocol.Hello):
            return []
        log.warning("front agent ignoring %s", type(m).__name__)
        return []

    def _fresh(self, msg_type: int, seq: int) -> bool:
        last = self.state.last_seq.get(msg_type)
        if last is not None and seq <= last:
            log.warning("stale seq %d (last %d) for type 0x%02x", seq, last, msg_type)
            return False
        self.state.last_seq[msg_type] = seq
        return True

    def command_age_s(self, now_ms: int) -> float:
        if self.state.last_cmd_time_ms is None:
            return math.inf
        return max(0.0, (now_ms - self.state.last_cmd_time_ms) / 1000.0)

    def tick(self, dt: float, now_ms: int) -> tuple[protocol.Telemetry, Twist]:
        """One control period: gate, integrate, report."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        s = self.state
        gated = watchdog_gate(self.command_age_s(now_ms),
                              self.config.watchdog_timeout_s, s.last_cmd)
        applied = obstacle_gate(self.depth.current_profile(), gated,
                                self.config.stop_distance_m)
        s.pose = self._move(s.pose, applied, dt)
        s.telemetry_seq += 1
        if s.last_cmd_time_ms is None:
            link_age = U32_MAX
        else:
            link_age = min(now_ms - s.last_cmd_time_ms, U32_MAX)
        telemetry = protocol.Telemetry(s.pose, BATTERY_STUB_PCT, link_age,
                                       s.telemetry_seq)
        return telemetry, applied

    def next_frame(self) -> protocol.FrameData | None:
        if self.camera is None:
            return None
        ts, jpeg = self.camera.next_frame()
        return protocol.FrameData(ts, jpeg)
