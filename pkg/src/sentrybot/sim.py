"""Deterministic 2D world standing in for the robot, camera and depth
sensor.

The world is a set of labeled axis-aligned rectangles plus a disc robot.
Physics is kinematics with contact stop; the camera is a pinhole model
that both rasterizes a schematic JPEG and plants the ground-truth
detection tensor inside it, so the whole perception path closes without
hardware or a network.
"""

from __future__ import annotations

import io
import math
import zlib
from dataclasses import dataclass, replace
from pathlib import Path

from PIL import Image, ImageDraw

import numpy as np

from . import protocol
from .agent import AgentConfig, DepthProfile, FrontAgent
from .detection import DetectionTensor, GridConfig, embed_tensor_sidecar
from .kinematics import DriveGeometry, Pose, Twist, integrate_pose

DEFAULT_ROBOT_RADIUS_M = 0.15
OBSTACLE_HEIGHT_M = 0.5
CONTACT_TOLERANCE_M = 1e-6

_PALETTE = (
    (231, 76, 60), (46, 204, 113), (52, 152, 219), (241, 196, 15),
    (155, 89, 182), (26, 188, 156), (230, 126, 34), (149, 165, 166),
    (192, 57, 43), (39, 174, 96), (41, 128, 185), (142, 68, 173),
)


def class_color(name: str) -> tuple[int, int, int]:
    # crc32, not hash(): stable across processes and runs
    return _PALETTE[zlib.crc32(name.encode("utf-8")) % len(_PALETTE)]


@dataclass(frozen=True)
class Obstacle:
    label: str
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError("obstacle rectangle is degenerate")

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    @property
    def corners(self) -> tuple[tuple[float, float], ...]:
        return ((self.x0, self.y0), (self.x1, self.y0),
                (self.x1, self.y1), (self.x0, self.y1))

    def distance_to(self, x: float, y: float) -> float:
        qx = min(max(x, self.x0), self.x1)
        qy = min(max(y, self.y0), self.y1)
        return math.hypot(x - qx, y - qy)

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


@dataclass(frozen=True)
class SimCamera:
    """Pinhole camera: horizontal fov, image size in pixels, max range."""

    fov: float = math.pi / 3
    image_w: int = 640
    image_h: int = 480
    max_range: float = 8.0

    def __post_init__(self) -> None:
        if not 0.0 < self.fov < math.pi:
            raise ValueError("fov must lie in (0, pi)")
        if self.image_w <= 0 or self.image_h <= 0 or self.max_range <= 0:
            raise ValueError("camera dimensions must be positive")

    @property
    def focal_px(self) -> float:
        return (self.image_w / 2.0) / math.tan(self.fov / 2.0)


@dataclass(frozen=True)
class World:
    robot_pose: Pose
    geometry: DriveGeometry = DriveGeometry()
    robot_radius: float = DEFAULT_ROBOT_RADIUS_M
    obstacles: tuple[Obstacle, ...] = ()
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 8.0, 6.0)
    seed: int = 0
    time: float = 0.0

    def __post_init__(self) -> None:
        x0, y0, x1, y1 = self.bounds
        if not (x0 < x1 and y0 < y1):
            raise ValueError("world bounds are degenerate")

    def pose_free(self, p: Pose) -> bool:
        """Disc robot at p touches nothing and stays inside the bounds."""
        r = self.robot_radius
        x0, y0, x1, y1 = self.bounds
        if p.x < x0 + r or p.y < y0 + r or p.x > x1 - r or p.y > y1 - r:
            return False
        return all(ob.distance_to(p.x, p.y) >= r for ob in self.obstacles)


def step_world(w: World, applied: Twist, dt: float) -> World:
    """Advance the world by one tick, stopping motion at first contact.

    The motion arc is sampled at half-radius spacing to catch tunneling,
    then the first blocked interval is bisected down to the contact
    tolerance. Time always advances by dt.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    start = w.robot_pose

    def pose_at(f: float) -> Pose:
        return integrate_pose(start, applied, f * dt)

    target = pose_at(1.0)
    if w.pose_free(target):
        return replace(w, robot_pose=target, time=w.time + dt)
    if not w.pose_free(start):
        return replace(w, time=w.time + dt)

    path_len = abs(applied.linear) * dt
    steps = max(1, math.ceil(path_len / (w.robot_radius / 2.0)))
    lo, hi = 0.0, 1.0
    for k in range(1, steps + 1):
        f = k / steps
        if not w.pose_free(pose_at(f)):
            lo, hi = (k - 1) / steps, f
            break

    p_lo, p_hi = pose_at(lo), pose_at(hi)
    for _ in range(80):
        if math.hypot(p_hi.x - p_lo.x, p_hi.y - p_lo.y) <= CONTACT_TOLERANCE_M:
            break
        mid = (lo + hi) / 2.0
        p_mid = pose_at(mid)
        if w.pose_free(p_mid):
            lo, p_lo = mid, p_mid
        else:
            hi, p_hi = mid, p_mid
    return replace(w, robot_pose=p_lo, time=w.time + dt)


def _ray_rect(ox: float, oy: float, dx: float, dy: float, ob: Obstacle) -> float:
    """Distance along the ray to the rectangle, or +inf on a miss."""
    tmin, tmax = -math.inf, math.inf
    for o, d, lo, hi in ((ox, dx, ob.x0, ob.x1), (oy, dy, ob.y0, ob.y1)):
        if abs(d) < 1e-15:
            if o < lo or o > hi:
                return math.inf
        else:
            t1 = (lo - o) / d
            t2 = (hi - o) / d
            if t1 > t2:
                t1, t2 = t2, t1
            tmin = max(tmin, t1)
            tmax = min(tmax, t2)
    if tmax < max(tmin, 0.0):
        return math.inf
    return max(tmin, 0.0)


def raycast_depth(w: World, n: int, cam: SimCamera) -> DepthProfile:
    """n rays fanned evenly across the fov, leftmost first."""
    if n < 1:
        raise ValueError("need at least one ray")
    p = w.robot_pose
    half = cam.fov / 2.0
    samples = []
    for k in range(n):
        angle = p.theta + half - (cam.fov * k / (n - 1) if n > 1 else half)
        dx, dy = math.cos(angle), math.sin(angle)
        dist = min((_ray_rect(p.x, p.y, dx, dy, ob) for ob in w.obstacles),
                   default=math.inf)
        samples.append(dist)
    return DepthProfile(tuple(samples), cam.fov)


@dataclass(frozen=True)
class ProjectedBox:
    """An obstacle as the camera sees it: a centre-form box plus range."""

    label: str
    cx: float
    cy: float
    w: float
    h: float
    distance: float


def project_obstacle(w: World, cam: SimCamera, ob: Obstacle) -> ProjectedBox | None:
    """Pinhole projection of one obstacle, or None when out of view.

    The horizontal extent is the angular silhouette of the rectangle's
    corners; apparent height is the fixed obstacle height over the
    centre distance; boxes sit vertically centred (optical axis at
    obstacle mid-height).
    """
    p = w.robot_pose
    ocx, ocy = ob.center
    distance = math.hypot(ocx - p.x, ocy - p.y)
    if distance == 0.0 or distance > cam.max_range:
        return None

    tan_half = math.tan(cam.fov / 2.0)
    us = []
    for corner_x, corner_y in ob.corners:
        bearing = math.atan2(corner_y - p.y, corner_x - p.x) - p.theta
        bearing = math.atan2(math.sin(bearing), math.cos(bearing))
        if abs(bearing) >= math.pi / 2.0:
            continue  # behind the image plane
        # Image x grows to the right while bearings grow to the left.
        us.append(0.5 * (1.0 - math.tan(bearing) / tan_half))
    if not us:
        return None
    u_lo = max(0.0, min(us))
    u_hi = min(1.0, max(us))
    if u_hi <= u_lo:
        return None

    h_norm = min(1.0, OBSTACLE_HEIGHT_M * cam.focal_px / (distance * cam.image_h))
    return ProjectedBox(ob.label, (u_lo + u_hi) / 2.0, 0.5,
                        u_hi - u_lo, h_norm, distance)


def render_tensor(w: World, cam: SimCamera, cfg: GridConfig) -> DetectionTensor:
    """Ground-truth tensor: each visible obstacle written into the grid
    cell holding its projected centre, confidence 1, one-hot class.

    When two obstacles land in the same cell the nearer one wins.
    """
    s = cfg.grid_size
    values = np.zeros((s, s, cfg.channels), dtype=np.float32)
    best: dict[tuple[int, int], float] = {}
    for ob in w.obstacles:
        proj = project_obstacle(w, cam, ob)
        if proj is None:
            continue
        if ob.label not in cfg.class_names:
            continue
        col = min(int(proj.cx * s), s - 1)
        row = min(int(proj.cy * s), s - 1)
        key = (row, col)
        if key in best and best[key] <= proj.distance:
            continue
        best[key] = proj.distance
        class_id = cfg.class_names.index(ob.label)
        cell = np.zeros(cfg.channels, dtype=np.float32)
        cell[0] = proj.cx * s - col
        cell[1] = proj.cy * s - row
        cell[2] = min(proj.w, 1.0)
        cell[3] = min(proj.h, 1.0)
        cell[4] = 1.0
        cell[cfg.boxes_per_cell * 5 + class_id] = 1.0
        values[row, col] = cell
    return DetectionTensor(values, s, cfg.boxes_per_cell, cfg.class_count)


def render_jpeg(w: World, cam: SimCamera) -> bytes:
    """Schematic top view as a baseline JPEG; byte-deterministic."""
    img = Image.new("RGB", (cam.image_w, cam.image_h), (38, 38, 42))
    draw = ImageDraw.Draw(img)
    bx0, by0, bx1, by1 = w.bounds
    sx = (cam.image_w - 1) / (bx1 - bx0)
    sy = (cam.image_h - 1) / (by1 - by0)

    def to_px(x: float, y: float) -> tuple[float, float]:
        return (x - bx0) * sx, (by1 - y) * sy

    for ob in w.obstacles:
        x0, y1 = to_px(ob.x0, ob.y0)
        x1, y0 = to_px(ob.x1, ob.y1)
        draw.rectangle([x0, y0, x1, y1], fill=class_color(ob.label))

    p = w.robot_pose
    rx, ry = to_px(p.x, p.y)
    rr = max(2.0, w.robot_radius * sx)
    draw.ellipse([rx - rr, ry - rr, rx + rr, ry + rr], fill=(235, 235, 235))
    hx, hy = to_px(p.x + w.robot_radius * 1.8 * math.cos(p.theta),
                   p.y + w.robot_radius * 1.8 * math.sin(p.theta))
    draw.line([rx, ry, hx, hy], fill=(235, 235, 235), width=2)

    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=85)
    return buf.getvalue()


# --- the simulator as a front node -------------------------------------------


class WorldHandle:
    """Mutable cell sharing one world between agent, camera and depth."""

    def __init__(self, world: World):
        self.world = world


class SimDepthSource:
    def __init__(self, handle: WorldHandle, cam: SimCamera, n: int = 31):
        self._handle = handle
        self._cam = cam
        self._n = n

    def current_profile(self) -> DepthProfile:
        return raycast_depth(self._handle.world, self._n, self._cam)


class SimCameraSource:
    """Oracle camera: every frame carries its ground-truth tensor."""

    def __init__(self, handle: WorldHandle, cam: SimCamera, cfg: GridConfig):
        self._handle = handle
        self._cam = cam
        self._cfg = cfg
        self._last_ts = -1

    def next_frame(self) -> tuple[int, bytes]:
        world = self._handle.world
        ts = int(round(world.time * 1000.0))
        if ts <= self._last_ts:
            ts = self._last_ts + 1
        self._last_ts = ts
        jpeg = render_jpeg(world, self._cam)
        tensor = render_tensor(world, self._cam, self._cfg)
        return ts, embed_tensor_sidecar(jpeg, tensor)


def make_sim_agent(handle: WorldHandle, cam: SimCamera, cfg: GridConfig,
                   agent_cfg: AgentConfig | None = None) -> FrontAgent:
    """A front agent whose motion, camera and depth all live in the world."""
    if agent_cfg is None:
        agent_cfg = AgentConfig(geometry=handle.world.geometry)

    def move(pose: Pose, twist: Twist, dt: float) -> Pose:
        handle.world = step_world(handle.world, twist, dt)
        return handle.world.robot_pose

    return FrontAgent(agent_cfg, SimDepthSource(handle, cam),
                      camera=SimCameraSource(handle, cam, cfg), move=move,
                      start_pose=handle.world.robot_pose)


# --- scenario files -----------------------------------------------------------


@dataclass(frozen=True)
class ScriptCommand:
    time_s: float
    kind: str  # "drive" | "stop"
    linear: float = 0.0
    angular: float = 0.0


@dataclass(frozen=True)
class Scenario:
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 8.0, 6.0)
    robot: Pose = Pose(1.0, 3.0, 0.0)
    seed: int = 0
    obstacles: tuple[Obstacle, ...] = ()
    script: tuple[ScriptCommand, ...] = ()


def parse_scenario(text: str) -> Scenario:
    """Parse the plain-text scenario format.

    Header lines are key=value (bounds, robot, seed); "at T drive LIN ANG"
    and "at T stop" schedule commands; every other non-comment line is an
    obstacle: class x0 y0 x1 y1 in meters.
    """
    bounds = (0.0, 0.0, 8.0, 6.0)
    robot = Pose(1.0, 3.0, 0.0)
    seed = 0
    obstacles: list[Obstacle] = []
    script: list[ScriptCommand] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            key = key.strip()
            parts = value.split()
            if key == "bounds":
                if len(parts) != 4:
                    raise ValueError(f"line {lineno}: bounds needs 4 numbers")
                bounds = tuple(float(v) for v in parts)  # type: ignore[assignment]
            elif key == "robot":
                if len(parts) != 3:
                    raise ValueError(f"line {lineno}: robot needs x y theta")
                robot = Pose(float(parts[0]), float(parts[1]), float(parts[2]))
            elif key == "seed":
                seed = int(parts[0])
            else:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            continue
        parts = line.split()
        if parts[0] == "at":
            if len(parts) == 3 and parts[2] == "stop":
                script.append(ScriptCommand(float(parts[1]), "stop"))
            elif len(parts) == 5 and parts[2] == "drive":
                script.append(ScriptCommand(float(parts[1]), "drive",
                                            float(parts[3]), float(parts[4])))
            else:
                raise ValueError(f"line {lineno}: bad script entry")
            continue
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: obstacle needs: class x0 y0 x1 y1")
        obstacles.append(Obstacle(parts[0], *(float(v) for v in parts[1:])))
    script.sort(key=lambda c: c.time_s)
    return Scenario(bounds, robot, seed, tuple(obstacles), tuple(script))


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


def build_world(sc: Scenario, geometry: DriveGeometry | None = None,
                robot_radius: float = DEFAULT_ROBOT_RADIUS_M,
                class_names: tuple[str, ...] | None = None) -> World:
    if class_names is not None:
        unknown = {ob.label for ob in sc.obstacles} - set(class_names)
        if unknown:
            raise ValueError(f"scenario classes not in the class list: {sorted(unknown)}")
    world = World(robot_pose=sc.robot, geometry=geometry or DriveGeometry(),
                  robot_radius=robot_radius, obstacles=sc.obstacles,
                  bounds=sc.bounds, seed=sc.seed)
    if not world.pose_free(world.robot_pose):
        raise ValueError("robot starts in contact with an obstacle or the bounds")
    return world


class ScriptFeeder:
    """Turns scenario script entries into sequenced wire commands."""

    def __init__(self, script: tuple[ScriptCommand, ...]):
        self._pending = list(script)
        self._seq = 0

    def due(self, now_s: float) -> list[protocol.WireMessage]:
        out: list[protocol.WireMessage] = []
        while self._pending and self._pending[0].time_s <= now_s + 1e-12:
            cmd = self._pending.pop(0)
            self._seq += 1
            if cmd.kind == "drive":
                out.append(protocol.DriveCmd(cmd.linear, cmd.angular, self._seq))
            else:
                out.append(protocol.StopCmd(self._seq))
        return out
