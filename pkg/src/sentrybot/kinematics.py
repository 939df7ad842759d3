"""Differential-drive math: wheel/body conversions, exact arc odometry,
and the command-freshness gate."""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi

# Below this |angular| the arc integrator degenerates to a straight segment
# (avoids the radius = linear/angular singularity).
STRAIGHT_EPS = 1e-9


@dataclass(frozen=True)
class DriveGeometry:
    """Wheel radius and track width in meters, wheel speed limit in rad/s."""

    wheel_radius: float = 0.05
    track_width: float = 0.20
    max_wheel_speed: float = 10.0

    def __post_init__(self) -> None:
        if min(self.wheel_radius, self.track_width, self.max_wheel_speed) <= 0.0:
            raise ValueError("drive geometry values must be strictly positive")


@dataclass(frozen=True)
class WheelSpeeds:
    """Left/right wheel angular rates in rad/s."""

    left: float
    right: float


@dataclass(frozen=True)
class Twist:
    """Planar body velocity: forward m/s and counter-clockwise rad/s."""

    linear: float = 0.0
    angular: float = 0.0


ZERO_TWIST = Twist(0.0, 0.0)


@dataclass(frozen=True)
class Pose:
    """World-frame planar pose; theta is kept in (-pi, pi]."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]; in-range values pass through exactly."""
    if -math.pi < theta <= math.pi:
        return theta
    t = math.fmod(theta + math.pi, TWO_PI)
    if t <= 0.0:
        t += TWO_PI
    return t - math.pi


def forward_kinematics(w: WheelSpeeds, g: DriveGeometry) -> Twist:
    """Body twist produced by the given wheel rates."""
    linear = g.wheel_radius * (w.left + w.right) / 2.0
    angular = g.wheel_radius * (w.right - w.left) / g.track_width
    return Twist(linear, angular)


def inverse_kinematics(t: Twist, g: DriveGeometry) -> WheelSpeeds:
    """Wheel rates realizing the twist, proportionally saturated.

    When either wheel would exceed the limit, both are scaled by the same
    factor so the larger magnitude equals the limit; curvature (and so the
    steering intent) is preserved.
    """
    half_track = t.angular * g.track_width / 2.0
    left = (t.linear - half_track) / g.wheel_radius
    right = (t.linear + half_track) / g.wheel_radius
    peak = max(abs(left), abs(right))
    if peak > g.max_wheel_speed:
        scale = g.max_wheel_speed / peak
        left *= scale
        right *= scale
    return WheelSpeeds(left, right)


def integrate_pose(p: Pose, t: Twist, dt: float) -> Pose:
    """Advance a pose by a constant twist using exact arc integration."""
    if dt < 0.0:
        raise ValueError("dt must be non-negative")
    dtheta = t.angular * dt
    if abs(t.angular) < STRAIGHT_EPS:
        x = p.x + t.linear * dt * math.cos(p.theta)
        y = p.y + t.linear * dt * math.sin(p.theta)
    else:
        radius = t.linear / t.angular
        x = p.x + radius * (math.sin(p.theta + dtheta) - math.sin(p.theta))
        y = p.y + radius * (math.cos(p.theta) - math.cos(p.theta + dtheta))
    return Pose(x, y, normalize_angle(p.theta + dtheta))


def watchdog_gate(last_command_age: float, timeout: float, commanded: Twist) -> Twist:
    """Pass the commanded twist while it is fresh, else hold the robot.

    The bound is inclusive: a command aged exactly `timeout` still passes.
    """
    if last_command_age < 0.0:
        raise ValueError("command age must be non-negative")
    if last_command_age <= timeout:
        return commanded
    return ZERO_TWIST
