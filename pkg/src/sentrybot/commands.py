"""Transcript-to-intent grammar and motion planning.

The grammar is English; upstream translation normalizes other languages
into it first. It is documented as EBNF in docs/command-grammar.ebnf:

    command  = "stop"
             | ("move" | "go") direction [ number [ distance-unit ] ]
             | "turn" side [ number [ angle-unit ] ]
             | "what do you see"
             | "say" text ;
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from .kinematics import DriveGeometry, Twist

MAX_DISTANCE_M = 10.0
MAX_ANGLE_DEG = 360.0
DEFAULT_DISTANCE_M = 0.5
DEFAULT_ANGLE_DEG = 90.0

_NUMBER = re.compile(r"^-?\d+(?:\.\d+)?$")
_DISTANCE_UNITS = {"meter", "meters", "m"}
_ANGLE_UNITS = {"degree", "degrees"}


class CommandError(Exception):
    """Base for transcript parsing failures."""


class UnrecognizedCommand(CommandError):
    def __init__(self, text: str):
        super().__init__(f"not a command: {text!r}")
        self.text = text


class OutOfRange(CommandError):
    def __init__(self, what: str, value: float, low: float, high: float):
        super().__init__(f"{what} {value} outside ({low}, {high}]")
        self.what = what
        self.value = value


@dataclass(frozen=True)
class Drive:
    direction: str  # "forward" | "backward"
    distance_m: float


@dataclass(frozen=True)
class Turn:
    direction: str  # "left" | "right"
    angle_deg: float


@dataclass(frozen=True)
class Stop:
    pass


@dataclass(frozen=True)
class QueryObjects:
    pass


@dataclass(frozen=True)
class Speak:
    text: str


Intent = Union[Drive, Turn, Stop, QueryObjects, Speak]


@dataclass(frozen=True)
class CruiseLimits:
    """Fixed speeds used to turn intents into timed segments."""

    linear: float = 0.2
    angular: float = math.pi / 4

    def __post_init__(self) -> None:
        if self.linear <= 0 or self.angular <= 0:
            raise ValueError("cruise speeds must be positive")


def _tokens(text: str) -> list[str]:
    # Punctuation is stripped at token edges only, so decimals survive.
    words = (w.strip(".,!?;:") for w in text.lower().split())
    return [w for w in words if w]


def _amount(rest: list[str], units: set[str], default: float,
            what: str, limit: float, text: str) -> float:
    if not rest:
        return default
    if not _NUMBER.match(rest[0]):
        raise UnrecognizedCommand(text)
    if len(rest) == 2 and rest[1] not in units:
        raise UnrecognizedCommand(text)
    if len(rest) > 2:
        raise UnrecognizedCommand(text)
    value = float(rest[0])
    if not value > 0 or value > limit:
        raise OutOfRange(what, value, 0.0, limit)
    return value


def parse_intent(text: str) -> Intent:
    """Parse one normalized transcript into an intent.

    Raises UnrecognizedCommand for anything outside the grammar and
    OutOfRange when a stated distance or angle violates the limits
    (distance in (0, 10] m, angle in (0, 360] degrees).
    """
    words = _tokens(text)
    if not words:
        raise UnrecognizedCommand(text)

    if words == ["stop"]:
        return Stop()
    if words == ["what", "do", "you", "see"]:
        return QueryObjects()
    if words[0] == "say":
        if len(words) < 2:
            raise UnrecognizedCommand(text)
        return Speak(" ".join(words[1:]))
    if words[0] in ("move", "go") and len(words) >= 2:
        direction = {"forward": "forward", "backward": "backward",
                     "back": "backward"}.get(words[1])
        if direction is None:
            raise UnrecognizedCommand(text)
        dist = _amount(words[2:], _DISTANCE_UNITS, DEFAULT_DISTANCE_M,
                       "distance", MAX_DISTANCE_M, text)
        return Drive(direction, dist)
    if words[0] == "turn" and len(words) >= 2:
        if words[1] not in ("left", "right"):
            raise UnrecognizedCommand(text)
        angle = _amount(words[2:], _ANGLE_UNITS, DEFAULT_ANGLE_DEG,
                        "angle", MAX_ANGLE_DEG, text)
        return Turn(words[1], angle)
    raise UnrecognizedCommand(text)


def _fmt_number(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def unparse_intent(intent: Intent) -> str:
    """Render an intent back into a grammar-valid transcript."""
    if isinstance(intent, Stop):
        return "stop"
    if isinstance(intent, QueryObjects):
        return "what do you see"
    if isinstance(intent, Speak):
        return f"say {intent.text}"
    if isinstance(intent, Drive):
        return f"move {intent.direction} {_fmt_number(intent.distance_m)} meters"
    if isinstance(intent, Turn):
        return f"turn {intent.direction} {_fmt_number(intent.angle_deg)} degrees"
    raise TypeError(f"not an intent: {intent!r}")


def intent_to_plan(intent: Intent, g: DriveGeometry,
                   cruise: CruiseLimits = CruiseLimits()) -> list[tuple[Twist, float]]:
    """Timed twist segments realizing the intent at cruise speed.

    Query and speak intents produce an empty plan; the server answers
    those itself.
    """
    if isinstance(intent, Drive):
        sign = 1.0 if intent.direction == "forward" else -1.0
        return [(Twist(sign * cruise.linear, 0.0), intent.distance_m / cruise.linear)]
    if isinstance(intent, Turn):
        sign = 1.0 if intent.direction == "left" else -1.0
        duration = math.radians(intent.angle_deg) / cruise.angular
        return [(Twist(0.0, sign * cruise.angular), duration)]
    if isinstance(intent, Stop):
        return [(Twist(0.0, 0.0), 0.0)]
    if isinstance(intent, (QueryObjects, Speak)):
        return []
    raise TypeError(f"not an intent: {intent!r}")
