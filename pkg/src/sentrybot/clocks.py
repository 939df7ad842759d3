"""Millisecond clocks. The manual clock makes whole-system runs
reproducible: tests and scripted scenarios advance it in lockstep with
simulated time, so event logs come out byte-identical run to run."""

from __future__ import annotations

import time


class WallClock:
    def now_ms(self) -> int:
        return int(time.time() * 1000)


class ManualClock:
    def __init__(self, start_ms: int = 0):
        self._now = int(start_ms)

    def now_ms(self) -> int:
        return self._now

    def advance(self, delta_ms: float) -> int:
        if delta_ms < 0:
            raise ValueError("clock cannot run backwards")
        self._now += int(delta_ms)
        return self._now

    def set(self, now_ms: int) -> None:
        if now_ms < self._now:
            raise ValueError("clock cannot run backwards")
        self._now = int(now_ms)
