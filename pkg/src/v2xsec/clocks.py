"""Millisecond clocks with a monotone guarantee.

Security components never read wall time directly; they take one of these
clock objects so that simulations can drive time deterministically and tests
can replay exact schedules.
"""

from __future__ import annotations

import time


class VirtualClock:
    """Manually driven clock for deterministic runs.

    `set` and `advance` never move time backwards; attempts to do so are
    clamped so that readers always observe a nondecreasing sequence.
    """

    __slots__ = ("_now_ms",)

    def __init__(self, start_ms: int = 0) -> None:
        self._now_ms = int(start_ms)

    @property
    def now(self) -> int:
        return self._now_ms

    def advance(self, delta_ms: int) -> int:
        if delta_ms > 0:
            self._now_ms += int(delta_ms)
        return self._now_ms

    def set(self, now_ms: int) -> int:
        if now_ms > self._now_ms:
            self._now_ms = int(now_ms)
        return self._now_ms


class SystemClock:
    """Milliseconds since construction, from the host monotonic clock."""

    __slots__ = ("_t0",)

    def __init__(self) -> None:
        self._t0 = time.monotonic_ns()

    @property
    def now(self) -> int:
        return (time.monotonic_ns() - self._t0) // 1_000_000


Clock = VirtualClock | SystemClock
