"""Single-threaded discrete-event scheduler.

Events execute in (tick, insertion order); handlers may only schedule
strictly later events, which keeps every run a deterministic function of
the seed and the initial schedule.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable

EVENT_KINDS = (
    "broadcast",
    "deliver",
    "respond",
    "accept",
    "multisig",
    "settle",
    "stabilize",
    "bailout-step",
    "re-embed",
)


@dataclass(order=True)
class Event:
    at: int
    seq: int
    kind: str = field(compare=False)
    handler: Callable[["Scheduler", "Event"], None] = field(compare=False)
    payload: dict = field(compare=False, default_factory=dict)


class Scheduler:
    def __init__(self) -> None:
        self.now = 0
        self._seq = 0
        self._queue: list[Event] = []
        self.processed: list[tuple[int, int, str]] = []
        self._running = False

    def schedule(self, at: int, kind: str,
                 handler: Callable[["Scheduler", "Event"], None],
                 **payload) -> Event:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        if self._running and at <= self.now:
            raise ValueError(
                f"handlers may only schedule strictly later events "
                f"(now={self.now}, requested={at})"
            )
        event = Event(at, self._seq, kind, handler, payload)
        self._seq += 1
        heapq.heappush(self._queue, event)
        return event

    def run(self) -> None:
        self._running = True
        try:
            while self._queue:
                event = heapq.heappop(self._queue)
                self.now = event.at
                self.processed.append((event.at, event.seq, event.kind))
                event.handler(self, event)
        finally:
            self._running = False

    def run_until(self, tick: int) -> None:
        """Process every event scheduled at or before ``tick``."""
        self._running = True
        try:
            while self._queue and self._queue[0].at <= tick:
                event = heapq.heappop(self._queue)
                self.now = event.at
                self.processed.append((event.at, event.seq, event.kind))
                event.handler(self, event)
        finally:
            self._running = False

    def event_count(self) -> int:
        return len(self.processed)
