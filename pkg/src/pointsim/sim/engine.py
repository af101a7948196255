"""Discrete-event loop ordered by (time, insertion sequence)."""
from __future__ import annotations

import enum
import heapq
from typing import Callable


class EventKind(enum.Enum):
    PACKET_ARRIVAL = "packet-arrival"
    TIMER_FIRE = "timer-fire"
    LINK_DOWN = "link-down"
    LINK_UP = "link-up"
    CLIENT_ACTION = "client-action"
    CONTROL_DELIVERY = "control-delivery"


class Engine:
    def __init__(self):
        self.now = 0
        self._heap: list = []
        self._seq = 0
        self.processed = 0
        self.after_event: list[Callable[[], None]] = []

    def schedule(self, at: int, kind: EventKind, fn: Callable, *args) -> int:
        if at < self.now:
            raise ValueError(f"cannot schedule at {at} before now={self.now}")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (at, seq, kind, fn, args))
        return seq

    def after(self, delay: int, kind: EventKind, fn: Callable, *args) -> int:
        return self.schedule(self.now + delay, kind, fn, *args)

    def run(self, until: int):
        """Process every event with time <= until."""
        heap = self._heap
        hooks = self.after_event
        while heap and heap[0][0] <= until:
            at, _, _, fn, args = heapq.heappop(heap)
            self.now = at
            fn(*args)
            self.processed += 1
            for hook in hooks:
                hook()
        self.now = max(self.now, until)

    def __len__(self):
        return len(self._heap)
