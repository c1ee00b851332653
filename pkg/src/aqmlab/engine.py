"""Deterministic discrete-event core: clock, event queue, links, packets.

Events are dispatched in (time, insertion-seq) order so that runs with the
same seed and configuration replay bit-identically.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field

# Event kinds. Payload layout is owned by whoever schedules the event.
PACKET_ARRIVAL = "packet-arrival"
PACKET_DEPARTURE = "packet-departure"
TIMER_EXPIRY = "timer-expiry"
SCENARIO_CHANGE = "scenario-change"
AQM_TICK = "aqm-tick"


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(slots=True)
class Event:
    time: float
    seq: int
    kind: str
    payload: object = None


@dataclass(slots=True)
class Packet:
    id: int
    flow_id: int
    size: int
    seq_no: int
    enqueue_time: float = -1.0
    is_ack: bool = False
    epoch: int = 0

    def __post_init__(self) -> None:
        if self.size < 0:
            raise ValueError(f"packet size must be non-negative, got {self.size}")


@dataclass(slots=True)
class Link:
    """Point-to-point link: FIFO serialization plus fixed propagation delay."""

    bandwidth: float  # bits/second
    prop_delay: float  # seconds

    def __post_init__(self) -> None:
        if self.bandwidth <= 0:
            raise ValueError(f"link bandwidth must be positive, got {self.bandwidth}")
        if self.prop_delay < 0:
            raise ValueError(f"propagation delay must be non-negative, got {self.prop_delay}")


def transmit_time(pkt: Packet, link: Link) -> float:
    """Serialization time of *pkt* on *link* plus propagation delay."""
    return pkt.size * 8 / link.bandwidth + link.prop_delay


def substream(seed: int, name: str) -> random.Random:
    """Independent deterministic RNG stream derived from (seed, name).

    ``random.Random`` seeded with a string hashes it with sha512, which is
    stable across platforms and Python versions, so every stream replays
    exactly for a given seed.
    """
    return random.Random(f"{seed}:{name}")


@dataclass(slots=True)
class RunReport:
    """Handle returned by ``Simulator.run_until``."""

    clock: float
    dispatched: int


class Simulator:
    """Single-threaded event loop.

    Handlers are registered per event kind via :meth:`on`. A simulation
    instance owns all of its mutable state; independent instances may run
    concurrently without sharing anything.
    """

    def __init__(self) -> None:
        self.now = 0.0
        self._heap: list[tuple[float, int, str, object]] = []
        self._seq = 0
        self._dispatched = 0
        self._handlers: dict[str, object] = {}

    def on(self, kind: str, handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, time: float, kind: str, payload: object = None) -> None:
        if time < self.now:
            raise SchedulingError(
                f"cannot schedule {kind!r} at t={time} before current clock t={self.now}"
            )
        heapq.heappush(self._heap, (time, self._seq, kind, payload))
        self._seq += 1

    def peek(self) -> Event | None:
        if not self._heap:
            return None
        time, seq, kind, payload = self._heap[0]
        return Event(time, seq, kind, payload)

    def run_until(self, t_end: float) -> RunReport:
        """Dispatch every event with time <= t_end, then advance the clock to t_end."""
        heap = self._heap
        handlers = self._handlers
        while heap and heap[0][0] <= t_end:
            time, _seq, kind, payload = heapq.heappop(heap)
            self.now = time
            self._dispatched += 1
            handlers[kind](payload)
        self.now = t_end
        return RunReport(clock=self.now, dispatched=self._dispatched)
