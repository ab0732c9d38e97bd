"""
Discrete-event kernel: slot clock, ordered event queue and seeded RNG streams.

Every other service schedules its work through SimEngine, so a fixed
(scenario, seed) pair replays the exact same dispatch sequence.
"""
from __future__ import annotations

import enum
import heapq
import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

logger = logging.getLogger(__name__)

_RNG_BLOCK = 4096


class SchedulingError(RuntimeError):
    pass


class StreamId(str, enum.Enum):
    LINK_LOSS = "link-loss"
    APP_INTERVAL = "app-interval"
    SHARED_BACKOFF = "shared-slot-backoff"


# spawn keys are fixed per purpose; new phenomena get new keys, never reuse
_STREAM_KEYS = {
    StreamId.LINK_LOSS: 1,
    StreamId.APP_INTERVAL: 2,
    StreamId.SHARED_BACKOFF: 3,
}


@dataclass(slots=True)
class SimClock:
    asn: int = 0
    slot_duration_ms: float = 10.0

    @property
    def time_ms(self) -> float:
        return self.asn * self.slot_duration_ms

    @property
    def time_s(self) -> float:
        return self.asn * self.slot_duration_ms / 1000.0

    def slots_for(self, seconds: float) -> int:
        return int(round(seconds * 1000.0 / self.slot_duration_ms))

    def seconds_for(self, slots: int) -> float:
        return slots * self.slot_duration_ms / 1000.0


@dataclass(order=True, slots=True)
class Event:
    fire_asn: int
    sequence: int
    kind: str = field(compare=False)
    callback: Callable[..., Any] = field(compare=False, repr=False)
    payload: Any = field(default=None, compare=False, repr=False)
    cancelled: bool = field(default=False, compare=False)


class RngStream:
    """Uniform draws for one stochastic purpose, decorrelated from the others."""

    def __init__(self, seed: int, stream_id: StreamId) -> None:
        self.seed = seed
        self.stream_id = StreamId(stream_id)
        seq = np.random.SeedSequence(entropy=seed & 0xFFFF_FFFF_FFFF_FFFF, spawn_key=(_STREAM_KEYS[self.stream_id],))
        self._generator = np.random.Generator(np.random.PCG64(seq))
        self._block = self._generator.random(_RNG_BLOCK)
        self._pos = 0

    def draw(self) -> float:
        if self._pos == _RNG_BLOCK:
            self._block = self._generator.random(_RNG_BLOCK)
            self._pos = 0
        value = float(self._block[self._pos])
        self._pos += 1
        return value

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.draw()

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id.value!r})"


@dataclass(slots=True)
class RngStreams:
    link_loss: RngStream
    app_interval: RngStream
    shared_backoff: RngStream

    @classmethod
    def from_seed(cls, seed: int) -> RngStreams:
        return cls(
            link_loss=RngStream(seed, StreamId.LINK_LOSS),
            app_interval=RngStream(seed, StreamId.APP_INTERVAL),
            shared_backoff=RngStream(seed, StreamId.SHARED_BACKOFF),
        )


class SimEngine:
    """Priority queue of events ordered by (fire_asn, insertion sequence)."""

    def __init__(self, slot_duration_ms: float = 10.0, trace: bool = False) -> None:
        self.clock = SimClock(0, slot_duration_ms)
        self._queue: list[Event] = []
        self._sequence = 0
        self.dispatched = 0
        self.trace: list[tuple[int, int, str]] | None = [] if trace else None

    @property
    def asn(self) -> int:
        return self.clock.asn

    @property
    def pending(self) -> int:
        return sum(1 for e in self._queue if not e.cancelled)

    def schedule_event(
        self,
        fire_asn: int,
        kind: str,
        callback: Callable[..., Any],
        payload: Any = None,
    ) -> Event:
        if fire_asn < self.clock.asn:
            raise SchedulingError(
                f"event {kind!r} scheduled at asn {fire_asn} before current asn {self.clock.asn}"
            )
        event = Event(fire_asn, self._sequence, kind, callback, payload)
        self._sequence += 1
        heapq.heappush(self._queue, event)
        return event

    def schedule_in(
        self, delay_slots: int, kind: str, callback: Callable[..., Any], payload: Any = None
    ) -> Event:
        return self.schedule_event(self.clock.asn + max(0, delay_slots), kind, callback, payload)

    def next_event_asn(self) -> int | None:
        queue = self._queue
        while queue and queue[0].cancelled:
            heapq.heappop(queue)
        return queue[0].fire_asn if queue else None

    def cancel(self, event: Event | None) -> None:
        if event is not None:
            event.cancelled = True

    def run_until(self, end_asn: int) -> int:
        """Dispatch every event with fire_asn <= end_asn; returns the dispatched count."""
        if end_asn < self.clock.asn:
            raise SchedulingError(f"run_until({end_asn}) is before current asn {self.clock.asn}")
        count = 0
        queue = self._queue
        while queue and queue[0].fire_asn <= end_asn:
            event = heapq.heappop(queue)
            if event.cancelled:
                continue
            self.clock.asn = event.fire_asn
            if self.trace is not None:
                self.trace.append((event.fire_asn, event.sequence, event.kind))
            if event.payload is None:
                event.callback()
            else:
                event.callback(event.payload)
            count += 1
        self.clock.asn = end_asn
        self.dispatched += count
        return count
