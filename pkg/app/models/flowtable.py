"""
Protocol-oblivious flowtable: matches are (offset, length, value, mask)
windows over the raw header bytes, so the table never parses a protocol.
"""
from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Any, Union

from app.models.routing import SourceRoute
from app.models.schedule import FlowClass, Frame
from app.models.topology import NodeId

# abstract header layout: class code, destination u16, origin u16, sequence u16
CLASS_OFFSET = 0
FLOW_KEY_OFFSET = 1
FLOW_KEY_LENGTH = 2
HEADER_MIN = 7


def build_header(
    flow_class: FlowClass, destination: NodeId, origin: NodeId, seq: int, length: int = HEADER_MIN
) -> bytes:
    if length < HEADER_MIN:
        raise ValueError(f"header needs at least {HEADER_MIN} bytes, got {length}")
    fixed = bytes([flow_class.code]) + destination.to_bytes(2, "big") + origin.to_bytes(2, "big")
    fixed += (seq & 0xFFFF).to_bytes(2, "big")
    return fixed + bytes(length - HEADER_MIN)


def flow_key(header: bytes) -> int | None:
    window = header[FLOW_KEY_OFFSET : FLOW_KEY_OFFSET + FLOW_KEY_LENGTH]
    return int.from_bytes(window, "big") if len(window) == FLOW_KEY_LENGTH else None


def class_match(flow_class: FlowClass) -> FlowMatch:
    return FlowMatch.exact(CLASS_OFFSET, bytes([flow_class.code]))


def destination_match(destination: NodeId) -> FlowMatch:
    return FlowMatch.exact(FLOW_KEY_OFFSET, destination.to_bytes(FLOW_KEY_LENGTH, "big"))


@dataclass(frozen=True, slots=True)
class FlowMatch:
    offset: int
    length: int
    value: bytes
    mask: bytes

    def __post_init__(self) -> None:
        if self.offset < 0 or self.length < 1:
            raise ValueError("match window needs offset >= 0 and length >= 1")
        if len(self.value) != self.length or len(self.mask) != self.length:
            raise ValueError("value and mask must be exactly `length` bytes")

    def matches(self, header: bytes) -> bool:
        window = header[self.offset : self.offset + self.length]
        if len(window) < self.length:
            return False
        return all((h & m) == (v & m) for h, v, m in zip(window, self.value, self.mask))

    @classmethod
    def exact(cls, offset: int, value: bytes) -> FlowMatch:
        return cls(offset, len(value), value, b"\xff" * len(value))


@dataclass(frozen=True, slots=True)
class Forward:
    next_hop: NodeId


@dataclass(frozen=True, slots=True)
class Drop:
    pass


@dataclass(frozen=True, slots=True)
class SrhPush:
    route: SourceRoute


@dataclass(frozen=True, slots=True)
class Query:
    pass


FlowAction = Union[Forward, Drop, SrhPush, Query]


@dataclass(slots=True)
class FlowEntry:
    entry_id: int
    match: tuple[FlowMatch, ...]
    action: FlowAction
    lifetime: float
    last_refresh: float
    hit_count: int = 0
    last_hit: float | None = None
    # hit_count at the last NSU, so reports carry per-interval activity
    reported_hits: int = 0

    def is_live(self, now: float) -> bool:
        return now - self.last_refresh <= self.lifetime

    def matches(self, header: bytes) -> bool:
        return all(m.matches(header) for m in self.match)

    @property
    def recency(self) -> float:
        return self.last_hit if self.last_hit is not None else self.last_refresh


class FlowTable:
    """Capacity-bounded entry list; a full table evicts its least-recently-hit entry."""

    def __init__(self, capacity: int = 10, blacklist: Iterable[FlowMatch] = ()) -> None:
        if capacity < 1:
            raise ValueError("flowtable capacity must be >= 1")
        self.capacity = capacity
        self.entries: list[FlowEntry] = []
        self.blacklist: list[FlowMatch] = list(blacklist)
        self.evictions = 0

    def __len__(self) -> int:
        return len(self.entries)

    def is_blacklisted(self, header: bytes) -> bool:
        return any(m.matches(header) for m in self.blacklist)

    def lookup(self, header: bytes, now: float) -> FlowEntry | None:
        for entry in self.entries:
            if entry.is_live(now) and entry.matches(header):
                entry.hit_count += 1
                entry.last_hit = now
                return entry
        return None

    def has_dead_match(self, header: bytes, now: float) -> bool:
        return any(not e.is_live(now) and e.matches(header) for e in self.entries)

    def get(self, entry_id: int) -> FlowEntry | None:
        return next((e for e in self.entries if e.entry_id == entry_id), None)

    def insert(self, entry: FlowEntry) -> FlowEntry | None:
        """Add or replace (same match) an entry; returns the evicted entry, if any."""
        for i, existing in enumerate(self.entries):
            if existing.match == entry.match or existing.entry_id == entry.entry_id:
                self.entries[i] = entry
                return None
        evicted = None
        if len(self.entries) >= self.capacity:
            evicted = min(self.entries, key=lambda e: e.recency)
            self.entries.remove(evicted)
            self.evictions += 1
        self.entries.append(entry)
        return evicted

    def refresh(self, entry_id: int, now: float) -> bool:
        entry = self.get(entry_id)
        if entry is None or not entry.is_live(now):
            return False
        entry.last_refresh = now
        return True

    def live_entries(self, now: float) -> list[FlowEntry]:
        return [e for e in self.entries if e.is_live(now)]


@dataclass(slots=True)
class PendingQuery:
    flow_key: int
    header: bytes
    sent_at: float
    retries_left: int = 1
    buffered: list[Frame] = field(default_factory=list)
    ftq_count: int = 0
    timer: Any = None
