from __future__ import annotations

import enum
from collections.abc import Iterable
from dataclasses import dataclass, replace
from typing import Any

from app.models.topology import NodeId

FRAME_BUDGET = 127
MAC_OVERHEAD = 25
PAYLOAD_BUDGET = FRAME_BUDGET - MAC_OVERHEAD

# queue class of best-effort traffic; track traffic is keyed by its track id
BEST_EFFORT = None
QueueClass = int | None


class ScheduleConflictError(ValueError):
    pass


class CellKind(str, enum.Enum):
    TX_DEDICATED = "TxDedicated"
    RX_DEDICATED = "RxDedicated"
    SHARED = "Shared"
    SLEEP = "Sleep"


class FlowClass(str, enum.Enum):
    APP = "App"
    NSU = "Nsu"
    FTQ = "Ftq"
    SDN_DOWN = "SdnDown"
    RPL = "Rpl"
    JOIN = "Join"
    RSV = "Rsv"

    @property
    def code(self) -> int:
        return _CLASS_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> FlowClass:
        return _CODE_CLASSES[code]


_CLASS_CODES = {c: i + 1 for i, c in enumerate(FlowClass)}
_CODE_CLASSES = {v: k for k, v in _CLASS_CODES.items()}

CONTROL_CLASSES = (FlowClass.NSU, FlowClass.FTQ)


class DropReason(str, enum.Enum):
    QUEUE_OVERFLOW = "QueueOverflow"
    RETRY_LIMIT = "RetryLimit"
    TRACK_STALE = "TrackStale"
    QUERY_BUFFER_OVERFLOW = "QueryBufferOverflow"
    QUERY_TIMEOUT = "QueryTimeout"
    FLOW_DROP = "FlowDrop"
    NO_ROUTE = "NoRoute"
    IN_FLIGHT = "InFlight"


@dataclass(frozen=True, slots=True, order=True)
class Cell:
    slot_offset: int
    channel_offset: int
    kind: CellKind
    owner_link: tuple[NodeId, NodeId] | None = None
    track_label: int | None = None

    @property
    def is_dedicated(self) -> bool:
        return self.kind in (CellKind.TX_DEDICATED, CellKind.RX_DEDICATED)

    def describe(self) -> str:
        if self.kind == CellKind.SHARED:
            return "SH"
        if self.owner_link is None:
            return "--"
        src, dst = self.owner_link
        label = f"{src}>{dst}"
        return label if self.track_label is None else f"{label}#{self.track_label}"


@dataclass(slots=True, eq=False)
class Frame:
    """One end-to-end packet as it moves hop by hop through the MAC."""

    packet_id: int
    flow_class: FlowClass
    origin: NodeId
    destination: NodeId
    payload_bytes: int
    header: bytes
    created_asn: int
    src: NodeId = -1
    dst: NodeId = -1
    retry_count: int = 0
    hop_count: int = 0
    track_hops: int = 0
    track_id: int | None = None
    source_route: tuple[NodeId, ...] = ()
    message: Any = None

    def __post_init__(self) -> None:
        if self.payload_bytes + MAC_OVERHEAD > FRAME_BUDGET:
            raise ValueError(
                f"frame of {self.payload_bytes} payload bytes exceeds the {FRAME_BUDGET}-byte budget"
            )


class Slotframe:
    """Global TSCH schedule: dedicated link cells plus shared contention cells.

    Dedicated cells are stored once, from the transmitter's side; the
    receiver's Rx view is derived.
    """

    def __init__(self, length: int, channel_count: int) -> None:
        if length < 1 or channel_count < 1:
            raise ScheduleConflictError("slotframe length and channel count must be >= 1")
        self.length = length
        self.channel_count = channel_count
        self._cells: dict[tuple[int, int], Cell] = {}
        self._by_slot: dict[int, list[Cell]] = {}
        self._node_slots: dict[NodeId, dict[int, Cell]] = {}
        self._shared_slots: set[int] = set()
        # bumped on every mutation so derived caches can tell they are stale
        self.version = 0

    # --- queries -----------------------------------------------------------

    @property
    def cells(self) -> list[Cell]:
        return sorted(self._cells.values())

    @property
    def shared_slot_count(self) -> int:
        return sum(1 for c in self._cells.values() if c.kind == CellKind.SHARED)

    @property
    def shared_slots(self) -> frozenset[int]:
        return frozenset(self._shared_slots)

    def cells_at(self, slot_offset: int) -> list[Cell]:
        return self._by_slot.get(slot_offset, [])

    def cell_at(self, slot_offset: int, channel_offset: int) -> Cell | None:
        return self._cells.get((slot_offset, channel_offset))

    def active_slots(self) -> list[int]:
        return sorted(s for s, cells in self._by_slot.items() if cells)

    def busy_slots(self, node: NodeId) -> set[int]:
        """Slot offsets where the node is already committed (dedicated cells or shared listening)."""
        return set(self._node_slots.get(node, {})) | self._shared_slots

    def dedicated_slot(self, node: NodeId, slot_offset: int) -> Cell | None:
        return self._node_slots.get(node, {}).get(slot_offset)

    def free_channel(self, slot_offset: int) -> int | None:
        used = {c.channel_offset for c in self.cells_at(slot_offset)}
        for ch in range(self.channel_count):
            if ch not in used:
                return ch
        return None

    def node_cells(self, node: NodeId) -> list[Cell]:
        view = []
        for slot in sorted(self._node_slots.get(node, {})):
            cell = self._node_slots[node][slot]
            kind = CellKind.TX_DEDICATED if cell.owner_link[0] == node else CellKind.RX_DEDICATED
            view.append(replace(cell, kind=kind))
        view.extend(c for c in self._cells.values() if c.kind == CellKind.SHARED)
        return sorted(view)

    def link_cells(self, src: NodeId, dst: NodeId, track_label: int | None = None) -> list[Cell]:
        return sorted(
            c
            for c in self._cells.values()
            if c.owner_link == (src, dst) and c.track_label == track_label
        )

    def track_cells(self, track_label: int) -> list[Cell]:
        return sorted(c for c in self._cells.values() if c.track_label == track_label)

    def snapshot(self) -> tuple[Cell, ...]:
        return tuple(self.cells)

    # --- mutation ----------------------------------------------------------

    def add_cell(self, cell: Cell) -> Cell:
        if not 0 <= cell.slot_offset < self.length:
            raise ScheduleConflictError(f"slot offset {cell.slot_offset} outside slotframe of {self.length}")
        if not 0 <= cell.channel_offset < self.channel_count:
            raise ScheduleConflictError(f"channel offset {cell.channel_offset} outside {self.channel_count} channels")
        key = (cell.slot_offset, cell.channel_offset)
        if key in self._cells:
            raise ScheduleConflictError(f"cell {key} already allocated to {self._cells[key].describe()}")
        if cell.kind == CellKind.SHARED:
            if cell.owner_link is not None or cell.track_label is not None:
                raise ScheduleConflictError("shared cells carry no owner link or track label")
            if any(c.is_dedicated for c in self.cells_at(cell.slot_offset)):
                raise ScheduleConflictError(f"slot {cell.slot_offset} already holds dedicated cells")
            self._shared_slots.add(cell.slot_offset)
        elif cell.kind == CellKind.TX_DEDICATED:
            if cell.owner_link is None:
                raise ScheduleConflictError("a dedicated cell needs exactly one owner link")
            if cell.slot_offset in self._shared_slots:
                raise ScheduleConflictError(f"slot {cell.slot_offset} is a shared slot")
            for node in cell.owner_link:
                if cell.slot_offset in self._node_slots.get(node, {}):
                    raise ScheduleConflictError(
                        f"node {node} already busy at slot {cell.slot_offset} (half-duplex)"
                    )
            for node in cell.owner_link:
                self._node_slots.setdefault(node, {})[cell.slot_offset] = cell
        else:
            raise ScheduleConflictError(f"cells are stored as TxDedicated or Shared, not {cell.kind.value}")
        self._cells[key] = cell
        slot_cells = self._by_slot.setdefault(cell.slot_offset, [])
        slot_cells.append(cell)
        slot_cells.sort(key=lambda c: c.channel_offset)
        self.version += 1
        return cell

    def remove_cell(self, cell: Cell) -> None:
        key = (cell.slot_offset, cell.channel_offset)
        if self._cells.get(key) != cell:
            raise ScheduleConflictError(f"cell {key} is not allocated as {cell.describe()}")
        del self._cells[key]
        self._by_slot[cell.slot_offset].remove(cell)
        if cell.kind == CellKind.SHARED:
            if not any(c.kind == CellKind.SHARED for c in self.cells_at(cell.slot_offset)):
                self._shared_slots.discard(cell.slot_offset)
        else:
            for node in cell.owner_link:
                self._node_slots[node].pop(cell.slot_offset, None)
        self.version += 1

    def remove_cells(self, cells: Iterable[Cell]) -> None:
        for cell in list(cells):
            self.remove_cell(cell)

    # --- audit / dump ------------------------------------------------------

    def audit(self) -> list[str]:
        violations = []
        for slot, cells in sorted(self._by_slot.items()):
            seen: dict[NodeId, Cell] = {}
            channels: set[int] = set()
            for cell in cells:
                if cell.channel_offset in channels:
                    violations.append(f"slot {slot}: channel {cell.channel_offset} used twice")
                channels.add(cell.channel_offset)
                if not cell.is_dedicated:
                    continue
                for node in cell.owner_link:
                    if node in seen:
                        violations.append(
                            f"slot {slot}: node {node} in {seen[node].describe()} and {cell.describe()}"
                        )
                    seen[node] = cell
            if slot in self._shared_slots and seen:
                violations.append(f"slot {slot}: dedicated cells inside a shared slot")
        return violations

    def render_grid(self) -> str:
        """Rows are channel offsets, columns slot offsets."""
        used = sorted({c.channel_offset for c in self._cells.values()}) or [0]
        rows = range(max(used) + 1)
        texts = {key: cell.describe() for key, cell in self._cells.items()}
        width = max([5, *(len(t) + 1 for t in texts.values())])
        header = "ch\\ts".ljust(6) + "".join(str(s).rjust(width) for s in range(self.length))
        lines = [header]
        for ch in rows:
            line = str(ch).ljust(6) + "".join(
                texts.get((s, ch), ".").rjust(width) for s in range(self.length)
            )
            lines.append(line)
        return "\n".join(lines)
