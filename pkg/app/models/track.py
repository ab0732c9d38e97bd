from __future__ import annotations

import enum
from dataclasses import dataclass, field

from app.models.schedule import Cell
from app.models.topology import NodeId


class TrackState(str, enum.Enum):
    ALLOCATING = "Allocating"
    ACTIVE = "Active"
    FAILED = "Failed"
    RELEASED = "Released"


@dataclass(slots=True)
class CellBundle:
    """{src, dst, track_id} plus the cells reserved on that link."""

    src_mac: NodeId
    dst_mac: NodeId
    track_id: int
    cells: tuple[Cell, ...]
    committed: bool = False

    def __post_init__(self) -> None:
        if not self.cells:
            raise ValueError("a cell bundle needs at least one cell")
        for cell in self.cells:
            if cell.track_label != self.track_id or cell.owner_link != (self.src_mac, self.dst_mac):
                raise ValueError(f"cell {cell} does not belong to bundle {self.key}")

    @property
    def key(self) -> tuple[NodeId, NodeId, int]:
        return (self.src_mac, self.dst_mac, self.track_id)

    @property
    def bandwidth(self) -> int:
        return len(self.cells)

    @property
    def slots(self) -> list[int]:
        return sorted(c.slot_offset for c in self.cells)


@dataclass(frozen=True, slots=True)
class TrackHop:
    node: NodeId
    ingress: CellBundle | None
    egress: CellBundle | None


@dataclass(slots=True)
class Track:
    track_id: int
    source: NodeId
    destination: NodeId
    route: tuple[NodeId, ...]
    bandwidth: int
    state: TrackState = TrackState.ALLOCATING
    # keyed by the transmitting node of each link
    bundles: dict[NodeId, CellBundle] = field(default_factory=dict)
    requested_asn: int = 0
    settled_asn: int | None = None

    @property
    def hop_count(self) -> int:
        return len(self.route) - 1

    @property
    def hops(self) -> list[TrackHop]:
        result = []
        for i, node in enumerate(self.route):
            ingress = self.bundles.get(self.route[i - 1]) if i > 0 else None
            egress = self.bundles.get(node) if i < len(self.route) - 1 else None
            result.append(TrackHop(node, ingress, egress))
        return result

    def egress_of(self, node: NodeId) -> CellBundle | None:
        return self.bundles.get(node)

    def next_hop(self, node: NodeId) -> NodeId | None:
        i = self.route.index(node)
        return self.route[i + 1] if i + 1 < len(self.route) else None

    def bundle_slots(self) -> list[list[int]]:
        return [self.bundles[n].slots for n in self.route[:-1] if n in self.bundles]


@dataclass(frozen=True, slots=True)
class ReservationRequest:
    track_id: int
    requester: NodeId
    destination: NodeId
    route: tuple[NodeId, ...]
    # index in route of the node that sent this request
    hop_index: int
    candidate_cells: tuple[tuple[int, int], ...]
    bandwidth: int
    hold_slots: int

    def __post_init__(self) -> None:
        if len(self.candidate_cells) < self.bandwidth:
            raise ValueError("candidate count must cover the requested bandwidth")


@dataclass(frozen=True, slots=True)
class ReservationConfirm:
    track_id: int
    route: tuple[NodeId, ...]
    # index in route of the node that sent this confirm
    hop_index: int


@dataclass(frozen=True, slots=True)
class ReservationFailure:
    track_id: int
    route: tuple[NodeId, ...]
    hop_index: int
    failed_at: NodeId


ReservationSignal = ReservationRequest | ReservationConfirm | ReservationFailure
