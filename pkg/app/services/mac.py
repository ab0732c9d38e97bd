"""
TSCH MAC: per-(neighbor, class) queues and slot-by-slot execution of the schedule.

Dedicated cells drain exactly one queue class; shared cells run slotted
contention among best-effort frames whose link has no dedicated cell.
"""
from __future__ import annotations

import bisect
import enum
import logging
from collections import deque
from collections.abc import Callable, Sequence
from dataclasses import dataclass

from app.models.schedule import BEST_EFFORT, Cell, CellKind, DropReason, Frame, QueueClass, Slotframe
from app.models.topology import NodeId, Topology
from app.services.engine import RngStreams
from app.services.radio import UnknownNodeError, attempt_delivery

logger = logging.getLogger(__name__)

ENERGY_BUDGET = 10_000
LINK_ESTIMATE_MAX = 255

ReceiveHook = Callable[[NodeId, Frame, Cell], None]
DropHook = Callable[[Frame, DropReason, NodeId], None]
# returns True to force the attempt to fail
LossScript = Callable[[int, NodeId, NodeId, Frame], bool]


class OutcomeKind(str, enum.Enum):
    DELIVERY = "delivery"
    LOSS = "loss"
    COLLISION = "collision"
    IDLE = "idle"


@dataclass(frozen=True, slots=True)
class SlotOutcome:
    asn: int
    kind: OutcomeKind
    cell: Cell
    src: NodeId | None = None
    dst: NodeId | None = None
    packet_id: int | None = None
    channel: int | None = None


def hop_channel(
    asn: int, channel_offset: int, channel_count: int = 16, hop_sequence: Sequence[int] | None = None
) -> int:
    if channel_count < 1:
        raise ValueError("channel_count must be >= 1")
    index = (asn + channel_offset) % channel_count
    return index if hop_sequence is None else hop_sequence[index]


class TschMac:
    def __init__(
        self,
        topology: Topology,
        slotframe: Slotframe,
        rngs: RngStreams,
        *,
        queue_capacity: int = 8,
        max_retries: int = 4,
        p_shared: float = 0.5,
        audit: bool = False,
    ) -> None:
        self.topology = topology
        self.slotframe = slotframe
        self.rngs = rngs
        self.queue_capacity = queue_capacity
        self.max_retries = max_retries
        self.p_shared = p_shared
        self.audit = audit
        self.queues: dict[NodeId, dict[tuple[NodeId, QueueClass], deque[Frame]]] = {
            node: {} for node in topology.node_ids
        }
        self.backlog = 0
        self.on_receive: ReceiveHook | None = None
        self.on_drop: DropHook | None = None
        self.loss_script: LossScript | None = None
        self.tx_attempts: dict[NodeId, int] = dict.fromkeys(topology.node_ids, 0)
        self.link_attempts: dict[tuple[NodeId, NodeId], int] = {}
        self.link_acked: dict[tuple[NodeId, NodeId], int] = {}
        self.violations: list[str] = []
        self._cache_version = -1
        self._active_offsets: list[int] = []
        self._dedicated_be_links: set[tuple[NodeId, NodeId]] = set()

    # --- queues ------------------------------------------------------------

    def enqueue_frame(self, node: NodeId, frame: Frame, queue_class: QueueClass = BEST_EFFORT) -> bool:
        if node not in self.queues:
            raise UnknownNodeError(f"unknown node {node}")
        frame.src = node
        queue = self.queues[node].setdefault((frame.dst, queue_class), deque())
        if len(queue) >= self.queue_capacity:
            logger.debug("queue overflow at node %d toward %d (class %s)", node, frame.dst, queue_class)
            self.record_drop(frame, DropReason.QUEUE_OVERFLOW, node)
            return False
        queue.append(frame)
        self.backlog += 1
        return True

    def queue_length(self, node: NodeId, neighbor: NodeId, queue_class: QueueClass = BEST_EFFORT) -> int:
        queue = self.queues[node].get((neighbor, queue_class))
        return len(queue) if queue else 0

    def occupancy(self, node: NodeId) -> int:
        return sum(len(q) for q in self.queues[node].values())

    def drain_class(self, queue_class: QueueClass, reason: DropReason) -> int:
        """Empty every queue of one class, recording each frame as dropped."""
        drained = 0
        for node, queues in self.queues.items():
            for (_, qclass), queue in queues.items():
                if qclass != queue_class:
                    continue
                while queue:
                    self.backlog -= 1
                    drained += 1
                    self.record_drop(queue.popleft(), reason, node)
        return drained

    def pending_frames(self) -> list[Frame]:
        return [f for queues in self.queues.values() for q in queues.values() for f in q]

    # --- link statistics ---------------------------------------------------

    def link_estimate(self, src: NodeId, dst: NodeId) -> int:
        attempts = self.link_attempts.get((src, dst), 0)
        if attempts == 0:
            return LINK_ESTIMATE_MAX
        return round(LINK_ESTIMATE_MAX * self.link_acked.get((src, dst), 0) / attempts)

    def energy_estimate(self, node: NodeId) -> int:
        return max(0, ENERGY_BUDGET - self.tx_attempts[node] // 4)

    # --- schedule-derived caches -------------------------------------------

    def _refresh_cache(self) -> None:
        if self._cache_version == self.slotframe.version:
            return
        self._active_offsets = self.slotframe.active_slots()
        self._dedicated_be_links = {
            c.owner_link
            for c in self.slotframe.cells
            if c.kind == CellKind.TX_DEDICATED and c.track_label is None
        }
        self._cache_version = self.slotframe.version

    def next_active_asn(self, from_asn: int) -> int | None:
        """Earliest asn >= from_asn whose slot offset holds at least one cell."""
        self._refresh_cache()
        if not self._active_offsets:
            return None
        length = self.slotframe.length
        base, offset = divmod(from_asn, length)
        i = bisect.bisect_left(self._active_offsets, offset)
        if i < len(self._active_offsets):
            return base * length + self._active_offsets[i]
        return (base + 1) * length + self._active_offsets[0]

    def uses_shared_cells(self, src: NodeId, dst: NodeId) -> bool:
        self._refresh_cache()
        return (src, dst) not in self._dedicated_be_links

    # --- slot execution ----------------------------------------------------

    def execute_slot(self, asn: int) -> list[SlotOutcome]:
        self._refresh_cache()
        cells = list(self.slotframe.cells_at(asn % self.slotframe.length))
        outcomes: list[SlotOutcome] = []
        if self.audit:
            self._audit_slot(asn, cells)
        for cell in cells:
            if cell.kind == CellKind.SHARED:
                outcomes.extend(self._run_shared_cell(asn, cell))
            else:
                outcomes.append(self._run_dedicated_cell(asn, cell))
        return outcomes

    def _run_dedicated_cell(self, asn: int, cell: Cell) -> SlotOutcome:
        src, dst = cell.owner_link
        queue = self.queues[src].get((dst, cell.track_label))
        if not queue:
            return SlotOutcome(asn, OutcomeKind.IDLE, cell)
        return self._transmit(asn, cell, src, dst, queue, collided=False)

    def _run_shared_cell(self, asn: int, cell: Cell) -> list[SlotOutcome]:
        contenders: list[tuple[NodeId, NodeId, deque[Frame]]] = []
        for node in self.topology.node_ids:
            picked = self._shared_candidate(node)
            if picked is None:
                continue
            # every pending node draws, keeping the backoff stream aligned across runs
            if self.rngs.shared_backoff.draw() < self.p_shared:
                contenders.append((node, *picked))
        if not contenders:
            return [SlotOutcome(asn, OutcomeKind.IDLE, cell)]
        transmitters = {node for node, _, _ in contenders}
        outcomes = []
        for node, dst, queue in contenders:
            outcomes.append(
                self._transmit(asn, cell, node, dst, queue, collided=self._collides(node, dst, transmitters))
            )
        return outcomes

    def _collides(self, node: NodeId, dst: NodeId, transmitters: set[NodeId]) -> bool:
        """A contender collides with any other transmitter in range of itself or of its receiver."""
        if dst in transmitters:
            return True
        in_range = self.topology.in_range
        return any(
            other != node and (in_range(other, node) or in_range(other, dst)) for other in transmitters
        )

    def _shared_candidate(self, node: NodeId) -> tuple[NodeId, deque[Frame]] | None:
        for (neighbor, qclass), queue in self.queues[node].items():
            if queue and qclass is BEST_EFFORT and (node, neighbor) not in self._dedicated_be_links:
                return neighbor, queue
        return None

    def _transmit(
        self, asn: int, cell: Cell, src: NodeId, dst: NodeId, queue: deque[Frame], *, collided: bool
    ) -> SlotOutcome:
        frame = queue[0]
        channel = hop_channel(asn, cell.channel_offset, self.slotframe.channel_count)
        self.tx_attempts[src] += 1
        link = (src, dst)
        self.link_attempts[link] = self.link_attempts.get(link, 0) + 1
        if collided:
            delivered = False
        elif self.loss_script is not None and self.loss_script(asn, src, dst, frame):
            delivered = False
        else:
            delivered = attempt_delivery(self.topology, src, dst, self.rngs.link_loss)

        if delivered:
            queue.popleft()
            self.backlog -= 1
            self.link_acked[link] = self.link_acked.get(link, 0) + 1
            frame.retry_count = 0
            frame.hop_count += 1
            if cell.track_label is not None:
                frame.track_hops += 1
            if self.on_receive is not None:
                self.on_receive(dst, frame, cell)
            return SlotOutcome(asn, OutcomeKind.DELIVERY, cell, src, dst, frame.packet_id, channel)

        frame.retry_count += 1
        if frame.retry_count > self.max_retries:
            queue.popleft()
            self.backlog -= 1
            self.record_drop(frame, DropReason.RETRY_LIMIT, src)
        kind = OutcomeKind.COLLISION if collided else OutcomeKind.LOSS
        return SlotOutcome(asn, kind, cell, src, dst, frame.packet_id, channel)

    def record_drop(self, frame: Frame, reason: DropReason, node: NodeId) -> None:
        if self.on_drop is not None:
            self.on_drop(frame, reason, node)

    def _audit_slot(self, asn: int, cells: list[Cell]) -> None:
        busy: set[NodeId] = set()
        for cell in cells:
            if not cell.is_dedicated:
                continue
            for node in cell.owner_link:
                if node in busy:
                    msg = f"asn {asn}: node {node} double-booked"
                    self.violations.append(msg)
                    logger.warning(msg)
                busy.add(node)
