"""
Track engine: hop-by-hop reservation of cell bundles, Layer-2 switching along
reserved bundles, and teardown.

Reservation signals travel as in-simulation messages through a pluggable
transport (the network routes them over the best-effort schedule). Every node
that tentatively reserves cells arms a hold timer; a failure notice or an
expired timer at the source tears the whole track down.
"""
from __future__ import annotations

import enum
import logging
from collections.abc import Callable, Collection, Mapping

from app.models.schedule import Cell, CellKind, DropReason, Frame, Slotframe
from app.models.topology import NodeId, Topology
from app.models.track import (
    CellBundle,
    ReservationConfirm,
    ReservationFailure,
    ReservationRequest,
    ReservationSignal,
    Track,
    TrackState,
)
from app.services.engine import Event, SimEngine
from app.services.mac import TschMac

logger = logging.getLogger(__name__)

Transport = Callable[[NodeId, NodeId, ReservationSignal], None]
StateHook = Callable[[Track], None]


class InsufficientCells(ValueError):
    pass


class TrackError(LookupError):
    pass


class SwitchResult(str, enum.Enum):
    SWITCHED = "switched"
    TERMINATED = "terminated"
    STALE = "stale"


def forward_gap(slot_offset: int, ingress_slot: int, slotframe_length: int) -> int:
    """Slots from the ingress cell to the next occurrence of slot_offset; never 0."""
    return (slot_offset - ingress_slot) % slotframe_length or slotframe_length


def select_candidate_cells(
    local_busy: Collection[int],
    neighbor_busy: Collection[int],
    ingress_slot: int,
    count: int,
    slotframe_length: int,
    channel_count: int = 16,
    occupied_channels: Mapping[int, Collection[int]] | None = None,
) -> list[tuple[int, int]]:
    """Pick `count` (slot, channel) pairs free for both ends, nearest after the ingress slot.

    Each returned pair uses a distinct slot offset. Within a slot the lowest
    channel offset not already taken there is used.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    occupied = occupied_channels or {}
    ranked: list[tuple[int, int, int]] = []
    for slot in range(slotframe_length):
        if slot in local_busy or slot in neighbor_busy:
            continue
        taken = occupied.get(slot, ())
        channel = next((ch for ch in range(channel_count) if ch not in taken), None)
        if channel is None:
            continue
        ranked.append((forward_gap(slot, ingress_slot, slotframe_length), slot, channel))
    if len(ranked) < count:
        raise InsufficientCells(f"need {count} mutually free cells, found {len(ranked)}")
    ranked.sort()
    return [(slot, channel) for _, slot, channel in ranked[:count]]


def candidate_cells_for(
    slotframe: Slotframe, src: NodeId, dst: NodeId, ingress_slot: int, count: int
) -> list[tuple[int, int]]:
    occupied = {
        slot: {c.channel_offset for c in slotframe.cells_at(slot)} for slot in slotframe.active_slots()
    }
    return select_candidate_cells(
        slotframe.busy_slots(src),
        slotframe.busy_slots(dst),
        ingress_slot,
        count,
        slotframe.length,
        slotframe.channel_count,
        occupied,
    )


class TrackEngine:
    def __init__(
        self,
        engine: SimEngine,
        slotframe: Slotframe,
        topology: Topology,
        *,
        mac: TschMac | None = None,
        hold_slotframes: int = 4,
        transport: Transport | None = None,
    ) -> None:
        self.engine = engine
        self.slotframe = slotframe
        self.topology = topology
        self.mac = mac
        self.hold_slotframes = hold_slotframes
        self.transport: Transport = transport or self._direct_transport
        self.on_state_change: StateHook | None = None
        self.tracks: dict[int, Track] = {}
        self.stale_drops = 0
        self._next_track_id = 1
        self._hold_timers: dict[tuple[int, NodeId], Event] = {}

    # --- allocation --------------------------------------------------------

    def allocate_track_hop_by_hop(
        self,
        source: NodeId,
        destination: NodeId,
        route: list[NodeId] | tuple[NodeId, ...],
        bandwidth: int = 1,
    ) -> Track:
        route = tuple(route)
        if source == destination:
            raise ValueError("track source and destination must differ")
        if len(route) < 2 or route[0] != source or route[-1] != destination:
            raise ValueError(f"route {route} does not run from {source} to {destination}")
        for a, b in zip(route, route[1:]):
            if not self.topology.in_range(a, b):
                raise ValueError(f"route hop {a}->{b} is not a radio link")
        if bandwidth < 1:
            raise ValueError("bandwidth must be >= 1")

        track = Track(self._next_track_id, source, destination, route, bandwidth, requested_asn=self.engine.asn)
        self._next_track_id += 1
        self.tracks[track.track_id] = track
        logger.debug("track %d: request %s bandwidth %d", track.track_id, route, bandwidth)
        self._reserve_and_forward(track, 0, self.slotframe.length - 1)
        return track

    def _reserve_and_forward(self, track: Track, index: int, ingress_slot: int) -> None:
        node, nxt = track.route[index], track.route[index + 1]
        try:
            chosen = candidate_cells_for(self.slotframe, node, nxt, ingress_slot, track.bandwidth)
        except InsufficientCells as e:
            logger.debug("track %d: node %d cannot reserve toward %d: %s", track.track_id, node, nxt, e)
            if index == 0:
                self._fail(track, f"no cells at source {node}")
            else:
                self.transport(
                    node, track.route[index - 1], ReservationFailure(track.track_id, track.route, index, node)
                )
            return

        cells = tuple(
            Cell(slot, channel, CellKind.TX_DEDICATED, (node, nxt), track.track_id) for slot, channel in chosen
        )
        for cell in cells:
            self.slotframe.add_cell(cell)
        track.bundles[node] = CellBundle(node, nxt, track.track_id, cells)

        remaining_round_trip = 2 * (track.hop_count - index)
        hold_slots = self.hold_slotframes * self.slotframe.length * remaining_round_trip
        self._hold_timers[(track.track_id, node)] = self.engine.schedule_in(
            hold_slots, "track-hold", self._hold_expired, (track.track_id, node)
        )
        request = ReservationRequest(
            track.track_id, track.source, track.destination, track.route, index, tuple(chosen),
            track.bandwidth, hold_slots,
        )
        self.transport(node, nxt, request)

    def on_signal(self, node: NodeId, signal: ReservationSignal) -> None:
        track = self.tracks.get(signal.track_id)
        if track is None or track.state != TrackState.ALLOCATING:
            return
        if isinstance(signal, ReservationRequest):
            index = signal.hop_index + 1
            if node == track.destination:
                self.transport(node, track.route[index - 1], ReservationConfirm(track.track_id, track.route, index))
            else:
                ingress_slot = signal.candidate_cells[0][0]
                self._reserve_and_forward(track, index, ingress_slot)
        elif isinstance(signal, ReservationConfirm):
            self._on_confirm(track, node, signal.hop_index - 1)
        elif isinstance(signal, ReservationFailure):
            self._on_failure(track, node, signal)

    def _on_confirm(self, track: Track, node: NodeId, index: int) -> None:
        bundle = track.bundles.get(node)
        if bundle is None:
            # this hop's hold timer already gave the cells back
            self._fail(track, f"confirm reached node {node} after its reservation expired")
            return
        bundle.committed = True
        self.engine.cancel(self._hold_timers.pop((track.track_id, node), None))
        if index == 0:
            track.state = TrackState.ACTIVE
            track.settled_asn = self.engine.asn
            logger.info("track %d active: route %s slots %s", track.track_id, track.route, track.bundle_slots())
            self._notify(track)
        else:
            self.transport(node, track.route[index - 1], ReservationConfirm(track.track_id, track.route, index))

    def _on_failure(self, track: Track, node: NodeId, signal: ReservationFailure) -> None:
        index = signal.hop_index - 1
        self._release_bundle(track, node)
        if index == 0:
            self._fail(track, f"no cells at node {signal.failed_at}")
        else:
            self.transport(
                node,
                track.route[index - 1],
                ReservationFailure(track.track_id, track.route, index, signal.failed_at),
            )

    def _hold_expired(self, key: tuple[int, NodeId]) -> None:
        track_id, node = key
        self._hold_timers.pop(key, None)
        track = self.tracks.get(track_id)
        if track is None or track.state != TrackState.ALLOCATING:
            return
        bundle = track.bundles.get(node)
        if bundle is not None and not bundle.committed:
            self._release_bundle(track, node)
        if node == track.source:
            self._fail(track, "hold timer expired at source")

    def _fail(self, track: Track, reason: str) -> None:
        self._teardown(track)
        track.state = TrackState.FAILED
        track.settled_asn = self.engine.asn
        logger.info("track %d failed: %s", track.track_id, reason)
        self._notify(track)

    # --- teardown ----------------------------------------------------------

    def _release_bundle(self, track: Track, node: NodeId) -> None:
        bundle = track.bundles.pop(node, None)
        if bundle is not None:
            self.slotframe.remove_cells(bundle.cells)
        self.engine.cancel(self._hold_timers.pop((track.track_id, node), None))

    def _teardown(self, track: Track) -> None:
        for node in list(track.bundles):
            self._release_bundle(track, node)
        for key in [k for k in self._hold_timers if k[0] == track.track_id]:
            self.engine.cancel(self._hold_timers.pop(key))

    def release_track(self, track_id: int) -> bool:
        """Return the track's cells to the free pool; False when already released."""
        track = self.tracks.get(track_id)
        if track is None:
            raise TrackError(f"unknown track {track_id}")
        if track.state == TrackState.RELEASED:
            return False
        self._teardown(track)
        track.state = TrackState.RELEASED
        if self.mac is not None:
            drained = self.mac.drain_class(track_id, DropReason.TRACK_STALE)
            self.stale_drops += drained
        logger.info("track %d released", track_id)
        self._notify(track)
        return True

    # --- forwarding --------------------------------------------------------

    def ingress_bundle_for(self, cell: Cell) -> CellBundle | None:
        if cell.track_label is None or cell.owner_link is None:
            return None
        track = self.tracks.get(cell.track_label)
        if track is None:
            return None
        return track.bundles.get(cell.owner_link[0])

    def inject(self, track: Track, frame: Frame) -> bool:
        """Queue a frame at the track source on its egress bundle."""
        egress = track.egress_of(track.source)
        if track.state != TrackState.ACTIVE or egress is None or self.mac is None:
            return False
        frame.dst = egress.dst_mac
        frame.track_id = track.track_id
        return self.mac.enqueue_frame(track.source, frame, track.track_id)

    def forward_on_track(self, node: NodeId, frame: Frame, ingress: CellBundle | None) -> SwitchResult:
        """Switch a frame from its ingress bundle to the paired egress bundle, bypassing Layer-3."""
        track = self.tracks.get(ingress.track_id) if ingress is not None else None
        if (
            track is None
            or track.state != TrackState.ACTIVE
            or ingress.dst_mac != node
            or track.bundles.get(ingress.src_mac) is not ingress
        ):
            self._stale(frame, node)
            return SwitchResult.STALE
        if node == track.destination:
            return SwitchResult.TERMINATED
        egress = track.egress_of(node)
        if egress is None or self.mac is None:
            self._stale(frame, node)
            return SwitchResult.STALE
        frame.dst = egress.dst_mac
        frame.track_id = track.track_id
        self.mac.enqueue_frame(node, frame, track.track_id)
        return SwitchResult.SWITCHED

    def _stale(self, frame: Frame, node: NodeId) -> None:
        self.stale_drops += 1
        if self.mac is not None:
            self.mac.record_drop(frame, DropReason.TRACK_STALE, node)

    # --- queries -----------------------------------------------------------

    def active_track_for(self, source: NodeId) -> Track | None:
        for track in self.tracks.values():
            if track.source == source and track.state == TrackState.ACTIVE:
                return track
        return None

    def track_rows(self) -> list[dict[str, object]]:
        return [
            {
                "track_id": t.track_id,
                "source": t.source,
                "destination": t.destination,
                "state": t.state.value,
                "route": "-".join(str(n) for n in t.route),
                "slots": ";".join("/".join(str(s) for s in slots) for slots in t.bundle_slots()),
            }
            for t in self.tracks.values()
        ]

    def _notify(self, track: Track) -> None:
        if self.on_state_change is not None:
            self.on_state_change(track)

    def _direct_transport(self, sender: NodeId, receiver: NodeId, signal: ReservationSignal) -> None:
        self.engine.schedule_in(1, "rsv-signal", self._deliver_direct, (receiver, signal))

    def _deliver_direct(self, payload: tuple[NodeId, ReservationSignal]) -> None:
        receiver, signal = payload
        self.on_signal(receiver, signal)
