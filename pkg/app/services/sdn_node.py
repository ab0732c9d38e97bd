"""
Per-node SDN layer: blacklist, flowtable pipeline, controller join, NSU timer,
and flowtable queries with quenching (CMQ) and partial headers (PPQ).

The node never touches the radio or the event queue directly; everything
goes through its NodeHost, which the network implements.
"""
from __future__ import annotations

import enum
import logging
from collections import Counter
from collections.abc import Callable
from typing import Any, Protocol

from app.models.flowtable import (
    Drop,
    FlowAction,
    FlowEntry,
    FlowTable,
    Forward,
    PendingQuery,
    Query,
    SrhPush,
    class_match,
    flow_key,
)
from app.models.schedule import DropReason, FlowClass, Frame
from app.models.topology import NodeId
from app.models.track import Track, TrackState
from app.models.view import JoinState
from app.schemas.messages import Cack, Cjoin, Conf, EntryStat, Fts, Ftq, NeighborReport, Nsu
from app.schemas.scenario import SdnParams

logger = logging.getLogger(__name__)

MAX_ENTRY_STATS = 7

FTQ_CAUSE_FIRST = "first"
FTQ_CAUSE_EXPIRY = "expiry"

# every class except application data goes through legacy Layer-3
DEFAULT_BLACKLIST_CLASSES = (
    FlowClass.RPL,
    FlowClass.NSU,
    FlowClass.FTQ,
    FlowClass.SDN_DOWN,
    FlowClass.JOIN,
    FlowClass.RSV,
)


class Disposition(str, enum.Enum):
    FORWARDED_L3 = "ForwardedL3"
    FORWARDED_SDN = "ForwardedSdn"
    FORWARDED_SRH = "ForwardedSrh"
    DROPPED = "Dropped"
    QUERIED_BUFFERED = "Queried+Buffered"
    QUERIED_FORWARDED = "Queried+ForwardedL3"
    DELIVERED_LOCAL = "DeliveredLocal"


class NodeHost(Protocol):
    @property
    def now_s(self) -> float: ...

    def forward_l3(self, node: NodeId, frame: Frame) -> None: ...

    def forward_sdn(self, node: NodeId, frame: Frame, next_hop: NodeId) -> None: ...

    def deliver_local(self, node: NodeId, frame: Frame) -> None: ...

    def drop(self, node: NodeId, frame: Frame, reason: DropReason) -> None: ...

    def send_control(
        self, node: NodeId, message: Any, flow_class: FlowClass, ftq_cause: str | None = None
    ) -> None: ...

    def schedule(self, delay_s: float, kind: str, callback: Callable[..., Any], payload: Any = None) -> Any: ...

    def cancel(self, handle: Any) -> None: ...

    def queue_occupancy(self, node: NodeId) -> int: ...

    def energy(self, node: NodeId) -> int: ...

    def neighbor_estimates(self, node: NodeId) -> list[tuple[NodeId, int]]: ...

    def on_default_route(self, node: NodeId, destination: NodeId) -> bool: ...

    def align_to_control_slot(self, node: NodeId, delay_s: float) -> float: ...

    def request_track(self, node: NodeId) -> Track | None: ...

    def on_join_state(self, node: NodeId, state: JoinState) -> None: ...


def default_blacklist() -> list:
    return [class_match(c) for c in DEFAULT_BLACKLIST_CLASSES]


class SdnNode:
    def __init__(
        self,
        node_id: NodeId,
        host: NodeHost,
        params: SdnParams,
        *,
        track_mode: bool = False,
        track_retries: int = 3,
        blacklist: list | None = None,
    ) -> None:
        self.node_id = node_id
        self.host = host
        self.params = params
        self.track_mode = track_mode
        self.track_retries = track_retries
        self.flowtable = FlowTable(
            params.flowtable_capacity, default_blacklist() if blacklist is None else blacklist
        )
        self.state = JoinState.DISCOVERING
        self.nsu_period = float(params.nsu_period)
        self.flow_lifetime = float(params.flow_lifetime)
        self.pending: dict[int, PendingQuery] = {}
        self.track: Track | None = None
        self.track_attempts = 0
        self.track_failed = False
        self.joined_at: float | None = None

        self.cjoin_sent = 0
        self.ftq_sent = 0
        self.nsu_sent = 0
        self.refresh_ignored = 0
        self.ftq_times: list[float] = []
        self.nsu_times: list[float] = []
        self.ftq_causes: dict[str, int] = {FTQ_CAUSE_FIRST: 0, FTQ_CAUSE_EXPIRY: 0}
        self.dispositions: Counter[Disposition] = Counter()

        self._ftq_seq = 0
        self._answered_keys: set[int] = set()
        self._cack = False
        self._conf = False
        self._join_timer: Any = None
        self._nsu_timer: Any = None
        self._nsu_due = 0.0
        self._last_nsu: float | None = None

    @property
    def is_joined(self) -> bool:
        return self.state in (JoinState.JOINED, JoinState.TRACK_READY)

    @property
    def is_terminal(self) -> bool:
        if self.state in (JoinState.TRACK_READY, JoinState.UNJOINED):
            return True
        return self.state == JoinState.JOINED and (not self.track_mode or self.track_failed)

    # --- packet pipeline ---------------------------------------------------

    def handle_packet(self, frame: Frame) -> Disposition:
        disposition = self._dispatch(frame)
        self.dispositions[disposition] += 1
        return disposition

    def _dispatch(self, frame: Frame) -> Disposition:
        if frame.destination == self.node_id:
            self.host.deliver_local(self.node_id, frame)
            return Disposition.DELIVERED_LOCAL
        if frame.source_route:
            next_hop, frame.source_route = frame.source_route[0], frame.source_route[1:]
            self.host.forward_sdn(self.node_id, frame, next_hop)
            return Disposition.FORWARDED_SRH
        if not self.is_joined or self.flowtable.is_blacklisted(frame.header):
            self.host.forward_l3(self.node_id, frame)
            return Disposition.FORWARDED_L3
        entry = self.flowtable.lookup(frame.header, self.host.now_s)
        if entry is None:
            return self._on_miss(frame)
        return self._apply_action(frame, entry.action)

    def _on_miss(self, frame: Frame) -> Disposition:
        """Query the controller; frames bound up the default route keep moving meanwhile."""
        if self.params.default_route_fallback and self.host.on_default_route(self.node_id, frame.destination):
            self.send_ftq(frame, hold=False)
            self.host.forward_l3(self.node_id, frame)
            return Disposition.QUERIED_FORWARDED
        self.send_ftq(frame)
        return Disposition.QUERIED_BUFFERED

    def _apply_action(self, frame: Frame, action: FlowAction) -> Disposition:
        match action:
            case Forward(next_hop=hop):
                self.host.forward_sdn(self.node_id, frame, hop)
                return Disposition.FORWARDED_SDN
            case SrhPush(route=route):
                frame.source_route = tuple(route[1:])
                self.host.forward_sdn(self.node_id, frame, route[0])
                return Disposition.FORWARDED_SDN
            case Drop():
                self.host.drop(self.node_id, frame, DropReason.FLOW_DROP)
                return Disposition.DROPPED
            case Query():
                return self._on_miss(frame)
        raise TypeError(f"unsupported action {action!r}")

    # --- flowtable queries -------------------------------------------------

    def send_ftq(self, frame: Frame, *, hold: bool = True) -> Ftq | None:
        """Emit an FTQ for the frame's flow (one per key under CMQ); hold=True buffers the frame."""
        key = flow_key(frame.header)
        if key is None:
            if hold:
                self.host.drop(self.node_id, frame, DropReason.NO_ROUTE)
            return None
        pending = self.pending.get(key)
        if pending is not None and self.params.cmq_enabled:
            if hold:
                self._buffer(pending, frame)
            return None
        if pending is None:
            pending = PendingQuery(key, frame.header, self.host.now_s)
            self.pending[key] = pending
            self._arm_query_timer(pending)
        if hold:
            self._buffer(pending, frame)
        return self._emit_ftq(pending)

    def _emit_ftq(self, pending: PendingQuery) -> Ftq:
        now = self.host.now_s
        ftq = Ftq(node_id=self.node_id, seq=self._ftq_seq & 0xFFFF, header=pending.header[: self.params.ppq_bytes])
        self._ftq_seq += 1
        pending.ftq_count += 1
        pending.sent_at = now
        self.ftq_sent += 1
        self.ftq_times.append(now)
        cause = FTQ_CAUSE_EXPIRY if pending.flow_key in self._answered_keys else FTQ_CAUSE_FIRST
        self.ftq_causes[cause] += 1
        logger.debug("node %d FTQ #%d for key %d (%s)", self.node_id, ftq.seq, pending.flow_key, cause)
        self.host.send_control(self.node_id, ftq, FlowClass.FTQ, ftq_cause=cause)
        return ftq

    def _buffer(self, pending: PendingQuery, frame: Frame) -> None:
        if len(pending.buffered) >= self.params.query_buffer:
            self.host.drop(self.node_id, pending.buffered.pop(0), DropReason.QUERY_BUFFER_OVERFLOW)
        pending.buffered.append(frame)

    def _arm_query_timer(self, pending: PendingQuery) -> None:
        pending.timer = self.host.schedule(
            self.params.query_timeout, "query-timeout", self._query_timeout, pending.flow_key
        )

    def _query_timeout(self, key: int) -> None:
        pending = self.pending.get(key)
        if pending is None:
            return
        if pending.retries_left > 0:
            pending.retries_left -= 1
            self._emit_ftq(pending)
            self._arm_query_timer(pending)
            return
        del self.pending[key]
        logger.debug("node %d query for key %d timed out, dropping %d", self.node_id, key, len(pending.buffered))
        for frame in pending.buffered:
            self.host.drop(self.node_id, frame, DropReason.QUERY_TIMEOUT)

    def apply_fts(self, fts: Fts) -> FlowTable:
        now = self.host.now_s
        for spec in fts.entries:
            entry = FlowEntry(
                entry_id=spec.entry_id,
                match=tuple(m.to_match() for m in spec.matches),
                action=spec.action.to_action(),
                lifetime=float(spec.lifetime),
                last_refresh=now,
            )
            self.flowtable.insert(entry)
        for entry_id in fts.refresh_ids:
            if not self.flowtable.refresh(entry_id, now):
                self.refresh_ignored += 1
        self._flush_pending(now)
        return self.flowtable

    def _flush_pending(self, now: float) -> None:
        for key, pending in list(self.pending.items()):
            if not any(e.is_live(now) and e.matches(pending.header) for e in self.flowtable.entries):
                continue
            del self.pending[key]
            self.host.cancel(pending.timer)
            self._answered_keys.add(key)
            for frame in pending.buffered:
                self.handle_packet(frame)

    # --- node state updates ------------------------------------------------

    def tick_nsu(self) -> Nsu | None:
        if not self.is_joined:
            return None
        now = self.host.now_s
        stats = []
        for entry in self.flowtable.live_entries(now):
            hits = entry.hit_count - entry.reported_hits
            if hits > 0:
                stats.append(EntryStat(entry_id=entry.entry_id, hits=min(hits, 0xFF)))
            entry.reported_hits = entry.hit_count
        stats.sort(key=lambda s: (-s.hits, s.entry_id))
        nsu = Nsu(
            node_id=self.node_id,
            energy=min(self.host.energy(self.node_id), 0xFFFF),
            queue=min(self.host.queue_occupancy(self.node_id), 0xFF),
            neighbors=[
                NeighborReport(node_id=n, link_estimate=q) for n, q in self.host.neighbor_estimates(self.node_id)
            ],
            entry_stats=stats[:MAX_ENTRY_STATS],
        )
        self.nsu_sent += 1
        self.nsu_times.append(now)
        self._last_nsu = now
        self.host.send_control(self.node_id, nsu, FlowClass.NSU)
        return nsu

    def _nsu_timer_fired(self) -> None:
        self._nsu_timer = None
        self.tick_nsu()
        self._arm_nsu(self._nsu_due + self.nsu_period - self.host.now_s)

    def _arm_nsu(self, delay_s: float) -> None:
        """Arm the next NSU at now + delay_s, fired on the node's control slot when it has one.

        The nominal due time advances by whole periods, so slot alignment never drifts the cadence.
        """
        self.host.cancel(self._nsu_timer)
        delay_s = max(0.0, delay_s)
        self._nsu_due = self.host.now_s + delay_s
        fire_in = self.host.align_to_control_slot(self.node_id, delay_s)
        self._nsu_timer = self.host.schedule(fire_in, "nsu", self._nsu_timer_fired)

    # --- controller join ---------------------------------------------------

    def start_join(self) -> None:
        if self.state != JoinState.DISCOVERING:
            return
        self.state = JoinState.JOINING
        self.host.on_join_state(self.node_id, self.state)
        self._send_cjoin()

    def _send_cjoin(self) -> None:
        self.cjoin_sent += 1
        self.host.send_control(self.node_id, Cjoin(node_id=self.node_id), FlowClass.JOIN)
        self._join_timer = self.host.schedule(self.params.cjoin_retry_interval, "cjoin-retry", self._cjoin_timeout)

    def _cjoin_timeout(self) -> None:
        self._join_timer = None
        if self.state != JoinState.JOINING:
            return
        if self.cjoin_sent > self.params.cjoin_max_retries:
            self.state = JoinState.UNJOINED
            logger.warning("node %d gave up joining after %d CJOINs", self.node_id, self.cjoin_sent)
            self.host.on_join_state(self.node_id, self.state)
            return
        logger.debug("node %d CJOIN retry %d", self.node_id, self.cjoin_sent)
        self._send_cjoin()

    def receive_control(self, message: Any) -> None:
        match message:
            case Cack():
                self._cack = True
                self._maybe_joined()
            case Conf():
                self._apply_conf(message)
                self._conf = True
                self._maybe_joined()
            case Fts():
                self.apply_fts(message)
            case _:
                logger.debug("node %d ignores %s", self.node_id, type(message).__name__)

    def _apply_conf(self, conf: Conf) -> None:
        self.flow_lifetime = float(conf.flow_lifetime)
        if conf.nsu_period == self.nsu_period and self._conf:
            return
        self.nsu_period = float(conf.nsu_period)
        if self.is_joined:
            now = self.host.now_s
            reference = self._last_nsu if self._last_nsu is not None else now
            self._arm_nsu(reference + self.nsu_period - now)

    def _maybe_joined(self) -> None:
        if self.state != JoinState.JOINING or not (self._cack and self._conf):
            return
        self.state = JoinState.JOINED
        self.joined_at = self.host.now_s
        self.host.cancel(self._join_timer)
        self._join_timer = None
        logger.info("node %d joined after %d CJOINs", self.node_id, self.cjoin_sent)
        self._arm_nsu(self.nsu_period)
        self.host.on_join_state(self.node_id, self.state)
        if self.track_mode:
            self._request_track()

    # --- tracks ------------------------------------------------------------

    def _request_track(self) -> None:
        self.track_attempts += 1
        self.host.request_track(self.node_id)

    def on_track_state(self, track: Track) -> None:
        if track.source != self.node_id:
            return
        if track.state == TrackState.ACTIVE:
            self.track = track
            self.state = JoinState.TRACK_READY
            if self._nsu_timer is not None:
                self._arm_nsu(self._nsu_due - self.host.now_s)
            self.host.on_join_state(self.node_id, self.state)
        elif track.state == TrackState.FAILED and self.state == JoinState.JOINED:
            if self.track_attempts <= self.track_retries:
                self.host.schedule(0.0, "track-retry", self._request_track)
            else:
                self.track_failed = True
                logger.warning("node %d: track allocation failed %d times", self.node_id, self.track_attempts)
                self.host.on_join_state(self.node_id, self.state)
        elif track.state == TrackState.RELEASED and self.track is track:
            self.track = None
            self.state = JoinState.JOINED
