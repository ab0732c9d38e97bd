"""
One simulated run: wires the engine, radio, MAC, tracks, SDN nodes and the
controller together, generates application traffic and keeps a record of
every packet from creation to its single terminal outcome.
"""
from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from app.models.flowtable import HEADER_MIN, build_header
from app.models.record import DELIVERED, PacketRecord
from app.models.schedule import BEST_EFFORT, Cell, DropReason, FlowClass, Frame
from app.models.topology import CONTROLLER_ID, NodeId
from app.models.track import ReservationRequest, ReservationSignal, Track
from app.models.view import JoinState
from app.schemas.scenario import Scenario
from app.services.codec import message_size
from app.services.controller import Controller, ControllerPolicy
from app.services.engine import Event, RngStreams, SimEngine
from app.services.mac import TschMac
from app.services.radio import build_linear_topology
from app.services.routing import (
    RoutingError,
    build_dag,
    build_routing_table,
    compute_source_route,
    install_downward_route,
    lookup_route,
)
from app.services.scheduler import build_base_schedule
from app.services.sdn_node import Disposition, SdnNode
from app.services.tracks import SwitchResult, TrackEngine

logger = logging.getLogger(__name__)

SDN_CONTROL_CLASSES = (FlowClass.NSU, FlowClass.FTQ)


@dataclass
class RunOutcome:
    mode: str
    seed: int
    slot_duration_ms: float
    warmup_end_asn: int
    end_asn: int
    records: list[PacketRecord]
    join_states: dict[NodeId, str]
    audit_violations: list[str]
    stale_nodes: dict[NodeId, float]
    traffic_shape: dict[NodeId, dict[str, float | None]]
    ftq_causes: dict[str, int]
    tracks: list[dict[str, object]]
    schedule_grid: str
    controller_log: list[str] = field(default_factory=list)

    @property
    def measured(self) -> list[PacketRecord]:
        return [r for r in self.records if r.enqueue_asn >= self.warmup_end_asn]

    @property
    def warmup(self) -> list[PacketRecord]:
        return [r for r in self.records if r.enqueue_asn < self.warmup_end_asn]


class Network:
    def __init__(
        self,
        scenario: Scenario,
        seed: int | None = None,
        *,
        audit: bool | None = None,
        trace: bool = False,
        warmup_limit_s: float = 600.0,
    ) -> None:
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.mode = scenario.mode
        self.warmup_limit_s = warmup_limit_s
        tsch = scenario.tsch
        topo = scenario.topology

        self.engine = SimEngine(tsch.slot_duration, trace=trace)
        self.rngs = RngStreams.from_seed(self.seed)
        self.topology = build_linear_topology(topo.hop_count, topo.spacing, topo.tx_range, topo.link_quality)
        self.dag = build_dag(self.topology, CONTROLLER_ID, scenario.rpl.route_lifetime)
        self.routing_tables = {n: build_routing_table(self.dag, n) for n in self.dag.nodes}
        self.slotframe = build_base_schedule(self.dag, tsch.slotframe_length, tsch.channel_count, tsch.shared_slots)
        self.mac = TschMac(
            self.topology,
            self.slotframe,
            self.rngs,
            queue_capacity=tsch.queue_capacity,
            max_retries=tsch.max_retries,
            p_shared=tsch.p_shared,
            audit=scenario.audit if audit is None else audit,
        )
        self.mac.on_receive = self._on_receive
        self.mac.on_drop = self._on_mac_drop
        self.tracks = TrackEngine(
            self.engine,
            self.slotframe,
            self.topology,
            mac=self.mac,
            hold_slotframes=scenario.track.hold_slotframes,
            transport=self._send_signal,
        )
        self.tracks.on_state_change = self._on_track_state

        self.controller: Controller | None = None
        self.sdn_nodes: dict[NodeId, SdnNode] = {}
        if self.mode.sdn_enabled:
            sdn = scenario.sdn
            self.controller = Controller(
                self.dag,
                ControllerPolicy(sdn.nsu_period, sdn.flow_lifetime, sdn.afr_enabled, sdn.afr_hit_threshold),
            )
            self.sdn_nodes = {
                n: SdnNode(
                    n,
                    self,
                    sdn,
                    track_mode=self.mode.tracks_enabled,
                    track_retries=scenario.track.track_retries,
                )
                for n in self.dag.nodes
                if n != self.dag.root
            }

        self.records: dict[int, PacketRecord] = {}
        self.join_states: dict[NodeId, JoinState] = {
            n: JoinState.DISCOVERING for n in self.dag.nodes if n != self.dag.root
        }
        self.warmup_end_asn: int | None = None
        self.audit_violations: list[str] = list(self.slotframe.audit())
        self._live: dict[int, Frame] = {}
        self._next_packet_id = 1
        self._app_started: set[NodeId] = set()
        self._terminal: set[NodeId] = set()
        self._cursor = 0
        self._started = False

    # --- clock helpers (NodeHost) ------------------------------------------

    @property
    def now_s(self) -> float:
        return self.engine.clock.time_s

    def schedule(self, delay_s: float, kind: str, callback: Callable[..., Any], payload: Any = None) -> Event:
        return self.engine.schedule_in(self.engine.clock.slots_for(delay_s), kind, callback, payload)

    def cancel(self, handle: Event | None) -> None:
        self.engine.cancel(handle)

    # --- run control -------------------------------------------------------

    def start(self) -> None:
        if self._started:
            return
        self._started = True
        stagger = self.scenario.rpl.join_stagger
        for node in sorted(self.join_states):
            delay = self.dag.rank[node] * stagger
            if self.mode.sdn_enabled:
                self.schedule(delay, "sdn-join", self._sdn_join, node)
            else:
                self.schedule(delay, "rpl-join", self._rpl_joined, node)

    def run(self) -> RunOutcome:
        self.start()
        limit = self.engine.clock.slots_for(self.warmup_limit_s)
        self.advance_until(limit, stop=lambda: self.warmup_end_asn is not None)
        if self.warmup_end_asn is None:
            self.warmup_end_asn = self.engine.asn
            logger.warning("seed %d: warm-up limit reached before every node settled", self.seed)
        end = self.warmup_end_asn + self.engine.clock.slots_for(self.scenario.duration)
        self.advance_until(end)
        return self.finish()

    def advance_until(self, end_asn: int, stop: Callable[[], bool] | None = None) -> None:
        """Interleave event dispatch with slot execution, skipping slots while every queue is empty."""
        engine, mac = self.engine, self.mac
        while self._cursor <= end_asn:
            if stop is not None and stop():
                return
            if mac.backlog == 0:
                nxt = engine.next_event_asn()
                if nxt is None or nxt > end_asn:
                    engine.run_until(end_asn)
                    self._cursor = end_asn + 1
                    return
                engine.run_until(nxt)
                self._cursor = max(self._cursor, nxt)
                continue
            slot_asn = mac.next_active_asn(self._cursor)
            if slot_asn is None or slot_asn > end_asn:
                engine.run_until(end_asn)
                self._cursor = end_asn + 1
                return
            engine.run_until(slot_asn)
            mac.execute_slot(slot_asn)
            self._cursor = slot_asn + 1

    def finish(self) -> RunOutcome:
        for frame in list(self._live.values()):
            self._terminate(frame, DropReason.IN_FLIGHT.value)
        self.audit_violations.extend(self.mac.violations)
        warmup_end = self.warmup_end_asn if self.warmup_end_asn is not None else self.engine.asn
        return RunOutcome(
            mode=self.mode.value,
            seed=self.seed,
            slot_duration_ms=self.engine.clock.slot_duration_ms,
            warmup_end_asn=warmup_end,
            end_asn=self.engine.asn,
            records=[self.records[k] for k in sorted(self.records)],
            join_states={n: s.value for n, s in sorted(self.join_states.items())},
            audit_violations=list(self.audit_violations),
            stale_nodes=self.controller.stale_nodes(self.now_s) if self.controller else {},
            traffic_shape=self.traffic_shape(),
            ftq_causes=self._ftq_causes(),
            tracks=self.tracks.track_rows(),
            schedule_grid=self.slotframe.render_grid(),
            controller_log=self.controller.log_lines() if self.controller else [],
        )

    # --- packets -----------------------------------------------------------

    def new_frame(
        self,
        flow_class: FlowClass,
        origin: NodeId,
        destination: NodeId,
        *,
        message: Any = None,
        header_bytes: int = HEADER_MIN,
        body_bytes: int | None = None,
        ftq_cause: str | None = None,
    ) -> Frame:
        packet_id = self._next_packet_id
        self._next_packet_id += 1
        if body_bytes is None:
            body_bytes = message_size(message) if message is not None else 0
        frame = Frame(
            packet_id=packet_id,
            flow_class=flow_class,
            origin=origin,
            destination=destination,
            payload_bytes=header_bytes + body_bytes,
            header=build_header(flow_class, destination, origin, packet_id, header_bytes),
            created_asn=self.engine.asn,
            message=message,
        )
        self.records[packet_id] = PacketRecord(
            packet_id, flow_class, origin, destination, self.engine.asn, ftq_cause=ftq_cause
        )
        self._live[packet_id] = frame
        return frame

    def _terminate(self, frame: Frame, outcome: str) -> None:
        if self._live.pop(frame.packet_id, None) is None:
            return
        record = self.records[frame.packet_id]
        record.outcome = outcome
        record.hop_count = frame.hop_count
        record.track_hops = frame.track_hops
        if outcome == DELIVERED:
            record.deliver_asn = self.engine.asn

    def _enqueue(self, node: NodeId, frame: Frame, next_hop: NodeId) -> None:
        frame.dst = next_hop
        self.mac.enqueue_frame(node, frame, BEST_EFFORT)

    def forward_l3(self, node: NodeId, frame: Frame) -> None:
        """Legacy Layer-3: source route when present, else root source-routes and others go upward."""
        try:
            if frame.source_route:
                next_hop, frame.source_route = frame.source_route[0], frame.source_route[1:]
            elif node == self.dag.root:
                route = compute_source_route(self.dag, frame.destination)
                next_hop, frame.source_route = route[0], route[1:]
            else:
                next_hop = lookup_route(self.routing_tables[node], frame.destination, self.now_s)
        except (RoutingError, IndexError):
            self.drop(node, frame, DropReason.NO_ROUTE)
            return
        self._enqueue(node, frame, next_hop)

    def forward_sdn(self, node: NodeId, frame: Frame, next_hop: NodeId) -> None:
        if not self.topology.in_range(node, next_hop):
            self.drop(node, frame, DropReason.NO_ROUTE)
            return
        self._enqueue(node, frame, next_hop)

    def drop(self, node: NodeId, frame: Frame, reason: DropReason) -> None:
        logger.debug("drop packet %d (%s) at node %d: %s", frame.packet_id, frame.flow_class.value, node, reason.value)
        self._terminate(frame, reason.value)

    def _on_mac_drop(self, frame: Frame, reason: DropReason, node: NodeId) -> None:
        self.drop(node, frame, reason)

    def _on_receive(self, node: NodeId, frame: Frame, cell: Cell) -> None:
        if cell.track_label is not None:
            result = self.tracks.forward_on_track(node, frame, self.tracks.ingress_bundle_for(cell))
            if result == SwitchResult.TERMINATED:
                self.deliver_local(node, frame)
            return
        if frame.destination == node:
            self.deliver_local(node, frame)
            return
        sdn = self.sdn_nodes.get(node)
        if sdn is not None:
            sdn.handle_packet(frame)
        else:
            self.forward_l3(node, frame)

    def deliver_local(self, node: NodeId, frame: Frame) -> None:
        self._terminate(frame, DELIVERED)
        match frame.flow_class:
            case FlowClass.RSV:
                self.tracks.on_signal(node, frame.message)
            case FlowClass.NSU | FlowClass.FTQ | FlowClass.JOIN if self.controller is not None:
                replies = self.controller.receive(frame.origin, frame.message, self.engine.asn, self.now_s)
                for destination, message in replies:
                    self._send_down(destination, message)
            case FlowClass.SDN_DOWN if node in self.sdn_nodes:
                self.sdn_nodes[node].receive_control(frame.message)

    def _send_down(self, destination: NodeId, message: Any) -> None:
        frame = self.new_frame(FlowClass.SDN_DOWN, self.dag.root, destination, message=message)
        self.forward_l3(self.dag.root, frame)

    def send_control(
        self, node: NodeId, message: Any, flow_class: FlowClass, ftq_cause: str | None = None
    ) -> None:
        frame = self.new_frame(flow_class, node, self.dag.root, message=message, ftq_cause=ftq_cause)
        if self.mode.tracks_enabled and flow_class in SDN_CONTROL_CLASSES:
            track = self.tracks.active_track_for(node)
            if track is not None:
                self.tracks.inject(track, frame)
                return
        self.sdn_nodes[node].handle_packet(frame)

    def _send_signal(self, sender: NodeId, receiver: NodeId, signal: ReservationSignal) -> None:
        body = 3 + 2 * len(signal.route)
        if isinstance(signal, ReservationRequest):
            body += 4 + 3 * len(signal.candidate_cells)
        frame = self.new_frame(FlowClass.RSV, sender, receiver, message=signal, body_bytes=body)
        self._enqueue(sender, frame, receiver)

    # --- application traffic -----------------------------------------------

    def _start_app(self, node: NodeId) -> None:
        if node in self._app_started:
            return
        self._app_started.add(node)
        self.schedule(self._app_interval(), "app", self._app_tick, node)

    def _app_interval(self) -> float:
        low, high = self.scenario.app.interval
        return self.rngs.app_interval.uniform(low, high)

    def _app_tick(self, node: NodeId) -> None:
        app = self.scenario.app
        frame = self.new_frame(
            FlowClass.APP, node, self.dag.root, header_bytes=app.header_bytes, body_bytes=app.payload_bytes
        )
        sdn = self.sdn_nodes.get(node)
        if sdn is not None:
            sdn.handle_packet(frame)
        else:
            self.forward_l3(node, frame)
        self.schedule(self._app_interval(), "app", self._app_tick, node)

    # --- join / tracks -----------------------------------------------------

    def _rpl_joined(self, node: NodeId) -> None:
        self._advertise_dao(node)
        self.join_states[node] = JoinState.JOINED
        self._settle(node)

    def _sdn_join(self, node: NodeId) -> None:
        self._advertise_dao(node)
        self.sdn_nodes[node].start_join()

    def _advertise_dao(self, node: NodeId) -> None:
        """Each non-root ancestor (re)installs its storing route toward node; refreshed at half the route lifetime."""
        if node == self.dag.root:
            return
        hop = node
        for ancestor in self.dag.ancestors(node):
            if ancestor != self.dag.root:
                install_downward_route(self.routing_tables[ancestor], node, hop, self.now_s)
            hop = ancestor
        self.schedule(self.dag.route_lifetime / 2, "dao", self._advertise_dao, node)

    def on_join_state(self, node: NodeId, state: JoinState) -> None:
        self.join_states[node] = state
        if self.sdn_nodes[node].is_terminal:
            self._settle(node)

    def _settle(self, node: NodeId) -> None:
        self._terminal.add(node)
        self._start_app(node)
        if self.warmup_end_asn is None and len(self._terminal) == len(self.join_states):
            self.warmup_end_asn = self.engine.asn
            logger.info("seed %d: warm-up ends at asn %d (%.1f s)", self.seed, self.engine.asn, self.now_s)

    def request_track(self, node: NodeId) -> Track | None:
        route = (node, *self.dag.ancestors(node))
        return self.tracks.allocate_track_hop_by_hop(node, self.dag.root, route, self.scenario.track.bandwidth)

    def _on_track_state(self, track: Track) -> None:
        self.audit_violations.extend(self.slotframe.audit())
        sdn = self.sdn_nodes.get(track.source)
        if sdn is not None:
            sdn.on_track_state(track)

    # --- node telemetry (NodeHost) -----------------------------------------

    def queue_occupancy(self, node: NodeId) -> int:
        return self.mac.occupancy(node)

    def energy(self, node: NodeId) -> int:
        return self.mac.energy_estimate(node)

    def neighbor_estimates(self, node: NodeId) -> list[tuple[NodeId, int]]:
        return [(n, self.mac.link_estimate(node, n)) for n in self.topology.neighbors(node)]

    def on_default_route(self, node: NodeId, destination: NodeId) -> bool:
        return destination in self.dag.ancestors(node)

    def align_to_control_slot(self, node: NodeId, delay_s: float) -> float:
        """Stretch delay_s to the first egress cell of the node's active track; unchanged without one."""
        track = self.tracks.active_track_for(node)
        egress = track.egress_of(node) if track is not None else None
        if egress is None:
            return delay_s
        clock = self.engine.clock
        target = clock.slots_for(delay_s)
        length = self.slotframe.length
        wait = min((slot - self.engine.asn - target) % length for slot in egress.slots)
        return clock.seconds_for(target + wait)

    # --- reporting ---------------------------------------------------------

    def traffic_shape(self) -> dict[NodeId, dict[str, float | None]]:
        shape = {}
        for node, sdn in sorted(self.sdn_nodes.items()):
            nsu_gaps = np.diff(sdn.nsu_times)
            ftq_gaps = np.diff(sdn.ftq_times)
            shape[node] = {
                "nsu_mean_interval_s": float(np.mean(nsu_gaps)) if nsu_gaps.size else None,
                "ftq_median_interval_s": float(np.median(ftq_gaps)) if ftq_gaps.size else None,
                "nsu_sent": float(sdn.nsu_sent),
                "ftq_sent": float(sdn.ftq_sent),
                **{d.value: float(sdn.dispositions[d]) for d in Disposition},
            }
        return shape

    def _ftq_causes(self) -> dict[str, int]:
        totals: dict[str, int] = {}
        for sdn in self.sdn_nodes.values():
            for cause, count in sdn.ftq_causes.items():
                totals[cause] = totals.get(cause, 0) + count
        return totals
