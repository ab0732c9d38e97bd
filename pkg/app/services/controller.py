"""
SDN controller at the DAG root. Answers are computed only from the DAG, the
policy and the network view built from received messages, so replaying an
inbound trace against a fresh controller reproduces the outbound trace.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any

from pydantic import TypeAdapter

from app.models.flowtable import FLOW_KEY_LENGTH, FLOW_KEY_OFFSET, Drop, FlowAction, Forward, SrhPush, flow_key
from app.models.routing import Dag
from app.models.topology import NodeId
from app.models.view import NetworkView, PushedEntry
from app.schemas.messages import (
    ActionSpec,
    Cack,
    Cjoin,
    Conf,
    FlowEntrySpec,
    Fts,
    Ftq,
    MatchSpec,
    Nsu,
    SdnMessage,
)
from app.services.routing import route_between

logger = logging.getLogger(__name__)

_message_adapter: TypeAdapter = TypeAdapter(SdnMessage)


@dataclass(frozen=True)
class ControllerPolicy:
    nsu_period: int = 10
    flow_lifetime: int = 60
    afr_enabled: bool = False
    afr_hit_threshold: int = 5


@dataclass
class DecisionRecord:
    asn: int
    node: NodeId
    inbound: dict[str, Any]
    outbound: list[dict[str, Any]] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {"asn": self.asn, "node": self.node, "inbound": self.inbound, "outbound": self.outbound},
            sort_keys=True,
        )


def parse_logged_message(payload: dict[str, Any]) -> Any:
    return _message_adapter.validate_json(json.dumps(payload))


class Controller:
    def __init__(self, dag: Dag, policy: ControllerPolicy | None = None) -> None:
        self.dag = dag
        self.policy = policy or ControllerPolicy()
        self.view = NetworkView()
        self.log: list[DecisionRecord] = []
        self.cjoins = 0
        self.ftqs = 0
        self.nsus = 0
        self.ignored_nsus = 0
        self.afr_refreshes = 0
        self._next_entry_id = 1

    @property
    def node_id(self) -> NodeId:
        return self.dag.root

    def receive(self, sender: NodeId, message: Any, asn: int, now_s: float) -> list[tuple[NodeId, Any]]:
        """Dispatch one inbound message; returns (destination, message) pairs to send."""
        match message:
            case Cjoin():
                replies = [(message.node_id, m) for m in self.handle_cjoin(message, now_s)]
            case Ftq():
                replies = [(message.node_id, self.handle_ftq(message, now_s))]
            case Nsu():
                refresh = self.handle_nsu(message, now_s)
                replies = [] if refresh is None else [(message.node_id, refresh)]
            case _:
                logger.debug("controller ignores %s from %d", type(message).__name__, sender)
                replies = []
        self.log.append(
            DecisionRecord(
                asn=asn,
                node=sender,
                inbound=message.model_dump(mode="json"),
                outbound=[{"to": dst, "message": m.model_dump(mode="json")} for dst, m in replies],
            )
        )
        return replies

    def handle_cjoin(self, cjoin: Cjoin, now_s: float) -> list[Cack | Conf]:
        self.cjoins += 1
        view = self.view.node(cjoin.node_id)
        if not view.joined:
            view.joined = True
            view.joined_at = now_s
            logger.debug("controller admitted node %d", cjoin.node_id)
        return [
            Cack(node_id=cjoin.node_id),
            Conf(nsu_period=self.policy.nsu_period, flow_lifetime=self.policy.flow_lifetime),
        ]

    def handle_ftq(self, ftq: Ftq, now_s: float) -> Fts:
        self.ftqs += 1
        self.view.prune(now_s)
        node = ftq.node_id
        destination = flow_key(ftq.header)
        if destination is None:
            logger.debug("controller: FTQ from %d too short to carry a flow key", node)
            return Fts()
        action = self._route_action(node, destination)
        entry_id = self._allocate_entry_id()
        spec = FlowEntrySpec(
            entry_id=entry_id,
            lifetime=self.policy.flow_lifetime,
            matches=[
                MatchSpec(
                    offset=FLOW_KEY_OFFSET,
                    value=destination.to_bytes(FLOW_KEY_LENGTH, "big"),
                    mask=b"\xff" * FLOW_KEY_LENGTH,
                )
            ],
            action=ActionSpec.from_action(action),
        )
        for key in [k for k, e in self.view.pushed.items() if k[0] == node and e.flow_key == destination]:
            del self.view.pushed[key]
        self.view.pushed[(node, entry_id)] = PushedEntry(
            node, entry_id, destination, now_s, float(self.policy.flow_lifetime), now_s
        )
        logger.debug("controller: FTQ from %d for %d -> %s", node, destination, action)
        return Fts(entries=[spec])

    def _route_action(self, node: NodeId, destination: NodeId) -> FlowAction:
        if destination not in self.dag.rank or node not in self.dag.rank:
            return Drop()
        if node != self.dag.root and destination in self.dag.ancestors(node):
            return Forward(self.dag.parent[node])
        route = route_between(self.dag, node, destination)
        if not route:
            return Drop()
        return SrhPush(route)

    def _allocate_entry_id(self) -> int:
        entry_id = self._next_entry_id
        self._next_entry_id = self._next_entry_id % 0xFFFF + 1
        return entry_id

    def handle_nsu(self, nsu: Nsu, now_s: float) -> Fts | None:
        if not self.view.is_joined(nsu.node_id):
            self.ignored_nsus += 1
            logger.debug("controller: NSU from unjoined node %d ignored", nsu.node_id)
            return None
        self.nsus += 1
        self.view.prune(now_s)
        view = self.view.node(nsu.node_id)
        view.last_nsu_at = now_s
        view.energy = nsu.energy
        view.queue = nsu.queue
        view.neighbors = {n.node_id: n.link_estimate for n in nsu.neighbors}
        view.nsu_count += 1
        if not self.policy.afr_enabled:
            return None
        refresh = []
        for stat in nsu.entry_stats:
            pushed = self.view.pushed.get((nsu.node_id, stat.entry_id))
            if pushed is None or stat.hits < self.policy.afr_hit_threshold:
                continue
            remaining = pushed.expires_at() - now_s
            if 0 <= remaining < self.policy.nsu_period:
                pushed.refreshed_at = now_s
                refresh.append(stat.entry_id)
        if not refresh:
            return None
        self.afr_refreshes += len(refresh)
        logger.debug("controller: AFR refresh %s at node %d", refresh, nsu.node_id)
        return Fts(refresh_ids=refresh)

    def stale_nodes(self, now_s: float) -> dict[NodeId, float]:
        return self.view.stale_nodes(now_s, 3 * self.policy.nsu_period)

    def log_lines(self) -> list[str]:
        return [record.to_json() for record in self.log]
