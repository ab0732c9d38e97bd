from __future__ import annotations

import math
from dataclasses import dataclass, field

from app.models.topology import NodeId

SourceRoute = tuple[NodeId, ...]

INFINITE_LIFETIME = math.inf


@dataclass(frozen=True)
class Dag:
    """Shortest-hop DAG rooted at the controller."""

    root: NodeId
    parent: dict[NodeId, NodeId]
    rank: dict[NodeId, int]
    route_lifetime: float = 600.0
    default_route_lifetime: float = INFINITE_LIFETIME

    def children(self, node: NodeId) -> list[NodeId]:
        return sorted(n for n, p in self.parent.items() if p == node)

    def ancestors(self, node: NodeId) -> list[NodeId]:
        chain = []
        while node != self.root:
            node = self.parent[node]
            chain.append(node)
        return chain

    @property
    def nodes(self) -> list[NodeId]:
        return sorted(self.rank)


@dataclass
class DownwardRoute:
    next_hop: NodeId
    installed_at: float


@dataclass
class RoutingTable:
    """Per-node route state: an upward default route that never expires and
    storing-mode downward entries bounded by the DAG route lifetime."""

    node: NodeId
    default_next_hop: NodeId | None
    route_lifetime: float
    downward: dict[NodeId, DownwardRoute] = field(default_factory=dict)
