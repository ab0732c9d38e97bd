from __future__ import annotations

import enum
from dataclasses import dataclass, field

from app.models.topology import NodeId


class JoinState(str, enum.Enum):
    DISCOVERING = "Discovering"
    JOINING = "Joining"
    JOINED = "Joined"
    TRACK_READY = "TrackReady"
    UNJOINED = "Unjoined"


@dataclass
class NodeView:
    node_id: NodeId
    joined: bool = False
    joined_at: float | None = None
    last_nsu_at: float | None = None
    energy: int | None = None
    queue: int | None = None
    neighbors: dict[NodeId, int] = field(default_factory=dict)
    nsu_count: int = 0


@dataclass
class PushedEntry:
    node: NodeId
    entry_id: int
    flow_key: int | None
    pushed_at: float
    lifetime: float
    refreshed_at: float

    def expires_at(self) -> float:
        return self.refreshed_at + self.lifetime


@dataclass
class NetworkView:
    """What the controller knows, built only from messages it received."""

    nodes: dict[NodeId, NodeView] = field(default_factory=dict)
    pushed: dict[tuple[NodeId, int], PushedEntry] = field(default_factory=dict)

    def node(self, node_id: NodeId) -> NodeView:
        return self.nodes.setdefault(node_id, NodeView(node_id))

    def is_joined(self, node_id: NodeId) -> bool:
        view = self.nodes.get(node_id)
        return view is not None and view.joined

    def staleness(self, node_id: NodeId, now: float) -> float | None:
        view = self.nodes.get(node_id)
        if view is None or not view.joined:
            return None
        reference = view.last_nsu_at if view.last_nsu_at is not None else view.joined_at
        return now - reference

    def stale_nodes(self, now: float, threshold: float) -> dict[NodeId, float]:
        result = {}
        for node_id in sorted(self.nodes):
            age = self.staleness(node_id, now)
            if age is not None and age > threshold:
                result[node_id] = age
        return result

    def prune(self, now: float) -> None:
        for key in [k for k, e in self.pushed.items() if now > e.expires_at()]:
            del self.pushed[key]
