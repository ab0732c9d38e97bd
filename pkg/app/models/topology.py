from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

NodeId = int

CONTROLLER_ID: NodeId = 0


@dataclass(frozen=True)
class Topology:
    """Node placement plus the unit-disk radio parameters."""

    positions: dict[NodeId, tuple[float, float]]
    tx_range: float
    link_quality: float
    _neighbors: dict[NodeId, tuple[NodeId, ...]] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        neighbors = {
            a: tuple(b for b in sorted(self.positions) if b != a and self.distance(a, b) <= self.tx_range)
            for a in sorted(self.positions)
        }
        object.__setattr__(self, "_neighbors", neighbors)

    @property
    def node_ids(self) -> list[NodeId]:
        return sorted(self.positions)

    def distance(self, a: NodeId, b: NodeId) -> float:
        (xa, ya), (xb, yb) = self.positions[a], self.positions[b]
        return math.hypot(xa - xb, ya - yb)

    def in_range(self, a: NodeId, b: NodeId) -> bool:
        return b in self._neighbors[a]

    def neighbors(self, node: NodeId) -> tuple[NodeId, ...]:
        return self._neighbors[node]

    def links(self) -> list[tuple[NodeId, NodeId]]:
        return [(a, b) for a in self.node_ids for b in self._neighbors[a] if a < b]

    def is_connected(self) -> bool:
        if not self.positions:
            return False
        start = self.node_ids[0]
        seen = {start}
        frontier = deque([start])
        while frontier:
            for nbr in self._neighbors[frontier.popleft()]:
                if nbr not in seen:
                    seen.add(nbr)
                    frontier.append(nbr)
        return len(seen) == len(self.positions)
