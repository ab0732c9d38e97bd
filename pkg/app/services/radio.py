"""Unit-disk radio with a flat per-attempt success probability."""
from app.models.topology import NodeId, Topology
from app.services.engine import RngStream


class TopologyError(ValueError):
    pass


class UnknownNodeError(LookupError):
    pass


def build_topology(
    positions: dict[NodeId, tuple[float, float]],
    tx_range: float = 100.0,
    link_quality: float = 0.9,
) -> Topology:
    if tx_range <= 0:
        raise TopologyError(f"tx_range must be positive, got {tx_range}")
    if not 0.0 <= link_quality <= 1.0:
        raise TopologyError(f"link_quality must be within [0, 1], got {link_quality}")
    topology = Topology(dict(positions), tx_range, link_quality)
    if not topology.is_connected():
        raise TopologyError("topology is not connected at the configured tx_range")
    return topology


def build_linear_topology(
    hop_count: int,
    spacing: float,
    tx_range: float = 100.0,
    link_quality: float = 0.9,
) -> Topology:
    """hop_count+1 nodes on the x axis, node 0 (the controller) at the origin."""
    if hop_count < 1:
        raise TopologyError(f"hop_count must be >= 1, got {hop_count}")
    if spacing <= 0:
        raise TopologyError(f"spacing must be positive, got {spacing}")
    if spacing > tx_range:
        raise TopologyError(f"spacing {spacing} m exceeds tx_range {tx_range} m: chain is disconnected")
    positions = {i: (i * spacing, 0.0) for i in range(hop_count + 1)}
    return build_topology(positions, tx_range, link_quality)


def attempt_delivery(topology: Topology, src: NodeId, dst: NodeId, rng: RngStream) -> bool:
    if src not in topology.positions:
        raise UnknownNodeError(f"unknown node {src}")
    if dst not in topology.positions:
        raise UnknownNodeError(f"unknown node {dst}")
    if src == dst:
        raise ValueError("src and dst must differ")
    if not topology.in_range(src, dst):
        return False
    return rng.draw() < topology.link_quality
