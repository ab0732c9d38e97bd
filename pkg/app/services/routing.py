"""
Oracle stand-in for RPL: a shortest-hop DAG built once per run, upward
default routes and root-to-node source routes for downward traffic.
"""
from collections import deque

from app.models.routing import Dag, DownwardRoute, RoutingTable, SourceRoute
from app.models.topology import NodeId, Topology


class RoutingError(LookupError):
    pass


def build_dag(topology: Topology, root: NodeId = 0, route_lifetime: float = 600.0) -> Dag:
    """BFS from root; each node's parent is its lowest-id neighbour of minimal rank."""
    if root not in topology.positions:
        raise RoutingError(f"unknown root {root}")
    rank = {root: 0}
    frontier = deque([root])
    while frontier:
        node = frontier.popleft()
        for nbr in topology.neighbors(node):
            if nbr not in rank:
                rank[nbr] = rank[node] + 1
                frontier.append(nbr)
    if len(rank) != len(topology.positions):
        missing = sorted(set(topology.positions) - set(rank))
        raise RoutingError(f"topology is disconnected, unreachable nodes: {missing}")
    parent = {}
    for node in sorted(rank):
        if node == root:
            continue
        parent[node] = min(n for n in topology.neighbors(node) if rank[n] == rank[node] - 1)
    return Dag(root=root, parent=parent, rank=rank, route_lifetime=route_lifetime)


def next_hop_default(dag: Dag, node: NodeId) -> NodeId:
    if node == dag.root:
        raise RoutingError("the root has no default route")
    try:
        return dag.parent[node]
    except KeyError:
        raise RoutingError(f"unknown node {node}") from None


def compute_source_route(dag: Dag, destination: NodeId) -> SourceRoute:
    """Root-to-destination hop list, root excluded; empty for the root itself."""
    if destination not in dag.rank:
        raise RoutingError(f"unknown destination {destination}")
    route = []
    node = destination
    while node != dag.root:
        route.append(node)
        node = dag.parent[node]
    route.reverse()
    return tuple(route)


def build_routing_table(dag: Dag, node: NodeId) -> RoutingTable:
    default = None if node == dag.root else dag.parent[node]
    return RoutingTable(node=node, default_next_hop=default, route_lifetime=dag.route_lifetime)


def install_downward_route(table: RoutingTable, destination: NodeId, next_hop: NodeId, now_s: float) -> None:
    table.downward[destination] = DownwardRoute(next_hop=next_hop, installed_at=now_s)


def lookup_route(table: RoutingTable, destination: NodeId, now_s: float) -> NodeId:
    """Downward storing entries expire after route_lifetime; the default route never does."""
    entry = table.downward.get(destination)
    if entry is not None:
        if now_s - entry.installed_at > table.route_lifetime:
            del table.downward[destination]
            raise RoutingError(f"route to {destination} at node {table.node} expired")
        return entry.next_hop
    if table.default_next_hop is None:
        raise RoutingError(f"no route to {destination} at node {table.node}")
    return table.default_next_hop


def route_between(dag: Dag, source: NodeId, destination: NodeId) -> SourceRoute:
    """Hop list from source to destination (source excluded) via their lowest common ancestor."""
    if source not in dag.rank:
        raise RoutingError(f"unknown node {source}")
    up = [source, *dag.ancestors(source)]
    down = [*compute_source_route(dag, destination)]
    down.insert(0, dag.root)
    common = max(i for i, n in enumerate(down) if n in up)
    pivot = down[common]
    upward = up[1 : up.index(pivot) + 1]
    return tuple(upward + down[common + 1 :])
