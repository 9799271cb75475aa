"""Consensus-constraint graphs.

Decentralized edges are stored once as ``(i, j)`` with ``i < j``; the
constraint they carry is ``x_i - x_j = 0``. Centralized graphs have no
explicit edges: every client is tied to the server block.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass
from utils.compat import StrEnum

import networkx as nx

from models.errors import ParameterError, TopologyError

logger = logging.getLogger(__name__)

Edge = tuple[int, int]


class GraphMode(StrEnum):
    CENTRALIZED = "centralized"
    DECENTRALIZED = "decentralized"


@dataclass(frozen=True)
class ConsensusGraph:
    mode: GraphMode
    clients: tuple[int, ...]
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        mode = GraphMode(self.mode)
        clients = tuple(sorted(int(c) for c in self.clients))
        if not clients:
            raise TopologyError("a consensus graph needs at least one client")
        if len(set(clients)) != len(clients):
            raise TopologyError(f"duplicate client ids: {clients}")
        edges = tuple(sorted(_normalize_edge(e) for e in self.edges))
        if mode is GraphMode.CENTRALIZED and edges:
            raise TopologyError("centralized graphs have implicit star edges only")
        if len(set(edges)) != len(edges):
            raise TopologyError("each client pair may be stored only once")
        known = set(clients)
        for i, j in edges:
            if i not in known or j not in known:
                raise TopologyError(f"edge ({i}, {j}) references an unknown client")
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "clients", clients)
        object.__setattr__(self, "edges", edges)
        if mode is GraphMode.DECENTRALIZED and not nx.is_connected(self.to_networkx()):
            raise TopologyError(f"consensus graph over clients {list(clients)} is not connected")

    @property
    def n(self) -> int:
        return len(self.clients)

    @property
    def is_centralized(self) -> bool:
        return self.mode is GraphMode.CENTRALIZED

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.clients)
        graph.add_edges_from(self.edges)
        return graph

    def upper_neighbors(self, client: int) -> list[int]:
        """Neighbors j with (client, j) an edge, i.e. j > client."""
        return [j for i, j in self.edges if i == client]

    def lower_neighbors(self, client: int) -> list[int]:
        """Neighbors e with (e, client) an edge, i.e. e < client."""
        return [i for i, j in self.edges if j == client]


def _normalize_edge(edge: Iterable[int]) -> Edge:
    i, j = (int(v) for v in edge)
    if i == j:
        raise TopologyError(f"self-loop on client {i}")
    return (i, j) if i < j else (j, i)


def centralized_graph(n: int) -> ConsensusGraph:
    if n < 1:
        raise ParameterError(f"client count must be >= 1, got {n}")
    return ConsensusGraph(GraphMode.CENTRALIZED, tuple(range(n)))


def isolated_node() -> ConsensusGraph:
    return ConsensusGraph(GraphMode.DECENTRALIZED, (0,))


def chain_graph(n: int) -> ConsensusGraph:
    if n < 2:
        raise ParameterError(f"a chain needs at least 2 clients, got {n}")
    return ConsensusGraph(GraphMode.DECENTRALIZED, tuple(range(n)), tuple((i, i + 1) for i in range(n - 1)))


def star_graph(n: int) -> ConsensusGraph:
    """Decentralized star over clients 0..n-1 with a coordinator hub at id n."""
    if n < 1:
        raise ParameterError(f"client count must be >= 1, got {n}")
    return ConsensusGraph(GraphMode.DECENTRALIZED, tuple(range(n + 1)), tuple((i, n) for i in range(n)))


def graph_from_edges(clients: Iterable[int], edges: Iterable[Iterable[int]]) -> ConsensusGraph:
    return ConsensusGraph(GraphMode.DECENTRALIZED, tuple(clients), tuple(_normalize_edge(e) for e in edges))


def restitch_without(graph: ConsensusGraph, client: int) -> tuple[ConsensusGraph, tuple[Edge, ...]]:
    """Remove a client and reconnect its neighbors in id order.

    Returns the new graph and the edges created by the re-stitch.
    """
    if client not in graph.clients:
        raise TopologyError(f"client {client} is not part of the graph")
    remaining = tuple(c for c in graph.clients if c != client)
    if not remaining:
        raise TopologyError("cannot drop the last client")
    if graph.is_centralized:
        return ConsensusGraph(GraphMode.CENTRALIZED, remaining), ()

    neighbors = sorted(graph.lower_neighbors(client) + graph.upper_neighbors(client))
    kept = {e for e in graph.edges if client not in e}
    created = []
    for a, b in zip(neighbors, neighbors[1:], strict=False):
        if (a, b) not in kept:
            kept.add((a, b))
            created.append((a, b))

    try:
        new_graph = ConsensusGraph(GraphMode.DECENTRALIZED, remaining, tuple(kept))
    except TopologyError as exc:
        raise TopologyError(f"dropping client {client} disconnects the consensus graph") from exc
    if created:
        logger.info(f"Re-stitched edges {created} after dropping client {client}")
    return new_graph, tuple(created)
