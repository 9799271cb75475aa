"""Hierarchical coordination matrices.

``H[i][j] = 1`` (i != j) means node i is a direct descendant of node j and
reports to it; ``H[i][i]`` is the number of parents node i reports to. Leaves
are solved first, the root last.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np
import numpy.typing as npt

from models.errors import DataFormatError, ParameterError, TopologyError
from topology.coordination import CoordinationMode, CoordinationSequence
from topology.graph import ConsensusGraph, GraphMode

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class HierarchicalMatrix:
    values: npt.NDArray[np.int64]

    def __post_init__(self):
        values = np.array(self.values, dtype=np.int64, ndmin=2)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ParameterError(f"hierarchical matrix must be square, got shape {values.shape}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def parents(self, node: int) -> list[int]:
        return [j for j in range(self.n) if j != node and self.values[node, j] == 1]

    def to_digraph(self) -> nx.DiGraph:
        """Edges point from a descendant to the node it reports to."""
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from((i, j) for i in range(self.n) for j in self.parents(i))
        return graph


@dataclass(frozen=True)
class MatrixViolation:
    row: int
    column: int
    message: str


@dataclass(frozen=True)
class MatrixValidation:
    violations: tuple[MatrixViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_matrix(matrix: HierarchicalMatrix) -> MatrixValidation:
    values = matrix.values
    violations = []
    for i in range(matrix.n):
        for j in range(matrix.n):
            if i != j and values[i, j] not in (0, 1):
                violations.append(MatrixViolation(i, j, f"off-diagonal entry must be 0 or 1, got {values[i, j]}"))
        out_degree = int(sum(values[i, j] == 1 for j in range(matrix.n) if j != i))
        if values[i, i] != out_degree:
            violations.append(
                MatrixViolation(
                    i, i, f"diagonal ≠ out-degree: diagonal is {values[i, i]}, node reports to {out_degree}"
                )
            )
    if not nx.is_directed_acyclic_graph(matrix.to_digraph()):
        cycle = nx.find_cycle(matrix.to_digraph())
        violations.append(MatrixViolation(cycle[0][0], cycle[0][1], f"descendant relation is cyclic: {cycle}"))
    return MatrixValidation(tuple(violations))


def levels_from_matrix(matrix: HierarchicalMatrix, clients: list[int] | None = None) -> CoordinationSequence:
    """Partition nodes into solve levels, leaves first and the root last.

    clients maps matrix rows to client ids; rows map to ids 0..n-1 by default.
    """
    ids = list(range(matrix.n)) if clients is None else list(clients)
    if len(ids) != matrix.n:
        raise ParameterError(f"{len(ids)} client ids for a {matrix.n}x{matrix.n} matrix")
    graph = matrix.to_digraph()
    try:
        generations = [sorted(level) for level in nx.topological_generations(graph)]
    except nx.NetworkXUnfeasible as exc:
        raise TopologyError("hierarchical matrix has a cyclic descendant relation") from exc
    levels = tuple(tuple(ids[node] for node in level) for level in generations)
    return CoordinationSequence(levels, CoordinationMode.FULL_CYCLE)


def matrix_from_parents(n: int, parents: dict[int, list[int]]) -> HierarchicalMatrix:
    values = np.zeros((n, n), dtype=np.int64)
    for child, ups in parents.items():
        for parent in ups:
            values[child, parent] = 1
        values[child, child] = len(ups)
    return HierarchicalMatrix(values)


def chain_matrix(n: int) -> HierarchicalMatrix:
    """Node i reports to node i+1; the last node is the root."""
    if n < 1:
        raise ParameterError(f"node count must be >= 1, got {n}")
    return matrix_from_parents(n, {i: [i + 1] for i in range(n - 1)})


def star_matrix(n: int) -> HierarchicalMatrix:
    """Leaves 0..n-1 all report to the root at index n."""
    if n < 1:
        raise ParameterError(f"leaf count must be >= 1, got {n}")
    return matrix_from_parents(n + 1, {i: [n] for i in range(n)})


def graph_from_matrix(matrix: HierarchicalMatrix) -> ConsensusGraph:
    """Consensus graph whose edges are the undirected descendant links."""
    edges = {(min(i, j), max(i, j)) for i, j in matrix.to_digraph().edges}
    return ConsensusGraph(GraphMode.DECENTRALIZED, tuple(range(matrix.n)), tuple(edges))


def load_matrix(path: str | Path) -> HierarchicalMatrix:
    """Read whitespace-separated integers, one matrix row per line."""
    path = Path(path)
    rows = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append([int(token) for token in line.split()])
        except ValueError as exc:
            raise DataFormatError(f"non-integer entry in matrix file {path}", row=line_no) from exc
    if not rows:
        raise DataFormatError(f"matrix file {path} is empty")
    if any(len(row) != len(rows) for row in rows):
        raise DataFormatError(f"matrix file {path} is not square")
    matrix = HierarchicalMatrix(rows)
    logger.info(f"Loaded {matrix.n}x{matrix.n} hierarchical matrix from {path}")
    return matrix
