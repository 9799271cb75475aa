"""Decentralized coordination: clients solve level by level in Gauss-Seidel order."""

import logging
from collections import defaultdict
from collections.abc import Mapping
from dataclasses import replace

import numpy as np
import numpy.typing as npt
import scipy.linalg

from engine.base import ConsensusEngine, MapFn
from engine.config import EngineConfig
from engine.state import EngineState
from models.core import ParamBlock, as_block, check_finite, inf_norm
from models.errors import CapabilityError, DaldError, ParameterError, SweepError
from models.objectives import LocalObjective
from solvers.local import SolverSpec, solve_local_dc
from topology.coordination import CoordinationSequence, drop_client
from topology.graph import GraphMode
from topology.hierarchy import chain_matrix, levels_from_matrix

logger = logging.getLogger(__name__)


def _adjacency(edges) -> dict[int, list[int]]:
    neighbors = defaultdict(list)
    for i, j in edges:
        neighbors[i].append(j)
        neighbors[j].append(i)
    return neighbors


def dc_inner_sweep(
    state: EngineState,
    cfg: EngineConfig,
    objectives: Mapping[int, LocalObjective | None],
    seq: CoordinationSequence,
    solver: SolverSpec,
    *,
    map_fn: MapFn = map,
    root_level: frozenset[int] | None = None,
) -> EngineState:
    """Run one Gauss-Seidel pass over seq.

    root_level names the first level of the full hierarchy. Its clients carry no dual
    residual block, even when a partial sequence skips them. Defaults to seq.first_level.
    """
    if state.x_hat is not None:
        raise ParameterError("a decentralized sweep has no server block")
    if cfg.mu_policy in ("gradient", "newton"):
        raise CapabilityError(f"mu_policy {cfg.mu_policy!r} is not available in decentralized mode")
    unknown = set(seq.clients) - set(state.x)
    if unknown:
        raise ParameterError(f"sequence schedules unknown clients {sorted(unknown)}")

    k, v = state.k, state.v + 1
    neighbors = _adjacency(state.mu)
    current = dict(state.x)

    for level_no, level in enumerate(seq.levels, start=1):
        # every client of a level reads the same snapshot
        snapshot = dict(current)

        def solve(s: int, snapshot=snapshot, level_no=level_no) -> ParamBlock:
            around = neighbors.get(s, [])
            edges = [(min(s, o), max(s, o)) for o in around]
            try:
                return solve_local_dc(
                    objectives.get(s),
                    {j: snapshot[j] for j in around if j > s},
                    {e: snapshot[e] for e in around if e < s},
                    {edge: state.mu[edge] for edge in edges},
                    {edge: state.rho[edge] for edge in edges},
                    snapshot[s],
                    solver,
                    client=s,
                )
            except (DaldError, ArithmeticError, scipy.linalg.LinAlgError) as exc:
                raise SweepError(f"local solve failed: {exc}", client=s, level=level_no) from exc

        for s, block in zip(level, map_fn(solve, level), strict=True):
            check_finite(block, k=k, v=v, client=s)
            current[s] = block

    first = seq.first_level if root_level is None else root_level
    return replace(
        state,
        x=current,
        v=v,
        total_inner=state.total_inner + 1,
        residuals=None,
        dual_blocks=tuple(as_block(current[c] - state.x[c], copy=False) for c in state.clients if c not in first),
        changes={c: inf_norm(current[c] - state.x[c]) for c in set(seq.clients)},
    )


def dc_outer_update(state: EngineState, cfg: EngineConfig) -> EngineState:
    """μ_ij ← μ_ij + 2ρ_ij∘ρ_ij∘(x_i − x_j) on every edge, then advance k."""
    if state.x_hat is not None:
        raise ParameterError("a decentralized outer update has no server block")
    mu = dict(state.mu)
    if cfg.mu_policy == "multiplier":
        for (i, j), value in state.mu.items():
            rho = state.rho[(i, j)]
            mu[(i, j)] = as_block(value + 2.0 * rho * rho * (state.x[i] - state.x[j]), copy=False)
    return replace(
        state,
        mu=mu,
        rho=cfg.scale_penalties(state.rho),
        k=state.k + 1,
        v=0,
        residuals=None,
        dual_blocks=(),
    )


class DecentralizedEngine(ConsensusEngine):
    mode = GraphMode.DECENTRALIZED

    def default_sequence(self) -> CoordinationSequence:
        # Gauss-Seidel in id order unless a hierarchy is supplied through the scheduler
        clients = list(self.graph.clients)
        return levels_from_matrix(chain_matrix(len(clients)), clients)

    def initial_state(self, x0: npt.ArrayLike | None = None) -> EngineState:
        start = self._start_block(x0)
        return EngineState(
            x={c: start for c in self.graph.clients},
            mu={edge: as_block(np.zeros(self.dim)) for edge in self.graph.edges},
            rho={edge: self._fresh_rho() for edge in self.graph.edges},
        )

    def inner_sweep(self, state, sequence, *, map_fn=map):
        return dc_inner_sweep(
            state,
            self.config,
            self.objectives,
            sequence,
            self.solver,
            map_fn=map_fn,
            root_level=self.scheduler.full_cycle().first_level,
        )

    def outer_update(self, state):
        return dc_outer_update(state, self.config)

    def drop(self, state, client):
        _, self.graph, created = drop_client(self.scheduler.full_cycle(), self.graph, client)
        self.scheduler.drop(client)
        self._forget_client(client)
        mu = {edge: value for edge, value in state.mu.items() if client not in edge}
        rho = {edge: value for edge, value in state.rho.items() if client not in edge}
        for edge in created:
            mu[edge] = as_block(np.zeros(self.dim))
            rho[edge] = self._fresh_rho()
        logger.info(f"Client {client} left the network at sweep {state.total_inner + 1}; new edges {list(created)}")
        return replace(
            state,
            x={c: state.x[c] for c in state.clients if c != client},
            mu=mu,
            rho=rho,
            changes={c: d for c, d in state.changes.items() if c != client},
        )
