"""Centralized coordination: clients solve in parallel, the server closes the sweep."""

import logging
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
from models.objectives import LocalObjective, grad_smooth, hessian_smooth
from solvers.consensus import server_consensus
from solvers.local import SolverSpec, solve_local_cc
from topology.coordination import CoordinationSequence, drop_client, single_level
from topology.graph import GraphMode

logger = logging.getLogger(__name__)


def linearized_multiplier(obj: LocalObjective | None, x_hat: ParamBlock, rho: ParamBlock, policy: str) -> ParamBlock:
    """Multiplier that turns the consensus step into a gradient or Newton step.

    With x_i = x̂ the server update is x̂ − μ ⊘ (2ρ∘ρ), so μ = ∇f gives a
    gradient step of size 1/(2ρ²) and μ = 2ρ²∘H⁻¹∇f gives a Newton step.
    """
    if obj is None:
        return as_block(np.zeros_like(x_hat))
    if obj.l1_weight > 0:
        raise CapabilityError(f"mu_policy {policy!r} needs a smooth objective, l1 weight is {obj.l1_weight}")
    grad = grad_smooth(obj, x_hat)
    if policy == "gradient":
        return grad
    direction = scipy.linalg.solve(hessian_smooth(obj, x_hat), grad, assume_a="sym")
    return as_block(2.0 * rho * rho * direction, copy=False)


def _consensus_weights(weights: Mapping[int, float] | None, pool: list[int]) -> np.ndarray | None:
    if weights is None:
        return None
    raw = np.array([weights[c] for c in pool], dtype=np.float64)
    return raw / raw.sum()


def cc_inner_sweep(
    state: EngineState,
    cfg: EngineConfig,
    objectives: Mapping[int, LocalObjective | None],
    solver: SolverSpec,
    *,
    sequence: CoordinationSequence | None = None,
    weights: Mapping[int, float] | None = None,
    map_fn: MapFn = map,
) -> EngineState:
    if state.x_hat is None:
        raise ParameterError("a centralized sweep needs a server block")
    clients = state.clients
    scheduled = list(dict.fromkeys(sequence.clients)) if sequence is not None else clients
    unknown = set(scheduled) - set(clients)
    if unknown:
        raise ParameterError(f"sequence schedules unknown clients {sorted(unknown)}")

    k, v = state.k, state.v + 1
    x_hat_prev = state.x_hat
    x = dict(state.x)
    mu = dict(state.mu)

    if cfg.mu_policy in ("gradient", "newton"):
        for c in scheduled:
            x[c] = x_hat_prev
            try:
                mu[c] = linearized_multiplier(objectives.get(c), x_hat_prev, state.rho[c], cfg.mu_policy)
            except (DaldError, ArithmeticError, scipy.linalg.LinAlgError) as exc:
                raise SweepError(f"linearization failed: {exc}", client=c) from exc
        pool = scheduled
    else:

        def solve(c: int) -> ParamBlock:
            x_init = x_hat_prev if solver.init_from == "consensus" else state.x[c]
            try:
                return solve_local_cc(objectives.get(c), x_hat_prev, state.mu[c], state.rho[c], x_init, solver)
            except (DaldError, ArithmeticError, scipy.linalg.LinAlgError) as exc:
                raise SweepError(f"local solve failed: {exc}", client=c) from exc

        for c, block in zip(scheduled, map_fn(solve, scheduled), strict=True):
            check_finite(block, k=k, v=v, client=c)
            x[c] = block
        pool = clients

    x_hat = server_consensus(
        [x[c] for c in pool],
        [mu[c] for c in pool],
        [state.rho[c] for c in pool],
        _consensus_weights(weights, pool),
    )
    check_finite(x_hat, k=k, v=v)
    return replace(
        state,
        x=x,
        mu=mu,
        x_hat=x_hat,
        v=v,
        total_inner=state.total_inner + 1,
        residuals=None,
        dual_blocks=(as_block(x_hat - x_hat_prev, copy=False),),
        changes={c: inf_norm(x[c] - state.x[c]) for c in scheduled},
    )


def cc_outer_update(state: EngineState, cfg: EngineConfig) -> EngineState:
    """μ_i ← μ_i + 2ρ_i∘ρ_i∘(x̂ − x_i), then advance k and apply the ρ schedule."""
    if state.x_hat is None:
        raise ParameterError("a centralized outer update needs a server block")
    mu = dict(state.mu)
    if cfg.mu_policy == "multiplier":
        for c in state.clients:
            rho = state.rho[c]
            mu[c] = as_block(state.mu[c] + 2.0 * rho * rho * (state.x_hat - state.x[c]), copy=False)
    return replace(
        state,
        mu=mu,
        rho=cfg.scale_penalties(state.rho),
        k=state.k + 1,
        v=0,
        residuals=None,
        dual_blocks=(),
    )


class CentralizedEngine(ConsensusEngine):
    mode = GraphMode.CENTRALIZED
    supports_linearized_policies = True

    def default_sequence(self) -> CoordinationSequence:
        return single_level(self.graph.clients)

    def initial_state(self, x0: npt.ArrayLike | None = None) -> EngineState:
        start = self._start_block(x0)
        clients = self.graph.clients
        return EngineState(
            x={c: start for c in clients},
            mu={c: as_block(np.zeros(self.dim)) for c in clients},
            rho={c: self._fresh_rho() for c in clients},
            x_hat=start,
        )

    def inner_sweep(self, state, sequence, *, map_fn=map):
        return cc_inner_sweep(
            state, self.config, self.objectives, self.solver, sequence=sequence, weights=self.weights, map_fn=map_fn
        )

    def outer_update(self, state):
        return cc_outer_update(state, self.config)

    def drop(self, state, client):
        _, self.graph, _ = drop_client(self.scheduler.full_cycle(), self.graph, client)
        self.scheduler.drop(client)
        self._forget_client(client)
        keep = [c for c in state.clients if c != client]
        logger.info(f"Client {client} left the federation at sweep {state.total_inner + 1}")
        return replace(
            state,
            x={c: state.x[c] for c in keep},
            mu={c: state.mu[c] for c in keep},
            rho={c: state.rho[c] for c in keep},
            changes={c: d for c, d in state.changes.items() if c != client},
        )
