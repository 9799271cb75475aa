"""Shared outer/inner loop of the consensus engines.

Each inner sweep returns a new EngineState. Residuals and the stopping rule are applied
here, so subclasses only decide how a sweep solves the clients and how μ is updated.
"""

import logging
import time
from abc import ABC, abstractmethod
from collections.abc import Callable, Iterator, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace

import numpy as np
import numpy.typing as npt

from engine.config import EngineConfig
from engine.residuals import compute_residuals, surrogate_value
from engine.state import EngineState, TraceRecord
from engine.stopping import Decision, RunStatus, StopVerdict, stopping_check
from models.core import ParamBlock, as_block
from models.errors import CapabilityError, DimensionError, TopologyError
from models.objectives import LocalObjective
from solvers.local import SolverSpec
from topology.coordination import CoordinationScheduler, CoordinationSequence, FullCycleScheduler
from topology.graph import ConsensusGraph, GraphMode
from utils.logger import TRACE_LOGGER_NAME

logger = logging.getLogger(__name__)
trace_logger = logging.getLogger(TRACE_LOGGER_NAME)

SweepCallback = Callable[[EngineState, TraceRecord], None]
MapFn = Callable[..., Iterator]


@dataclass(frozen=True, eq=False)
class EngineResult:
    """Final state of a run, its status and the per-sweep trace."""

    state: EngineState
    status: RunStatus
    trace: list[TraceRecord] = field(default_factory=list)
    elapsed_ns: int = 0

    @property
    def model(self) -> ParamBlock:
        return self.state.model()

    @property
    def outer_loops(self) -> int:
        return self.state.k

    @property
    def total_inner(self) -> int:
        return self.state.total_inner


class ConsensusEngine(ABC):
    """Outer/inner loop driver shared by the centralized and decentralized engines.

    Subclasses provide the sweep, the multiplier update and dropout handling;
    the loop, the stopping rule, tracing and the final full-cycle sweep live here.
    """

    mode: GraphMode
    supports_linearized_policies: bool = False

    def __init__(
        self,
        objectives: Mapping[int, LocalObjective | None],
        graph: ConsensusGraph,
        config: EngineConfig,
        solver: SolverSpec,
        *,
        scheduler: CoordinationScheduler | None = None,
        weights: Mapping[int, float] | None = None,
        dim: int | None = None,
        max_workers: int = 1,
    ):
        """Bind the run inputs and validate that they fit together.

        Args:
            objectives: Local objective per client id; None marks a pure coordinator node
            graph: Consensus graph whose mode must match the engine
            config: Engine tolerances and policies
            solver: How each client solves its local subproblem
            scheduler: Per-sweep coordination; defaults to a full cycle over default_sequence()
            weights: Optional server averaging weights, centralized mode only
            dim: Parameter dimension when no client carries an objective
            max_workers: Thread pool size for the client solves of one level

        Raises:
            TopologyError: The graph mode differs or objectives name unknown clients
            DimensionError: Objectives disagree on the parameter dimension
            CapabilityError: A linearized mu_policy was requested in a mode that lacks it
        """
        if graph.mode is not self.mode:
            raise TopologyError(f"{type(self).__name__} needs a {self.mode} graph, got {graph.mode}")
        unknown = set(objectives) - set(graph.clients)
        if unknown:
            raise TopologyError(f"objectives given for clients outside the graph: {sorted(unknown)}")
        dims = {obj.dim for obj in objectives.values() if obj is not None}
        if dim is not None:
            dims.add(dim)
        if len(dims) != 1:
            raise DimensionError(f"cannot infer a single parameter dimension from {sorted(dims)}")
        if config.mu_policy in ("gradient", "newton") and not self.supports_linearized_policies:
            raise CapabilityError(f"mu_policy {config.mu_policy!r} is not available in {self.mode} mode")

        self.objectives = dict(objectives)
        self.graph = graph
        self.config = config
        self.solver = solver
        self.weights = dict(weights) if weights is not None else None
        self.dim = dims.pop()
        self.max_workers = max_workers
        self.scheduler = scheduler or FullCycleScheduler(self.default_sequence())

    @abstractmethod
    def default_sequence(self) -> CoordinationSequence:
        """Full-cycle solve order for the current graph."""

    @abstractmethod
    def initial_state(self, x0: npt.ArrayLike | None = None) -> EngineState:
        """Every client block starts at x0 (zeros when omitted), μ at zero, ρ at rho_initial."""

    @abstractmethod
    def inner_sweep(self, state: EngineState, sequence: CoordinationSequence, *, map_fn: MapFn = map) -> EngineState:
        """Solve the clients of sequence once and return the next state.

        Args:
            state: State after the previous sweep
            sequence: Clients to solve, grouped into levels
            map_fn: Mapping used for the solves of one level, map or a pool's map

        Returns:
            EngineState: Updated blocks with v and total_inner advanced and the dual blocks recorded
        """

    @abstractmethod
    def outer_update(self, state: EngineState) -> EngineState:
        """Multiplier and penalty update that closes outer loop k."""

    @abstractmethod
    def drop(self, state: EngineState, client: int) -> EngineState:
        """Remove a client mid-run and return the adjusted state."""

    def _start_block(self, x0: npt.ArrayLike | None) -> ParamBlock:
        block = np.zeros(self.dim) if x0 is None else np.asarray(x0, dtype=np.float64)
        if block.shape != (self.dim,):
            raise DimensionError(f"initial point shape {block.shape} does not match dimension {self.dim}")
        return as_block(block)

    def _fresh_rho(self) -> ParamBlock:
        return as_block(np.full(self.dim, self.config.rho_initial))

    def _forget_client(self, client: int) -> None:
        self.objectives.pop(client, None)
        if self.weights is not None:
            self.weights.pop(client, None)

    def measure(self, state: EngineState) -> EngineState:
        return replace(state, residuals=compute_residuals(state))

    def check(self, state: EngineState) -> StopVerdict:
        return stopping_check(state, self.config)

    @contextmanager
    def _map_fn(self) -> Iterator[MapFn]:
        if self.max_workers <= 1:
            yield map
            return
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            yield pool.map

    def _record(self, state: EngineState, start_ns: int) -> TraceRecord:
        report = state.residuals
        record = TraceRecord(
            k=state.k,
            v=state.v,
            primal_inf=report.primal_inf_norm,
            dual_inf=report.dual_inf_norm,
            surrogate_value=surrogate_value(state, self.objectives),
            elapsed_ns=time.perf_counter_ns() - start_ns,
            rho_max=state.rho_max,
        )
        trace_logger.info(record.model_dump_json())
        logger.debug(
            f"Sweep k={record.k} v={record.v}: primal={record.primal_inf:.3e} dual={record.dual_inf:.3e} "
            f"surrogate={record.surrogate_value:.6e}"
        )
        return record

    def run(
        self,
        state: EngineState | None = None,
        *,
        on_sweep: SweepCallback | None = None,
        dropout: Mapping[int, Sequence[int]] | None = None,
    ) -> EngineResult:
        """Iterate until termination, budget exhaustion or the outer-loop limit.

        dropout maps a 1-based cumulative sweep index to the clients removed
        right before that sweep runs.
        """
        state = state or self.initial_state()
        pending = {int(sweep): list(clients) for sweep, clients in (dropout or {}).items()}
        trace: list[TraceRecord] = []
        start_ns = time.perf_counter_ns()

        def sweep(current: EngineState, sequence: CoordinationSequence, map_fn: MapFn) -> EngineState:
            current = self.measure(self.inner_sweep(current, sequence, map_fn=map_fn))
            record = self._record(current, start_ns)
            trace.append(record)
            if on_sweep is not None:
                on_sweep(current, record)
            return current

        with self._map_fn() as map_fn:
            while True:
                for client in pending.pop(state.total_inner + 1, []):
                    state = self.drop(state, client)

                sequence = self.scheduler.sequence_for(state.v + 1, state.changes)
                state = sweep(state, sequence, map_fn)
                verdict = self.check(state)

                leaving_inner = (
                    verdict.decision is not Decision.CONTINUE_INNER and verdict.status is not RunStatus.BUDGET
                )
                if leaving_inner and self.config.final_sweep_full_cycle and not sequence.covers(self.graph.clients):
                    state = sweep(state, self.scheduler.full_cycle(), map_fn)
                    verdict = self.check(state)

                if verdict.decision is Decision.TERMINATE:
                    break
                if verdict.decision is Decision.GO_OUTER:
                    report = state.residuals
                    logger.info(
                        f"Outer loop {state.k} done after {state.v} sweeps: primal={report.primal_inf_norm:.3e} "
                        f"dual={report.dual_inf_norm:.3e} rho_max={state.rho_max:.3e}"
                    )
                    state = self.outer_update(state)

        elapsed = time.perf_counter_ns() - start_ns
        report = state.residuals
        logger.info(
            f"Run finished with status {verdict.status} after {state.total_inner} sweeps and {state.k} outer loops "
            f"(primal={report.primal_inf_norm:.3e}, dual={report.dual_inf_norm:.3e})"
        )
        return EngineResult(state=state, status=verdict.status, trace=trace, elapsed_ns=elapsed)
