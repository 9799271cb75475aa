"""Coordination sequences and the per-sweep schedulers built on them."""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from utils.compat import StrEnum

import numpy as np

from models.errors import ParameterError, TopologyError
from topology.graph import ConsensusGraph, Edge, restitch_without

logger = logging.getLogger(__name__)


class CoordinationMode(StrEnum):
    FULL_CYCLE = "full-cycle"
    PARTIAL_CYCLE = "partial-cycle"
    SELECTIVE_REPETITIVE = "selective-repetitive"


@dataclass(frozen=True)
class CoordinationSequence:
    levels: tuple[tuple[int, ...], ...]
    mode: CoordinationMode = CoordinationMode.FULL_CYCLE

    def __post_init__(self):
        mode = CoordinationMode(self.mode)
        levels = tuple(tuple(int(c) for c in level) for level in self.levels if len(level))
        if not levels:
            raise TopologyError("a coordination sequence needs at least one client")
        for level in levels:
            if len(set(level)) != len(level):
                raise TopologyError(f"client repeated within level {level}")
        flat = [c for level in levels for c in level]
        if mode is not CoordinationMode.SELECTIVE_REPETITIVE and len(set(flat)) != len(flat):
            raise TopologyError(f"{mode} sequences schedule each client at most once")
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "levels", levels)

    @property
    def clients(self) -> tuple[int, ...]:
        """Scheduled clients in solve order, repeats included."""
        return tuple(c for level in self.levels for c in level)

    @property
    def first_level(self) -> frozenset[int]:
        return frozenset(self.levels[0])

    def covers(self, clients: Sequence[int]) -> bool:
        return set(self.clients) == set(clients) and self.mode is CoordinationMode.FULL_CYCLE

    def restricted_to(self, keep: set[int] | frozenset[int], mode: CoordinationMode) -> CoordinationSequence:
        """Same level order, keeping only the clients in keep."""
        return CoordinationSequence(tuple(tuple(c for c in level if c in keep) for level in self.levels), mode)

    def without(self, client: int) -> CoordinationSequence:
        return CoordinationSequence(
            tuple(tuple(c for c in level if c != client) for level in self.levels),
            self.mode,
        )


def single_level(clients: Sequence[int]) -> CoordinationSequence:
    """All clients solved in parallel, as in centralized coordination."""
    return CoordinationSequence((tuple(sorted(clients)),))


def sequential_levels(clients: Sequence[int]) -> CoordinationSequence:
    return CoordinationSequence(tuple((c,) for c in clients))


class CoordinationScheduler(ABC):
    """Produces the sequence used by each inner sweep from a full-cycle base."""

    kind: str = ""

    def __init__(self, base: CoordinationSequence):
        if base.mode is not CoordinationMode.FULL_CYCLE:
            raise TopologyError("schedulers start from a full-cycle sequence")
        self.base = base

    @abstractmethod
    def sequence_for(self, sweep: int, changes: Mapping[int, float] | None = None) -> CoordinationSequence:
        """Return the sequence for the given 1-based sweep index.

        changes holds the ∞-norm movement of each client in the previous sweep.
        """

    def full_cycle(self) -> CoordinationSequence:
        return self.base

    def drop(self, client: int) -> None:
        self.base = self.base.without(client)


class FullCycleScheduler(CoordinationScheduler):
    kind = "full"

    def sequence_for(self, sweep, changes=None):
        return self.base


class RandomPartialScheduler(CoordinationScheduler):
    kind = "partial-random"

    def __init__(self, base: CoordinationSequence, per_sweep: int, seed: int | None = None):
        super().__init__(base)
        if per_sweep < 1:
            raise ParameterError(f"per_sweep must be >= 1, got {per_sweep}")
        self.per_sweep = per_sweep
        self.rng = np.random.default_rng(seed)

    def sequence_for(self, sweep, changes=None):
        pool = self.base.clients
        size = min(self.per_sweep, len(pool))
        picked = self.rng.choice(len(pool), size=size, replace=False)
        keep = frozenset(pool[int(i)] for i in picked)
        return self.base.restricted_to(keep, CoordinationMode.PARTIAL_CYCLE)


class GreedyPartialScheduler(CoordinationScheduler):
    """Schedule the clients that moved the most in the previous sweep."""

    kind = "partial-greedy"

    def __init__(self, base: CoordinationSequence, per_sweep: int):
        super().__init__(base)
        if per_sweep < 1:
            raise ParameterError(f"per_sweep must be >= 1, got {per_sweep}")
        self.per_sweep = per_sweep

    def sequence_for(self, sweep, changes=None):
        pool = self.base.clients
        if not changes:
            return self.base
        # stable sort: ties keep id order
        ranked = sorted(pool, key=lambda c: -changes.get(c, np.inf))
        keep = frozenset(ranked[: self.per_sweep])
        return self.base.restricted_to(keep, CoordinationMode.PARTIAL_CYCLE)


class SelectiveRepetitiveScheduler(CoordinationScheduler):
    """A full cycle followed by extra solves of the listed clients, one level each."""

    kind = "selective-repetitive"

    def __init__(self, base: CoordinationSequence, repeats: Sequence[int]):
        super().__init__(base)
        unknown = set(repeats) - set(base.clients)
        if unknown:
            raise TopologyError(f"repeat list names unknown clients {sorted(unknown)}")
        self.repeats = tuple(repeats)

    def sequence_for(self, sweep, changes=None):
        repeats = tuple((c,) for c in self.repeats if c in self.base.clients)
        return CoordinationSequence(self.base.levels + repeats, CoordinationMode.SELECTIVE_REPETITIVE)


def make_scheduler(
    kind: str,
    base: CoordinationSequence,
    *,
    per_sweep: int = 1,
    seed: int | None = None,
    repeats: Sequence[int] = (),
) -> CoordinationScheduler:
    if kind == FullCycleScheduler.kind:
        return FullCycleScheduler(base)
    if kind == RandomPartialScheduler.kind:
        return RandomPartialScheduler(base, per_sweep, seed)
    if kind == GreedyPartialScheduler.kind:
        return GreedyPartialScheduler(base, per_sweep)
    if kind == SelectiveRepetitiveScheduler.kind:
        return SelectiveRepetitiveScheduler(base, repeats)
    raise ParameterError(f"Unknown coordination scheduler: {kind}")


def drop_client(
    seq: CoordinationSequence, graph: ConsensusGraph, client: int
) -> tuple[CoordinationSequence, ConsensusGraph, tuple[Edge, ...]]:
    """Remove a client from both the schedule and the consensus graph.

    Its neighbors are re-stitched in id order, so a chain 0-1-2 becomes 0-2.
    The third element lists the newly created edges, which start with fresh
    multipliers.
    """
    new_graph, created = restitch_without(graph, client)
    new_seq = seq.without(client)
    logger.info(f"Dropped client {client}: {new_graph.n} clients, {len(new_graph.edges)} edges remain")
    return new_seq, new_graph, created
