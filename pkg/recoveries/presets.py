"""Configurations under which the consensus engine reduces to classical methods.

Every preset fixes ρ = 1/√(2α) so that the penalty 2ρ² equals 1/α, the
inverse step size, and runs one sweep per multiplier update.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from utils.compat import StrEnum

from engine.config import EngineConfig, MuPolicy
from models.errors import PresetError
from solvers.local import SolverSpec
from solvers.subproblem import PROX_WEIGHT_FLOOR
from topology.graph import ConsensusGraph, centralized_graph, chain_graph, isolated_node


class PresetKind(StrEnum):
    PA = "PA"
    GD = "GD"
    NM = "NM"
    MBGD = "MBGD"
    SGD = "SGD"
    FEDPROX = "FedProx"
    FEDAVG = "FedAvg"
    LOCAL_GD = "LocalGD"
    DGD = "DGD"
    BCGD = "BCGD"
    PG = "PG"


SINGLE_CLIENT_KINDS = frozenset({PresetKind.PA, PresetKind.GD, PresetKind.NM, PresetKind.PG})
SMOOTH_ONLY_KINDS = frozenset(
    {PresetKind.GD, PresetKind.NM, PresetKind.MBGD, PresetKind.SGD, PresetKind.FEDAVG, PresetKind.LOCAL_GD}
)
# Clients drawn per sweep when MBGD is built without an explicit batch.
DEFAULT_MBGD_BATCH = 2
# Kinds whose iterate is the list of client blocks rather than x̂.
BLOCK_ITERATE_KINDS = frozenset({PresetKind.DGD, PresetKind.BCGD, PresetKind.PG})


@dataclass(frozen=True)
class Preset:
    kind: PresetKind
    config: EngineConfig
    solver: SolverSpec
    graph: ConsensusGraph
    mu_policy: MuPolicy
    lam: float
    scheduler: str = "full"
    per_sweep: int = 1
    seed: int | None = None
    weights: tuple[float, ...] | None = None

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def iterates_blocks(self) -> bool:
        return self.kind in BLOCK_ITERATE_KINDS


def penalty_for_step(alpha: float) -> float:
    return 1.0 / math.sqrt(2.0 * alpha)


def build_preset(
    kind: PresetKind | str,
    n: int,
    alpha: float,
    lam: float = 0.0,
    *,
    passes: int = 1,
    seed: int | None = 0,
    steps: int = 1000,
    batch: int | None = None,
) -> Preset:
    """Return the engine configuration that reproduces a classical method.

    Args:
        kind: Which classical method to reproduce.
        n: Number of clients.
        alpha: Step size; fixes ρ = 1/√(2α).
        lam: ℓ1 weight carried by every client objective.
        passes: Local gradient steps per sweep for LocalGD.
        seed: Seed of the random client selection of MBGD and SGD.
        steps: Sweep budget. Presets run one sweep per multiplier update, so this
            is also the outer-loop limit.
        batch: Clients drawn per sweep by MBGD (defaults to DEFAULT_MBGD_BATCH,
            capped at n). SGD always draws one.

    Returns:
        The preset, ready for recoveries.runner.build_engine.

    Raises:
        PresetError: If the kind is unknown or incompatible with n, alpha, lam or batch.
    """
    try:
        kind = PresetKind(kind)
    except ValueError as exc:
        raise PresetError(f"Unknown preset: {kind}") from exc
    if alpha <= 0:
        raise PresetError(f"step size must be > 0, got {alpha}")
    if lam < 0:
        raise PresetError(f"l1 weight must be >= 0, got {lam}")
    if kind in SINGLE_CLIENT_KINDS and n != 1:
        raise PresetError(f"{kind} runs on exactly one client, got n={n}")
    if kind not in SINGLE_CLIENT_KINDS and n < 2:
        raise PresetError(f"{kind} needs at least two clients, got n={n}")
    if kind in SMOOTH_ONLY_KINDS and lam > 0:
        raise PresetError(f"{kind} is defined for smooth objectives only, got λ={lam}")
    if batch is not None and kind is not PresetKind.MBGD:
        raise PresetError(f"batch applies to MBGD only, got it for {kind}")
    if batch is not None and not 1 <= batch <= n:
        raise PresetError(f"batch must lie in [1, {n}], got {batch}")

    mu_policy: MuPolicy = "frozen"
    solver_kind = "exact-descent"
    init_from = "previous"
    penalty_scale = 1.0
    graph = centralized_graph(n)
    scheduler = "full"
    weights = None
    per_sweep = 1

    match kind:
        case PresetKind.GD | PresetKind.MBGD | PresetKind.SGD:
            mu_policy = "gradient"
            if kind is not PresetKind.GD:
                scheduler = "partial-random"
            if kind is PresetKind.MBGD:
                per_sweep = batch if batch is not None else min(DEFAULT_MBGD_BATCH, n)
        case PresetKind.NM:
            mu_policy = "newton"
        case PresetKind.FEDAVG:
            # ρ → 0⁺: the local prox weight lands below the floor, so each client
            # minimizes its own f_i exactly while the consensus divisor stays positive
            init_from = "consensus"
            penalty_scale = 0.5 * PROX_WEIGHT_FLOOR / penalty_for_step(alpha) ** 2
            weights = tuple(1.0 / n for _ in range(n))
        case PresetKind.LOCAL_GD:
            solver_kind = "bcpg"
            init_from = "consensus"
            penalty_scale = 0.0
            weights = tuple(1.0 / n for _ in range(n))
        case PresetKind.DGD:
            solver_kind = "bcpg"
            passes = 1
        case PresetKind.BCGD:
            solver_kind = "bcpg"
            passes = 1
            graph = chain_graph(n)
        case PresetKind.PG:
            solver_kind = "bcpg"
            passes = 1
            graph = isolated_node()

    config = EngineConfig(
        criterion="B4",
        vmax=1,
        rho_initial=penalty_for_step(alpha),
        mu_policy=mu_policy,
        final_sweep_full_cycle=False,
        max_outer=steps,
        max_total_inner=steps,
    )
    solver = SolverSpec(
        kind=solver_kind,
        step=alpha,
        passes=passes,
        g_tol=1e-12,
        lipschitz_step=solver_kind == "exact-descent",
        init_from=init_from,
        penalty_scale=penalty_scale,
    )
    return Preset(
        kind=kind,
        config=config,
        solver=solver,
        graph=graph,
        mu_policy=mu_policy,
        lam=lam,
        scheduler=scheduler,
        per_sweep=per_sweep,
        seed=seed,
        weights=weights,
    )


def distributed_pa_penalties(alphas: Sequence[float]) -> list[float]:
    """Per-client ρ_i = 1/√(2α_i); the consensus step then averages with p_i = β_i/Σβ_j, β_i = 1/(2α_i)."""
    if any(a <= 0 for a in alphas):
        raise PresetError("every client step size must be > 0")
    return [penalty_for_step(a) for a in alphas]
