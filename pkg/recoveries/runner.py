import logging
from collections.abc import Sequence
from dataclasses import replace

import numpy as np
import numpy.typing as npt

from engine.base import ConsensusEngine
from engine.factory import EngineFactory
from models.core import ParamBlock, as_block
from models.errors import PresetError
from models.objectives import LocalObjective
from recoveries.presets import Preset, PresetKind, distributed_pa_penalties
from topology.coordination import make_scheduler, single_level

logger = logging.getLogger(__name__)


def build_engine(preset: Preset, objectives: Sequence[LocalObjective]) -> ConsensusEngine:
    if len(objectives) != preset.n:
        raise PresetError(f"{preset.kind} was built for {preset.n} clients, got {len(objectives)} objectives")
    for client, obj in enumerate(objectives):
        if obj.l1_weight != preset.lam:
            raise PresetError(f"client {client} has l1 weight {obj.l1_weight}, preset expects {preset.lam}")
    clients = list(preset.graph.clients)
    scheduler = None
    if preset.scheduler != "full":
        scheduler = make_scheduler(
            preset.scheduler, single_level(clients), per_sweep=preset.per_sweep, seed=preset.seed
        )
    weights = dict(zip(clients, preset.weights, strict=True)) if preset.weights is not None else None
    return EngineFactory.create(
        preset.graph.mode,
        dict(zip(clients, objectives, strict=True)),
        preset.graph,
        preset.config,
        preset.solver,
        scheduler=scheduler,
        weights=weights,
    )


def _iterate(preset: Preset, state) -> ParamBlock:
    if preset.iterates_blocks:
        return as_block(np.concatenate([state.x[c] for c in state.clients]), copy=False)
    return state.x_hat


def run_preset(
    preset: Preset,
    objectives: Sequence[LocalObjective],
    x0: npt.ArrayLike,
    steps: int,
    *,
    alphas: Sequence[float] | None = None,
) -> list[ParamBlock]:
    """Drive the engine one sweep and one multiplier update per step.

    Returns steps + 1 iterates, the starting point first. alphas gives per-client
    step sizes for FedProx (distributed proximal averaging).
    """
    engine = build_engine(preset, objectives)
    state = engine.initial_state(x0)
    if alphas is not None:
        if preset.kind is not PresetKind.FEDPROX:
            raise PresetError("per-client step sizes apply to FedProx only")
        if len(alphas) != preset.n:
            raise PresetError(f"{len(alphas)} step sizes for {preset.n} clients")
        penalties = distributed_pa_penalties(alphas)
        rho = {c: as_block(np.full(engine.dim, r)) for c, r in zip(state.clients, penalties, strict=True)}
        state = replace(state, rho=rho)

    iterates = [_iterate(preset, state)]
    for _ in range(steps):
        sequence = engine.scheduler.sequence_for(state.v + 1, state.changes)
        state = engine.inner_sweep(state, sequence)
        state = engine.outer_update(state)
        iterates.append(_iterate(preset, state))
    logger.debug(f"{preset.kind} preset ran {steps} steps on {preset.n} clients")
    return iterates
