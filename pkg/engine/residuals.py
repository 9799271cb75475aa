"""Primal/dual residuals and the augmented Lagrangian surrogate value."""

from collections.abc import Mapping

import numpy as np

from engine.state import EngineState
from models.core import ResidualReport, assemble_residual_report
from models.errors import ParameterError
from models.objectives import LocalObjective, eval_objective


def compute_residuals(state: EngineState) -> ResidualReport:
    """C per consensus constraint, D as recorded by the last sweep.

    Centralized: C_i = x̂ − x_i, D = x̂ − x̂_prev. Decentralized: C_ij = x_i − x_j,
    D = block changes of every client outside the root level of the hierarchy.
    """
    if state.v < 1:
        raise ParameterError("residuals need at least one completed sweep in the current outer loop")
    if state.x_hat is not None:
        primal = [state.x_hat - state.x[c] for c in state.clients]
    else:
        primal = [state.x[i] - state.x[j] for i, j in sorted(state.mu)]
    return assemble_residual_report(primal, state.dual_blocks)


def surrogate_value(state: EngineState, objectives: Mapping[int, LocalObjective | None]) -> float:
    """Λ_ρ(x, μ) including the nonsmooth l1 terms."""
    total = 0.0
    for c in state.clients:
        obj = objectives.get(c)
        if obj is not None:
            total += eval_objective(obj, state.x[c])
    if state.x_hat is not None:
        for c in state.clients:
            gap = state.x_hat - state.x[c]
            total += float(state.mu[c] @ gap) + float(np.sum((state.rho[c] * gap) ** 2))
    else:
        for i, j in state.mu:
            gap = state.x[i] - state.x[j]
            total += float(state.mu[(i, j)] @ gap) + float(np.sum((state.rho[(i, j)] * gap) ** 2))
    return total
