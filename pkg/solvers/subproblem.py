"""The local augmented-Lagrangian subproblem in a form shared by both modes.

Every client subproblem reduces to

    f(x) + ℓᵀx + Σ w∘(x − z)²

where the linear term ℓ collects multipliers and each weighted pull
w∘(x − z)² is one penalty term. Pulls are folded into a single total weight
and a weighted center, which leaves the gradient unchanged.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from models.core import ParamBlock, as_block
from models.errors import DimensionError
from models.objectives import LocalObjective, grad_smooth

# Penalty weights below this are treated as absent.
PROX_WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class LocalSubproblem:
    objective: LocalObjective | None
    linear: ParamBlock
    weight: ParamBlock
    center: ParamBlock

    @property
    def dim(self) -> int:
        return self.linear.shape[0]

    @property
    def l1_weight(self) -> float:
        return 0.0 if self.objective is None else self.objective.l1_weight

    def smooth_gradient(self, x: npt.ArrayLike) -> ParamBlock:
        x = np.asarray(x, dtype=np.float64)
        grad = self.linear + 2.0 * self.weight * (x - self.center)
        if self.objective is not None:
            grad = grad + grad_smooth(self.objective, x)
        return as_block(grad, copy=False)


def _fold(
    dim: int, linear: npt.ArrayLike, pulls: Iterable[tuple[npt.ArrayLike, npt.ArrayLike]], penalty_scale: float
) -> tuple[ParamBlock, ParamBlock, ParamBlock]:
    total = np.zeros(dim)
    weighted = np.zeros(dim)
    for weight, anchor in pulls:
        weight = np.asarray(weight, dtype=np.float64) * penalty_scale
        anchor = np.asarray(anchor, dtype=np.float64)
        if weight.shape != (dim,) or anchor.shape != (dim,):
            raise DimensionError(f"penalty term shapes {weight.shape}/{anchor.shape} do not match dimension {dim}")
        weight = np.where(weight < PROX_WEIGHT_FLOOR, 0.0, weight)
        total += weight
        weighted += weight * anchor
    center = np.divide(weighted, total, out=np.zeros(dim), where=total > 0)
    linear = np.asarray(linear, dtype=np.float64)
    if linear.shape != (dim,):
        raise DimensionError(f"linear term shape {linear.shape} does not match dimension {dim}")
    return as_block(linear), as_block(total, copy=False), as_block(center, copy=False)


def cc_subproblem(
    objective: LocalObjective | None,
    x_hat: npt.ArrayLike,
    mu: npt.ArrayLike,
    rho: npt.ArrayLike,
    *,
    penalty_scale: float = 1.0,
) -> LocalSubproblem:
    """f_i(x) + μ_iᵀ(x̂ − x) + ‖ρ_i∘(x̂ − x)‖², dropping the constant μ_iᵀx̂."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    dim = x_hat.shape[0]
    if mu.shape != (dim,) or rho.shape != (dim,):
        raise DimensionError(f"multiplier/penalty shapes {mu.shape}/{rho.shape} do not match dimension {dim}")
    linear, weight, center = _fold(dim, -mu, [(rho * rho, x_hat)], penalty_scale)
    return LocalSubproblem(objective, linear, weight, center)


def dc_subproblem(
    objective: LocalObjective | None,
    client: int,
    neighbors: Mapping[int, npt.ArrayLike],
    mu: Mapping[tuple[int, int], npt.ArrayLike],
    rho: Mapping[tuple[int, int], npt.ArrayLike],
    *,
    dim: int,
    penalty_scale: float = 1.0,
) -> LocalSubproblem:
    """Client s's share of the decentralized augmented Lagrangian.

    An edge (s, j) contributes μ_sjᵀ(x_s − x_j) + ‖ρ_sj∘(x_s − x_j)‖², an edge
    (e, s) contributes μ_esᵀ(x_e − x_s) + ‖ρ_es∘(x_e − x_s)‖².
    """
    linear = np.zeros(dim)
    pulls = []
    for other, value in neighbors.items():
        edge = (client, other) if client < other else (other, client)
        edge_mu = np.asarray(mu[edge], dtype=np.float64)
        edge_rho = np.asarray(rho[edge], dtype=np.float64)
        if edge_mu.shape != (dim,):
            raise DimensionError(f"multiplier on edge {edge} has shape {edge_mu.shape}, expected ({dim},)")
        linear += edge_mu if client < other else -edge_mu
        pulls.append((edge_rho * edge_rho, value))
    linear, weight, center = _fold(dim, linear, pulls, penalty_scale)
    return LocalSubproblem(objective, linear, weight, center)
