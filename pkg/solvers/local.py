"""Client-side solvers for the local ALM subproblems.

Two modes are offered. exact-descent solves each subproblem to tolerance, in closed form for
smooth least squares and by proximal-gradient descent otherwise. bcpg takes a fixed
number of proximal-gradient passes, which is what the local-step presets run on.
"""

import logging
from collections.abc import Mapping
from typing import Literal

import numpy as np
import numpy.typing as npt
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt

from models.core import ParamBlock, as_block
from models.errors import DimensionError, DivergenceError, ParameterError
from models.objectives import LocalObjective, ObjectiveKind, soft_threshold
from solvers.subproblem import LocalSubproblem, cc_subproblem, dc_subproblem

logger = logging.getLogger(__name__)


class SolverSpec(BaseModel):
    """How each client minimizes its local subproblem."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["exact-descent", "bcpg"] = Field(
        default="exact-descent", description="Solve to tolerance, or W proximal-gradient passes"
    )
    step: PositiveFloat = Field(default=1e-4, description="Step size α")
    passes: PositiveInt = Field(default=1, description="Local passes W in bcpg mode")
    g_tol: PositiveFloat = Field(default=1e-8, description="Exact-mode stationarity tolerance")
    max_local_iters: PositiveInt = Field(default=100_000, description="Iteration cap for exact-mode descent")
    init_from: Literal["previous", "consensus"] = Field(
        default="previous", description="Start each local solve from the client's last block or from x̂"
    )
    lipschitz_step: bool = Field(default=False, description="Exact mode uses α = 1/L instead of the configured step")
    penalty_scale: float = Field(
        default=1.0, ge=0.0, description="Multiplies every penalty weight; 0 drops the prox term"
    )


def bcpg_step(x_prev: npt.ArrayLike, smooth_grad: npt.ArrayLike, alpha: float, lam: float) -> ParamBlock:
    """One proximal-gradient update S_{λα}(x − α∇Ψ)."""
    if alpha <= 0:
        raise ParameterError(f"step size must be > 0, got {alpha}")
    if lam < 0:
        raise ParameterError(f"l1 weight must be >= 0, got {lam}")
    x_prev = np.asarray(x_prev, dtype=np.float64)
    smooth_grad = np.asarray(smooth_grad, dtype=np.float64)
    if x_prev.shape != smooth_grad.shape:
        raise DimensionError(f"gradient shape {smooth_grad.shape} does not match iterate shape {x_prev.shape}")
    moved = x_prev - alpha * smooth_grad
    if lam == 0:
        return as_block(moved, copy=False)
    return soft_threshold(moved, lam * alpha)


def lipschitz_constant(problem: LocalSubproblem) -> float:
    """Gradient Lipschitz bound of the smooth part of the subproblem."""
    penalty = 2.0 * float(np.max(problem.weight)) if problem.dim else 0.0
    obj = problem.objective
    if obj is None:
        return penalty
    spectral = float(np.linalg.norm(obj.features, 2)) ** 2
    if obj.kind is ObjectiveKind.LEAST_SQUARES:
        return 2.0 * spectral + penalty
    return spectral / (4.0 * obj.global_count) + penalty


def _closed_form(problem: LocalSubproblem, x_init: np.ndarray) -> np.ndarray | None:
    obj = problem.objective
    weight, center, linear = problem.weight, problem.center, problem.linear
    if obj is None:
        if np.all(weight > 0):
            return center - linear / (2.0 * weight)
        if np.any(linear[weight == 0] != 0):
            raise DivergenceError("coordinator subproblem is unbounded along an unpenalized coordinate")
        return np.where(weight > 0, center - linear / np.where(weight > 0, 2.0 * weight, 1.0), x_init)
    if obj.kind is not ObjectiveKind.LEAST_SQUARES or obj.l1_weight > 0:
        return None
    # (2AᵀA + 2 diag w) x = 2Aᵀb − ℓ + 2 w∘z
    lhs = 2.0 * (obj.features.T @ obj.features) + np.diag(2.0 * weight)
    rhs = 2.0 * (obj.features.T @ obj.targets) - linear + 2.0 * weight * center
    try:
        return scipy.linalg.solve(lhs, rhs, assume_a="sym")
    except (scipy.linalg.LinAlgError, ValueError):
        return scipy.linalg.lstsq(lhs, rhs)[0]


def _descend(problem: LocalSubproblem, x: np.ndarray, spec: SolverSpec) -> np.ndarray:
    alpha = 1.0 / lipschitz_constant(problem) if spec.lipschitz_step else spec.step
    lam = problem.l1_weight
    for it in range(1, spec.max_local_iters + 1):
        grad = problem.smooth_gradient(x)
        x_next = bcpg_step(x, grad, alpha, lam)
        if not np.all(np.isfinite(x_next)):
            raise DivergenceError(f"local descent diverged after {it} iterations; step size {alpha} is too large")
        # gradient mapping; equals ∇Ψ when λ = 0
        if float(np.max(np.abs(x - x_next))) / alpha <= spec.g_tol:
            return x_next
        x = x_next
    logger.debug(f"Local descent stopped at the iteration cap {spec.max_local_iters}")
    return x


def solve_subproblem(problem: LocalSubproblem, x_init: npt.ArrayLike, spec: SolverSpec) -> ParamBlock:
    """Solve or improve one assembled subproblem.

    Args:
        problem: Objective plus the folded penalty terms
        x_init: Starting block; bcpg passes begin here
        spec: Solver mode and step settings

    Returns:
        ParamBlock: Read-only block of the new client parameters

    Raises:
        DimensionError: x_init does not match the subproblem dimension
        DivergenceError: The iterates left the finite range
    """
    x = np.array(x_init, dtype=np.float64)
    if x.shape != (problem.dim,):
        raise DimensionError(f"initial point shape {x.shape} does not match dimension {problem.dim}")
    if spec.kind == "bcpg" and problem.objective is not None:
        lam = problem.l1_weight
        for _ in range(spec.passes):
            x = bcpg_step(x, problem.smooth_gradient(x), spec.step, lam)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(
                f"proximal-gradient pass produced non-finite values; step size {spec.step} is too large"
            )
        return as_block(x, copy=False)

    solved = _closed_form(problem, x)
    if solved is None:
        solved = _descend(problem, x, spec)
    if not np.all(np.isfinite(solved)):
        raise DivergenceError("local solve produced non-finite values")
    return as_block(solved, copy=False)


def solve_local_cc(
    obj: LocalObjective | None,
    x_hat: npt.ArrayLike,
    mu_i: npt.ArrayLike,
    rho_i: npt.ArrayLike,
    x_init: npt.ArrayLike,
    spec: SolverSpec,
) -> ParamBlock:
    """Minimize (or improve, in bcpg mode) f_i + μ_iᵀ(x̂ − x_i) + ‖ρ_i∘(x̂ − x_i)‖² over x_i."""
    if np.any(np.asarray(rho_i) <= 0):
        raise ParameterError("penalty vectors must be strictly positive")
    problem = cc_subproblem(obj, x_hat, mu_i, rho_i, penalty_scale=spec.penalty_scale)
    return solve_subproblem(problem, x_init, spec)


def solve_local_dc(
    obj: LocalObjective | None,
    neighbors_prev: Mapping[int, npt.ArrayLike],
    neighbors_done: Mapping[int, npt.ArrayLike],
    mu_s: Mapping[tuple[int, int], npt.ArrayLike],
    rho_s: Mapping[tuple[int, int], npt.ArrayLike],
    x_init: npt.ArrayLike,
    spec: SolverSpec,
    *,
    client: int,
) -> ParamBlock:
    """Minimize client s's decentralized subproblem over x_s.

    neighbors_prev holds the blocks of neighbors j > s, neighbors_done those of
    neighbors e < s; each value is whatever the caller's schedule has made
    current, so Gauss-Seidel order is decided by the caller.
    """
    overlap = set(neighbors_prev) & set(neighbors_done)
    if overlap or any(j <= client for j in neighbors_prev) or any(e >= client for e in neighbors_done):
        raise ParameterError(f"neighbor sets of client {client} are inconsistent with id order")
    dim = np.asarray(x_init).shape[0]
    problem = dc_subproblem(
        obj,
        client,
        {**neighbors_done, **neighbors_prev},
        mu_s,
        rho_s,
        dim=dim,
        penalty_scale=spec.penalty_scale,
    )
    return solve_subproblem(problem, x_init, spec)
