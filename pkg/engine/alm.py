"""Generic augmented Lagrangian method for affine equality constraints.

Each outer loop minimizes f(x) + μᵀh(x) + ‖ρ∘h(x)‖² and then updates
μ ← μ + 2ρ∘ρ∘h(x).
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from scipy.optimize import minimize

from engine.config import EngineConfig
from engine.stopping import RunStatus
from models.core import ParamBlock, as_block, inf_norm
from models.errors import CapabilityError, DimensionError, NonFiniteError
from models.objectives import LocalObjective, eval_smooth, grad_smooth

logger = logging.getLogger(__name__)

InnerMinimizer = Callable[[Callable, Callable, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class SmoothFunction:
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def from_objective(cls, obj: LocalObjective) -> SmoothFunction:
        if obj.l1_weight > 0:
            raise CapabilityError("the generic ALM minimizes smooth objectives only")
        return cls(lambda x: eval_smooth(obj, x), lambda x: grad_smooth(obj, x))


@dataclass(frozen=True, eq=False)
class AffineConstraint:
    """h(x) = matrix·x − offset."""

    matrix: npt.NDArray[np.float64]
    offset: npt.NDArray[np.float64]

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64, ndmin=2)
        offset = np.array(self.offset, dtype=np.float64).reshape(-1)
        if matrix.shape[0] != offset.shape[0]:
            raise DimensionError(f"{matrix.shape[0]} constraint rows but {offset.shape[0]} offsets")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "offset", offset)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __call__(self, x: npt.ArrayLike) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=np.float64) - self.offset


@dataclass(frozen=True)
class AlmTraceEntry:
    k: int
    primal_inf: float
    lagrangian_value: float


@dataclass(frozen=True, eq=False)
class AlmResult:
    x: ParamBlock
    mu: ParamBlock
    status: RunStatus
    outer_loops: int
    trace: list[AlmTraceEntry] = field(default_factory=list)


def bfgs_minimizer(fun: Callable, grad: Callable, x0: np.ndarray, tol: float) -> np.ndarray:
    result = minimize(fun, x0, jac=grad, method="BFGS", options={"gtol": tol})
    if not result.success:
        logger.debug(f"BFGS inner solve stopped early: {result.message}")
    return result.x


def alm_solve(
    objective: SmoothFunction | LocalObjective,
    constraint: AffineConstraint,
    cfg: EngineConfig,
    inner_minimizer: InnerMinimizer = bfgs_minimizer,
    *,
    x0: npt.ArrayLike | None = None,
    mu0: npt.ArrayLike | None = None,
) -> AlmResult:
    """Returns the last iterate and the multiplier after its update.

    The inner tolerance follows the B2 schedule when that criterion is
    configured, and ε_dual otherwise. On hitting max_outer the state reached so
    far is returned with status max_outer.
    """
    if isinstance(objective, LocalObjective):
        objective = SmoothFunction.from_objective(objective)
    x = np.zeros(constraint.dim) if x0 is None else np.array(x0, dtype=np.float64)
    mu = np.zeros(constraint.matrix.shape[0]) if mu0 is None else np.array(mu0, dtype=np.float64)
    if x.shape != (constraint.dim,) or mu.shape != constraint.offset.shape:
        raise DimensionError(f"start shapes {x.shape}/{mu.shape} do not match the constraint")
    rho = np.full(mu.shape, cfg.rho_initial)
    trace: list[AlmTraceEntry] = []

    h = constraint(x)
    if inf_norm(h) <= cfg.eps_pri:
        logger.info("Starting point is already feasible")
        return AlmResult(as_block(x), as_block(mu), RunStatus.OPTIMAL, 0, trace)

    status = RunStatus.MAX_OUTER
    k = 0
    for k in range(1, cfg.max_outer + 1):
        weight = rho * rho

        def lagrangian(z, mu=mu, weight=weight):
            hz = constraint(z)
            return objective.value(z) + float(mu @ hz) + float(weight @ (hz * hz))

        def lagrangian_grad(z, mu=mu, weight=weight):
            hz = constraint(z)
            return np.asarray(objective.gradient(z)) + constraint.matrix.T @ (mu + 2.0 * weight * hz)

        x = np.asarray(inner_minimizer(lagrangian, lagrangian_grad, x, cfg.inner_tolerance(k)), dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise NonFiniteError("inner minimizer returned non-finite values", k=k)
        h = constraint(x)
        value = lagrangian(x)
        mu = mu + 2.0 * weight * h
        primal = inf_norm(h)
        trace.append(AlmTraceEntry(k=k, primal_inf=primal, lagrangian_value=value))
        logger.debug(f"ALM outer loop {k}: ‖h‖∞={primal:.3e} Λ={value:.6e}")
        if primal <= cfg.eps_pri:
            status = RunStatus.OPTIMAL
            break
        rho = cfg.next_rho(rho)

    if status is RunStatus.MAX_OUTER:
        logger.warning(f"ALM stopped at max_outer={cfg.max_outer} with ‖h‖∞={trace[-1].primal_inf:.3e}")
    return AlmResult(as_block(x), as_block(mu), status, k, trace)
