"""Local client objectives f_i = Ψ_i + Π_i.

Ψ_i is the smooth data term (sum of squared errors, or logistic loss scaled
by the global sample count N), Π_i = λ‖x‖₁ is the nonsmooth part.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from utils.compat import StrEnum

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from models.core import ParamBlock, as_block
from models.errors import CapabilityError, DimensionError, ParameterError

# Logistic Hessians are dense m×m products over the client's rows.
HESSIAN_MAX_ROWS = 2000


class ObjectiveKind(StrEnum):
    LEAST_SQUARES = "least-squares"
    LOGISTIC_L1 = "logistic-l1"


@dataclass(frozen=True)
class Sample:
    features: ParamBlock
    target: float


@dataclass(frozen=True, eq=False)
class LocalObjective:
    kind: ObjectiveKind
    features: npt.NDArray[np.float64]
    targets: npt.NDArray[np.float64]
    global_count: int
    l1_weight: float = 0.0

    def __post_init__(self):
        kind = ObjectiveKind(self.kind)
        features = np.array(self.features, dtype=np.float64, ndmin=2)
        targets = np.array(self.targets, dtype=np.float64).reshape(-1)
        if features.shape[0] != targets.shape[0]:
            raise DimensionError(f"{features.shape[0]} feature rows but {targets.shape[0]} targets")
        if features.shape[0] < 1:
            raise ParameterError("a local objective needs at least one sample")
        if self.global_count < features.shape[0]:
            raise ParameterError(f"global count {self.global_count} is smaller than local count {features.shape[0]}")
        if self.l1_weight < 0:
            raise ParameterError("l1_weight must be >= 0")
        if kind is ObjectiveKind.LOGISTIC_L1 and not np.all(np.isin(targets, (-1.0, 1.0))):
            raise ParameterError("classification targets must be exactly -1 or +1")
        features.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "l1_weight", float(self.l1_weight))

    @classmethod
    def from_samples(
        cls,
        kind: ObjectiveKind | str,
        samples: Sequence[Sample],
        global_count: int | None = None,
        l1_weight: float = 0.0,
    ) -> LocalObjective:
        if not samples:
            raise ParameterError("a local objective needs at least one sample")
        features = np.vstack([np.asarray(s.features, dtype=np.float64) for s in samples])
        targets = np.array([s.target for s in samples], dtype=np.float64)
        return cls(kind, features, targets, global_count or len(samples), l1_weight)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def local_count(self) -> int:
        return self.features.shape[0]

    def _check(self, x: npt.ArrayLike) -> npt.NDArray[np.float64]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DimensionError(f"parameter length {x.shape} does not match feature count {self.dim}")
        return x


def eval_smooth(obj: LocalObjective, x: npt.ArrayLike) -> float:
    x = obj._check(x)
    if obj.kind is ObjectiveKind.LEAST_SQUARES:
        residual = obj.features @ x - obj.targets
        return float(residual @ residual)
    margins = obj.targets * (obj.features @ x)
    # logaddexp(0, -t) = log(1 + exp(-t)) without overflow
    return float(np.sum(np.logaddexp(0.0, -margins)) / obj.global_count)


def eval_nonsmooth(obj: LocalObjective, x: npt.ArrayLike) -> float:
    if obj.l1_weight == 0.0:
        return 0.0
    return obj.l1_weight * float(np.sum(np.abs(obj._check(x))))


def eval_objective(obj: LocalObjective, x: npt.ArrayLike) -> float:
    return eval_smooth(obj, x) + eval_nonsmooth(obj, x)


def grad_smooth(obj: LocalObjective, x: npt.ArrayLike) -> ParamBlock:
    x = obj._check(x)
    if obj.kind is ObjectiveKind.LEAST_SQUARES:
        residual = obj.features @ x - obj.targets
        return as_block(2.0 * (obj.features.T @ residual), copy=False)
    margins = obj.targets * (obj.features @ x)
    weights = -obj.targets * expit(-margins)
    return as_block((obj.features.T @ weights) / obj.global_count, copy=False)


def hessian_smooth(obj: LocalObjective, x: npt.ArrayLike) -> npt.NDArray[np.float64]:
    x = obj._check(x)
    if obj.kind is ObjectiveKind.LEAST_SQUARES:
        return 2.0 * (obj.features.T @ obj.features)
    if obj.local_count > HESSIAN_MAX_ROWS:
        raise CapabilityError(
            f"logistic Hessian limited to {HESSIAN_MAX_ROWS} local samples, client holds {obj.local_count}"
        )
    probs = expit(obj.targets * (obj.features @ x))
    curvature = probs * (1.0 - probs)
    return (obj.features.T * curvature) @ obj.features / obj.global_count


def soft_threshold(beta: npt.ArrayLike, t: float) -> ParamBlock:
    """[S_t(β)]_r = sign(β_r)·max(|β_r| − t, 0)."""
    if t < 0:
        raise ParameterError(f"threshold must be >= 0, got {t}")
    beta = np.asarray(beta, dtype=np.float64)
    return as_block(np.sign(beta) * np.maximum(np.abs(beta) - t, 0.0), copy=False)


@dataclass(frozen=True)
class StationarityResult:
    passed: bool
    violation: float


def check_stationarity(
    obj: LocalObjective, smooth_grad: npt.ArrayLike, x: npt.ArrayLike, tol: float
) -> StationarityResult:
    """Check −∇Ψ(x) ∈ λ∂‖x‖₁ coordinate-wise.

    smooth_grad must be the gradient of the whole smooth surrogate at x,
    augmented-Lagrangian terms included.
    """
    if tol < 0:
        raise ParameterError(f"tolerance must be >= 0, got {tol}")
    x = obj._check(x)
    g = np.asarray(smooth_grad, dtype=np.float64)
    if g.shape != x.shape:
        raise DimensionError(f"gradient shape {g.shape} does not match parameter shape {x.shape}")
    lam = obj.l1_weight
    nonzero = x != 0.0
    violations = np.where(
        nonzero,
        np.abs(g + lam * np.sign(x)),
        np.maximum(np.abs(g) - lam, 0.0),
    )
    worst = float(np.max(violations)) if violations.size else 0.0
    return StationarityResult(passed=worst <= tol, violation=worst)
