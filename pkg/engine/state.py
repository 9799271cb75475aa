from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field

from models.core import EdgeRole, EdgeVector, ParamBlock, ResidualReport
from models.errors import ParameterError

# Client id in centralized mode, (i, j) edge in decentralized mode.
EdgeKey = int | tuple[int, int]


@dataclass(frozen=True, eq=False)
class EngineState:
    """Snapshot of one run between engine operations.

    Operations never mutate a state; they return a new one.
    """

    x: Mapping[int, ParamBlock]
    mu: Mapping[EdgeKey, ParamBlock]
    rho: Mapping[EdgeKey, ParamBlock]
    x_hat: ParamBlock | None = None
    k: int = 1
    v: int = 0
    total_inner: int = 0
    residuals: ResidualReport | None = None
    dual_blocks: tuple[ParamBlock, ...] = ()
    changes: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.mu) != set(self.rho):
            raise ParameterError("mu and rho must carry exactly one vector per consensus edge")

    @property
    def clients(self) -> list[int]:
        return sorted(self.x)

    @property
    def rho_max(self) -> float:
        return max((float(np.max(r)) for r in self.rho.values()), default=0.0)

    def multiplier(self, key: EdgeKey) -> EdgeVector:
        return EdgeVector(self.mu[key], EdgeRole.MULTIPLIER)

    def penalty(self, key: EdgeKey) -> EdgeVector:
        return EdgeVector(self.rho[key], EdgeRole.PENALTY)

    def model(self) -> ParamBlock:
        """x̂ when a server block exists, the mean of client blocks otherwise."""
        if self.x_hat is not None:
            return self.x_hat
        return np.mean(np.vstack([self.x[c] for c in self.clients]), axis=0)


class TraceRecord(BaseModel):
    k: int = Field(description="Outer loop index")
    v: int = Field(description="Inner sweep index within the outer loop")
    primal_inf: float = Field(description="‖C‖∞ after the sweep")
    dual_inf: float = Field(description="‖D‖∞ after the sweep")
    surrogate_value: float = Field(description="Augmented Lagrangian value at the sweep's iterate")
    elapsed_ns: int = Field(description="Nanoseconds since the run started")
    rho_max: float = Field(description="Largest penalty entry in force")
