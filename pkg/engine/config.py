"""Validated engine settings and the schedules derived from them."""

import logging
import math
from collections.abc import Mapping
from typing import Any, Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, field_validator, model_validator

from utils.config_validation import require_in_open_interval

logger = logging.getLogger(__name__)

MuPolicy = Literal["multiplier", "frozen", "gradient", "newton"]


class EngineConfig(BaseModel):
    """Outer/inner loop settings of one engine run.

    Loaded from the engine section of a run configuration. Unknown keys are rejected and
    instances are frozen, so a run cannot change its own tolerances midway. The B2 and B3
    fields only matter when that criterion is selected.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    eps_pri: PositiveFloat = Field(default=1e-5, description="Primal feasibility tolerance on ‖C‖∞")
    eps_dual: PositiveFloat = Field(default=1e-5, description="Dual residual tolerance on ‖D‖∞")
    criterion: Literal["B1", "B2", "B3", "B4"] = Field(default="B1", description="Inner-to-outer transition rule")

    eps_dual_initial: PositiveFloat = Field(default=1e-2, description="ε⁰ of the decaying B2 schedule")
    eps_dual_decay: float = Field(default=0.5, description="θ of the decaying B2 schedule, in (0, 1)")

    vmax_initial: PositiveInt = Field(default=1, description="v₀ of the growing B3 sweep cap")
    vmax_growth: float = Field(default=2.0, ge=1.0, description="γ_v of the growing B3 sweep cap")
    vmax_cap: PositiveInt = Field(default=1000, description="Upper bound of the B3 sweep cap")
    vmax: PositiveInt = Field(default=1, description="Fixed sweep cap for B4")

    rho_initial: PositiveFloat = Field(default=1.0, description="Initial penalty on every edge")
    rho_schedule: Literal["constant", "geometric"] = "constant"
    rho_growth: float = Field(default=2.0, gt=1.0, description="γ_ρ of the geometric schedule")
    rho_max: PositiveFloat = Field(default=1e6, description="Cap of the geometric schedule")

    max_outer: PositiveInt = Field(default=1000, description="Outer-loop limit")
    max_total_inner: PositiveInt = Field(default=1000, description="Budget of cumulative inner sweeps")

    mu_policy: MuPolicy = Field(default="multiplier", description="How client multipliers evolve")
    final_sweep_full_cycle: bool = Field(
        default=True, description="Run a full-cycle sweep before any multiplier update"
    )

    @field_validator("eps_dual_decay")
    @classmethod
    def _decay_in_unit_interval(cls, v: float) -> float:
        return require_in_open_interval(v, 0.0, 1.0, "eps_dual_decay")

    @model_validator(mode="after")
    def _check_schedules(self):
        if self.criterion == "B2" and self.eps_dual_initial < self.eps_dual:
            raise ValueError("B2 needs eps_dual_initial >= eps_dual so that ε_dual^k >= ε_dual for all k")
        if self.rho_schedule == "geometric" and self.rho_max < self.rho_initial:
            raise ValueError("rho_max must be >= rho_initial")
        return self

    def eps_dual_at(self, k: int) -> float:
        """ε_dual^k = ε_dual + (ε⁰ − ε_dual)·θ^k."""
        return self.eps_dual + (self.eps_dual_initial - self.eps_dual) * self.eps_dual_decay**k

    def vmax_at(self, k: int) -> int:
        """v_max^k = min(v₀·⌈γ_v^k⌉, cap)."""
        return min(self.vmax_initial * math.ceil(self.vmax_growth**k), self.vmax_cap)

    def inner_tolerance(self, k: int) -> float:
        """Dual tolerance that ends the inner loop of outer iteration k."""
        return self.eps_dual_at(k) if self.criterion == "B2" else self.eps_dual

    def next_rho(self, rho: npt.ArrayLike) -> np.ndarray:
        """Penalty for the next outer loop, always a fresh array."""
        rho = np.asarray(rho, dtype=np.float64)
        if self.rho_schedule == "constant":
            return rho.copy()
        return np.minimum(rho * self.rho_growth, self.rho_max)

    def scale_penalties(self, rho: Mapping[Any, npt.ArrayLike]) -> dict[Any, np.ndarray]:
        """Apply next_rho to every penalty vector; warns once when the cap is first reached."""
        scaled = {}
        for key, value in rho.items():
            vec = self.next_rho(value)
            vec.flags.writeable = False
            scaled[key] = vec
        if self.rho_schedule == "geometric" and rho:
            before = max(float(np.max(r)) for r in rho.values())
            after = max(float(np.max(r)) for r in scaled.values())
            if before < self.rho_max <= after:
                logger.warning(f"Penalty reached its cap rho_max={self.rho_max:g}")
        return scaled
