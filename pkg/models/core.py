"""Dense float64 vector primitives and residual containers.

Parameter blocks are plain read-only ``numpy`` arrays; every helper returns a
fresh array so values can be shared between concurrent client solves.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from utils.compat import StrEnum

import numpy as np
import numpy.typing as npt

from models.errors import DimensionError, NonFiniteError, ParameterError

ParamBlock = npt.NDArray[np.float64]


class EdgeRole(StrEnum):
    MULTIPLIER = "multiplier"
    PENALTY = "penalty"
    PRIMAL_RESIDUAL = "primal-residual"
    DUAL_RESIDUAL = "dual-residual"


def as_block(values: npt.ArrayLike, *, copy: bool = True) -> ParamBlock:
    """Return values as a read-only 1-D float64 array."""
    arr = np.array(values, dtype=np.float64) if copy else np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


def check_finite(
    values: npt.ArrayLike, *, k: int | None = None, v: int | None = None, client: int | None = None
) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError("non-finite value in iterate", k=k, v=v, client=client)


def hadamard(a: npt.ArrayLike, b: npt.ArrayLike) -> ParamBlock:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return as_block(a * b, copy=False)


def inf_norm(a: npt.ArrayLike) -> float:
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        raise DimensionError("inf_norm of an empty vector")
    return float(np.max(np.abs(a)))


@dataclass(frozen=True)
class EdgeVector:
    values: ParamBlock
    role: EdgeRole

    def __post_init__(self):
        object.__setattr__(self, "values", as_block(self.values))
        object.__setattr__(self, "role", EdgeRole(self.role))
        if self.role is EdgeRole.PENALTY and not np.all(self.values > 0):
            raise ParameterError("penalty vectors must be strictly positive")

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ResidualReport:
    primal_inf_norm: float
    dual_inf_norm: float
    per_edge_primal: tuple[ParamBlock, ...] = field(default=(), repr=False)
    per_block_dual: tuple[ParamBlock, ...] = field(default=(), repr=False)


def _max_abs(vectors: Sequence[ParamBlock]) -> float:
    return max((float(np.max(np.abs(vec))) for vec in vectors if vec.size), default=0.0)


def assemble_residual_report(
    primal_edges: Iterable[npt.ArrayLike | EdgeVector], dual_blocks: Iterable[npt.ArrayLike]
) -> ResidualReport:
    primal = tuple(as_block(e.values if isinstance(e, EdgeVector) else e) for e in primal_edges)
    dual = tuple(as_block(d) for d in dual_blocks)
    lengths = {vec.shape[0] for vec in (*primal, *dual)}
    if len(lengths) > 1:
        raise DimensionError(f"mixed vector lengths in residual report: {sorted(lengths)}")
    return ResidualReport(
        primal_inf_norm=_max_abs(primal),
        dual_inf_norm=_max_abs(dual),
        per_edge_primal=primal,
        per_block_dual=dual,
    )
