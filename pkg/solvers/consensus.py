from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from models.core import ParamBlock, as_block
from models.errors import DimensionError, ParameterError


def server_consensus(
    x: Sequence[npt.ArrayLike],
    mu: Sequence[npt.ArrayLike],
    rho: Sequence[npt.ArrayLike],
    weights: Sequence[float] | None = None,
) -> ParamBlock:
    """Closed-form minimizer of the server subproblem in x̂.

    x̂ = (Σ ρ_i∘ρ_i∘x_i − ½ Σ μ_i) ⊘ Σ ρ_i∘ρ_i. With explicit weights p_i the
    penalty average is replaced by Σ p_i x_i, which is the general form when
    ρ_i∘ρ_i ∝ p_i and the μ = 0 weighted average otherwise.
    """
    if not x:
        raise DimensionError("server consensus needs at least one client block")
    if not (len(x) == len(mu) == len(rho)):
        raise DimensionError(f"{len(x)} blocks, {len(mu)} multipliers and {len(rho)} penalties")
    blocks = np.vstack([np.asarray(v, dtype=np.float64) for v in x])
    mus = np.vstack([np.asarray(v, dtype=np.float64) for v in mu])
    rhos = np.vstack([np.asarray(v, dtype=np.float64) for v in rho])
    if not (blocks.shape == mus.shape == rhos.shape):
        raise DimensionError(f"mismatched shapes {blocks.shape}, {mus.shape}, {rhos.shape}")
    if np.any(rhos <= 0):
        raise ParameterError("penalty vectors must be strictly positive")

    squared = rhos * rhos
    total = squared.sum(axis=0)
    correction = 0.5 * mus.sum(axis=0) / total

    if weights is None:
        return as_block((squared * blocks).sum(axis=0) / total - correction, copy=False)

    p = np.asarray(weights, dtype=np.float64)
    if p.shape != (blocks.shape[0],):
        raise DimensionError(f"{p.shape[0]} weights for {blocks.shape[0]} blocks")
    if np.any(p <= 0):
        raise ParameterError("consensus weights must be positive")
    if abs(float(p.sum()) - 1.0) > 1e-12:
        raise ParameterError(f"consensus weights must sum to 1, got {p.sum()!r}")
    return as_block(p @ blocks - correction, copy=False)
