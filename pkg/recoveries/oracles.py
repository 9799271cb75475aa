"""Textbook implementations of the classical methods, independent of the engine.

They share only the objective evaluations with the rest of the library and
serve as references for the preset equivalence tests.
"""

from collections.abc import Sequence

import numpy as np
import numpy.typing as npt

from models.errors import CapabilityError
from models.objectives import LocalObjective, ObjectiveKind, grad_smooth, hessian_smooth
from recoveries.presets import DEFAULT_MBGD_BATCH, PresetKind

MAX_DIM = 10
MAX_CLIENTS = 5
MAX_STEPS = 1000


def _shrink(values: np.ndarray, t: float) -> np.ndarray:
    out = np.zeros_like(values)
    above = values > t
    below = values < -t
    out[above] = values[above] - t
    out[below] = values[below] + t
    return out


def _prox_least_squares(obj: LocalObjective, anchor: np.ndarray, alpha: float) -> np.ndarray:
    """argmin ‖Ax − b‖² + ‖x − anchor‖²/(2α)."""
    if obj.kind is not ObjectiveKind.LEAST_SQUARES or obj.l1_weight > 0:
        raise CapabilityError("proximal oracles support smooth least-squares clients only")
    a, b = obj.features, obj.targets
    lhs = 2.0 * a.T @ a + np.eye(a.shape[1]) / alpha
    return np.linalg.solve(lhs, 2.0 * a.T @ b + anchor / alpha)


def _local_minimizer(obj: LocalObjective) -> np.ndarray:
    """argmin ‖Ax − b‖², the minimum-norm solution when AᵀA is singular."""
    if obj.kind is not ObjectiveKind.LEAST_SQUARES or obj.l1_weight > 0:
        raise CapabilityError("exact local oracles support smooth least-squares clients only")
    return np.linalg.lstsq(obj.features, obj.targets, rcond=None)[0]


def _blocks(xs: list[np.ndarray]) -> np.ndarray:
    return np.concatenate(xs)


def reference_iterates(
    kind: PresetKind | str,
    problem: Sequence[LocalObjective],
    x0: npt.ArrayLike,
    steps: int,
    *,
    alpha: float,
    lam: float = 0.0,
    seed: int | None = 0,
    passes: int = 1,
    alphas: Sequence[float] | None = None,
    batch: int | None = None,
) -> list[np.ndarray]:
    """Iterates x⁰, x¹, …, x^steps of the textbook method named by kind.

    Server methods return x̂ per step, DGD, BCGD and PG the concatenated client
    blocks. batch is the MBGD draw size and defaults to the preset default.
    """
    kind = PresetKind(kind)
    x0 = np.array(x0, dtype=np.float64)
    n = len(problem)
    if x0.shape[0] > MAX_DIM or n > MAX_CLIENTS or steps > MAX_STEPS:
        raise CapabilityError(f"oracles are limited to m<={MAX_DIM}, n<={MAX_CLIENTS}, steps<={MAX_STEPS}")

    if kind in (PresetKind.PA, PresetKind.GD, PresetKind.NM, PresetKind.PG):
        obj = problem[0]
        x = x0.copy()
        out = [x.copy()]
        for _ in range(steps):
            if kind is PresetKind.PA:
                x = _prox_least_squares(obj, x, alpha)
            elif kind is PresetKind.GD:
                x = x - alpha * grad_smooth(obj, x)
            elif kind is PresetKind.NM:
                x = x - np.linalg.solve(hessian_smooth(obj, x), grad_smooth(obj, x))
            else:
                x = _shrink(x - alpha * grad_smooth(obj, x), lam * alpha)
            out.append(x.copy())
        return out

    if kind in (PresetKind.MBGD, PresetKind.SGD):
        size = 1 if kind is PresetKind.SGD else (batch if batch is not None else min(DEFAULT_MBGD_BATCH, n))
        rng = np.random.default_rng(seed)
        x = x0.copy()
        out = [x.copy()]
        for _ in range(steps):
            drawn = sorted(int(i) for i in rng.choice(n, size=size, replace=False))
            x = x - alpha * np.mean([grad_smooth(problem[i], x) for i in drawn], axis=0)
            out.append(x.copy())
        return out

    if kind is PresetKind.FEDPROX:
        step_sizes = list(alphas) if alphas is not None else [alpha] * n
        beta = np.array([1.0 / (2.0 * a) for a in step_sizes])
        p = beta / beta.sum()
        x = x0.copy()
        out = [x.copy()]
        for _ in range(steps):
            local = [_prox_least_squares(obj, x, a) for obj, a in zip(problem, step_sizes, strict=True)]
            x = sum(pi * xi for pi, xi in zip(p, local, strict=True))
            out.append(x.copy())
        return out

    if kind is PresetKind.FEDAVG:
        # exact local minimization ignores the broadcast model
        average = np.mean([_local_minimizer(obj) for obj in problem], axis=0)
        return [x0.copy()] + [average.copy() for _ in range(steps)]

    if kind is PresetKind.LOCAL_GD:
        x = x0.copy()
        out = [x.copy()]
        for _ in range(steps):
            local = []
            for obj in problem:
                xi = x.copy()
                for _ in range(passes):
                    xi = xi - alpha * grad_smooth(obj, xi)
                local.append(xi)
            x = np.mean(local, axis=0)
            out.append(x.copy())
        return out

    if kind is PresetKind.DGD:
        xs = [x0.copy() for _ in range(n)]
        out = [_blocks(xs)]
        for _ in range(steps):
            mixed = np.mean(xs, axis=0)
            xs = [
                _shrink(mixed - alpha * grad_smooth(obj, xi), lam * alpha)
                for obj, xi in zip(problem, xs, strict=True)
            ]
            out.append(_blocks(xs))
        return out

    if kind is PresetKind.BCGD:
        # chain 0-1-...-(n-1), penalty weight 1/(2α) per edge, zero multipliers
        xs = [x0.copy() for _ in range(n)]
        out = [_blocks(xs)]
        w = 1.0 / (2.0 * alpha)
        for _ in range(steps):
            for s in range(n):
                grad = grad_smooth(problem[s], xs[s])
                if s + 1 < n:
                    grad = grad + 2.0 * w * (xs[s] - xs[s + 1])
                if s > 0:
                    grad = grad - 2.0 * w * (xs[s - 1] - xs[s])
                xs[s] = _shrink(xs[s] - alpha * grad, lam * alpha)
            out.append(_blocks(xs))
        return out

    raise CapabilityError(f"no reference oracle for {kind}")
