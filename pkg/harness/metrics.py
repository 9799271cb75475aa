import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from sklearn.metrics import accuracy_score, mean_squared_error, r2_score

from data.loaders import DatasetTable, TaskKind
from harness.schemas import MetricsRecord
from models.errors import DimensionError, ParameterError

logger = logging.getLogger(__name__)

PER_TEN_THOUSAND = 1e4


@dataclass(frozen=True)
class Evaluation:
    mse: float | None = None
    r2: float | None = None
    r2_defined: bool = True
    accuracy_percent: float | None = None


def predict_labels(model: npt.ArrayLike, features: npt.ArrayLike) -> np.ndarray:
    """sign(aᵀx) with a zero margin counted as +1."""
    margins = np.asarray(features, dtype=np.float64) @ np.asarray(model, dtype=np.float64)
    return np.where(margins >= 0, 1.0, -1.0)


def accuracy_percent(model: npt.ArrayLike, test: DatasetTable) -> float:
    return 100.0 * float(accuracy_score(test.targets, predict_labels(model, test.features)))


def compute_metrics(model: npt.ArrayLike, test: DatasetTable) -> Evaluation:
    model = np.asarray(model, dtype=np.float64)
    if len(test) == 0:
        raise ParameterError("cannot evaluate on an empty table")
    if model.shape != (test.feature_count,):
        raise DimensionError(f"model length {model.shape} does not match {test.feature_count} features")

    if test.task is TaskKind.BINARY:
        return Evaluation(accuracy_percent=accuracy_percent(model, test))

    predictions = test.features @ model
    mse = float(mean_squared_error(test.targets, predictions))
    if np.ptp(test.targets) == 0:
        logger.warning("R² is undefined on a constant-target table")
        return Evaluation(mse=mse, r2=None, r2_defined=False)
    return Evaluation(mse=mse, r2=float(r2_score(test.targets, predictions)))


def aggregate_runs(records: Sequence[MetricsRecord]) -> tuple[float, float]:
    """Mean accuracy in % and the sample std of the accuracy fractions in ‱."""
    if not records:
        raise ParameterError("cannot aggregate an empty list of runs")
    accuracies = [r.accuracy_percent for r in records]
    if any(a is None for a in accuracies):
        raise ParameterError("every aggregated run needs an accuracy")
    fractions = np.asarray(accuracies, dtype=np.float64) / 100.0
    mean = float(np.mean(accuracies))
    if fractions.size == 1:
        logger.warning("Single run aggregated; std reported as 0")
        return mean, 0.0
    return mean, float(np.std(fractions, ddof=1)) * PER_TEN_THOUSAND
