from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from sklearn.preprocessing import StandardScaler

from data.loaders import DatasetTable
from models.errors import DataFormatError


@dataclass(frozen=True, eq=False)
class Standardization:
    """Per-feature mean and population std; constant features carry std 1."""

    mean: npt.NDArray[np.float64]
    scale: npt.NDArray[np.float64]

    def apply(self, table: DatasetTable) -> DatasetTable:
        if table.feature_count != self.mean.shape[0]:
            raise DataFormatError(f"table has {table.feature_count} features, transform expects {self.mean.shape[0]}")
        return DatasetTable((table.features - self.mean) / self.scale, table.targets, table.task, table.name)


def standardize(table: DatasetTable) -> tuple[DatasetTable, Standardization]:
    if len(table) < 2:
        raise DataFormatError("standardization needs at least 2 samples")
    # StandardScaler uses the population std and maps zero-variance features to scale 1
    scaler = StandardScaler().fit(table.features)
    params = Standardization(mean=scaler.mean_.copy(), scale=scaler.scale_.copy())
    return params.apply(table), params


def add_bias(table: DatasetTable) -> DatasetTable:
    """Append a constant-one intercept column."""
    ones = np.ones((len(table), 1))
    return DatasetTable(np.hstack([table.features, ones]), table.targets, table.task, table.name)
