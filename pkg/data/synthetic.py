"""Seeded synthetic stand-ins for the real datasets."""

import numpy as np
from sklearn.datasets import make_classification, make_regression

from data.loaders import DatasetTable, TaskKind


def linear_regression_table(
    samples: int = 300, features: int = 5, noise: float = 0.1, seed: int | None = 0
) -> DatasetTable:
    x, y = make_regression(n_samples=samples, n_features=features, noise=noise, random_state=seed)
    return DatasetTable(x, y, TaskKind.REGRESSION, "synthetic-regression")


def two_class_table(
    samples: int = 400, features: int = 10, separation: float = 1.5, seed: int | None = 0
) -> DatasetTable:
    informative = max(2, features // 2)
    x, y = make_classification(
        n_samples=samples,
        n_features=features,
        n_informative=informative,
        n_redundant=0,
        class_sep=separation,
        random_state=seed,
    )
    return DatasetTable(x, np.where(y == 1, 1.0, -1.0), TaskKind.BINARY, "synthetic-two-class")
