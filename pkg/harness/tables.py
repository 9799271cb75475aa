"""Regression parity (Table 1) and accuracy grid (Table 2) reproduction helpers."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field

from data.loaders import DatasetTable
from harness.metrics import aggregate_runs, compute_metrics
from harness.schemas import MetricsRecord, RunSpec
from models.errors import DataFormatError

logger = logging.getLogger(__name__)

TABLE2_COLUMNS = ["algorithm", "n", "lambda", "iters", "mean_acc", "std_acc_permyriad"]
TABLE1_COLUMNS = ["dataset", "aio_mse", "dald_mse", "aio_r2", "dald_r2", "relative_gap", "status"]
TABLE2_ALGORITHMS = ("fedprox", "dald-cc", "dald-dc")


@dataclass(frozen=True)
class RegressionDataset:
    name: str
    file: str
    header: bool = True
    target_column: int = -1
    reference_mse: float | None = None
    reference_r2: float | None = None


TABLE1_DATASETS = (
    RegressionDataset("Diabetes", "diabetes.csv", reference_mse=2859.6963, reference_r2=0.5177),
    RegressionDataset("California Housing", "california_housing.csv", reference_mse=0.5243, reference_r2=0.6062),
    RegressionDataset("Wine Quality", "wine_quality.csv", reference_mse=0.5398, reference_r2=0.2921),
    RegressionDataset("Abalone", "abalone.csv", reference_mse=4.8027, reference_r2=0.5379),
    RegressionDataset("Combined Cycle Power Plant", "ccpp.csv", reference_mse=20.7674, reference_r2=0.9287),
)


class Table1Row(BaseModel):
    dataset: str
    aio_mse: float
    dald_mse: float
    aio_r2: float | None
    dald_r2: float | None
    relative_gap: float = Field(description="(dald_mse - aio_mse) / aio_mse")
    status: str


class Table2Row(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    algorithm: str
    n: int = Field(ge=1)
    lam: float = Field(alias="lambda", ge=0.0)
    iters: int = Field(ge=1)
    mean_acc: float = Field(ge=0.0, le=100.0)
    std_acc_permyriad: float = Field(ge=0.0)


def aio_baseline(table: DatasetTable) -> np.ndarray:
    """All-in-one least squares over the whole table."""
    solution, *_ = scipy.linalg.lstsq(table.features, table.targets)
    return solution


def table1_spec(dataset: RegressionDataset, budget: int = 1000) -> RunSpec:
    """Chain of three clients solved top-down, one sweep per multiplier update."""
    return RunSpec.model_validate(
        {
            "dataset": {
                "kind": "csv",
                "path": dataset.file,
                "header": dataset.header,
                "target_column": dataset.target_column,
                "standardize": True,
                "bias": True,
            },
            "partition": {"scheme": "iid", "clients": 3},
            "topology": {"kind": "chain"},
            "engine": {"criterion": "B4", "vmax": 1, "eps_pri": 1e-5, "eps_dual": 1e-5, "max_outer": budget},
            "solver": {"kind": "exact-descent"},
            "run": {"algorithm": "dald-dc", "budget": budget, "label": dataset.name},
        }
    )


def table1_row(name: str, table: DatasetTable, record: MetricsRecord) -> Table1Row:
    aio = compute_metrics(aio_baseline(table), table)
    gap = (record.mse - aio.mse) / aio.mse if aio.mse else 0.0
    logger.info(f"{name}: AIO mse={aio.mse:.4f} r2={aio.r2}, DALD mse={record.mse:.4f} r2={record.r2}, gap={gap:.2e}")
    return Table1Row(
        dataset=name,
        aio_mse=aio.mse,
        dald_mse=record.mse,
        aio_r2=aio.r2,
        dald_r2=record.r2,
        relative_gap=gap,
        status=record.status,
    )


def write_table1_csv(rows: Sequence[Table1Row], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([r.model_dump() for r in rows], columns=TABLE1_COLUMNS).to_csv(path, index=False)
    return path


def table2_spec(base: RunSpec, algorithm: str, n: int, lam: float, budget: int) -> RunSpec:
    """One grid cell: the base spec with algorithm, client count, λ and budget replaced."""
    raw = base.model_dump(mode="json")
    raw["run"].update(algorithm=algorithm, budget=budget)
    raw["partition"]["clients"] = n
    raw["objective"]["l1_weight"] = lam
    raw["topology"]["kind"] = "chain" if algorithm == "dald-dc" else "centralized"
    return RunSpec.model_validate(raw)


def table2_grid(
    base: RunSpec, n_list: Iterable[int], lambda_list: Iterable[float], budget_list: Iterable[int]
) -> list[RunSpec]:
    return [
        table2_spec(base, algorithm, n, lam, budget)
        for n in n_list
        for lam in lambda_list
        for budget in budget_list
        for algorithm in TABLE2_ALGORITHMS
    ]


def table2_rows(records: Iterable[MetricsRecord]) -> list[Table2Row]:
    """Aggregate seeded runs per (algorithm, n, λ, budget) cell, keeping first-seen cell order."""
    cells: dict[tuple, list[MetricsRecord]] = {}
    for r in records:
        cells.setdefault((r.algorithm, r.n, r.l1_weight, r.budget), []).append(r)
    rows = []
    for (algorithm, n, lam, budget), group in cells.items():
        mean, std = aggregate_runs(group)
        rows.append(Table2Row(algorithm=algorithm, n=n, lam=lam, iters=budget, mean_acc=mean, std_acc_permyriad=std))
    return rows


def write_table2_csv(rows: Sequence[Table2Row], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([r.model_dump(by_alias=True) for r in rows], columns=TABLE2_COLUMNS)
    frame.to_csv(path, index=False)
    return path


def read_table2_csv(path: str | Path) -> list[Table2Row]:
    frame = pd.read_csv(path)
    if list(frame.columns) != TABLE2_COLUMNS:
        raise DataFormatError(f"{path}: expected header {','.join(TABLE2_COLUMNS)}, got {','.join(frame.columns)}")
    return [Table2Row.model_validate(row) for row in frame.to_dict(orient="records")]
