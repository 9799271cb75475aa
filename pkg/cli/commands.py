import logging
from collections.abc import Sequence
from pathlib import Path

from cli.artifacts import PARTITION_FILE, TABLE_FILE, TRACE_FILE, validate_artifacts, write_metrics
from cli.config_file import load_run_spec
from data.partition import export_partition
from engine.stopping import RunStatus
from harness.runner import load_table, run_experiment, run_seeds
from harness.schemas import RunSpec
from harness.tables import (
    TABLE1_DATASETS,
    table1_row,
    table1_spec,
    table2_grid,
    table2_rows,
    write_table1_csv,
    write_table2_csv,
)
from models.errors import ConfigError
from utils.logger import attach_trace_file, detach_trace_file

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

TABLE1_FILE = "table1.csv"


def _with_seed(spec: RunSpec, seed: int | None) -> RunSpec:
    if seed is None:
        return spec
    return spec.model_copy(update={"run": spec.run.model_copy(update={"seeds": [seed]})})


def cmd_run(
    config: str | None,
    overrides: Sequence[str],
    out_dir: Path,
    data_dir: Path,
    seed: int | None = None,
    max_workers: int | None = None,
) -> int:
    """Run every seed of one config and write metrics.json, trace.log and partition.csv."""
    spec = _with_seed(load_run_spec(config, list(overrides)), seed)
    handler = attach_trace_file(out_dir / TRACE_FILE)
    try:
        results = run_seeds(spec, data_dir=data_dir, max_workers=max_workers)
    finally:
        detach_trace_file(handler)

    write_metrics([r.record for r in results], out_dir)
    export_partition(results[0].partition, out_dir / PARTITION_FILE)
    for r in results:
        print(
            f"{r.record.algorithm} seed={r.record.seed}: status={r.record.status} sweeps={r.record.sweeps} "
            f"mse={r.record.mse} r2={r.record.r2} accuracy={r.record.accuracy_percent}"
        )
    if any(r.engine_result.status is not RunStatus.OPTIMAL for r in results):
        logger.warning(f"Run stopped without meeting the tolerances; artifacts written to {out_dir}")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_reproduce_table1(out_dir: Path, data_dir: Path, budget: int = 1000) -> int:
    """AIO baseline versus the DALD chain of three for every regression CSV present."""
    if not data_dir.is_dir():
        raise ConfigError(f"data directory not found: {data_dir}")

    rows, records = [], []
    handler = attach_trace_file(out_dir / TRACE_FILE)
    try:
        for dataset in TABLE1_DATASETS:
            if not (data_dir / dataset.file).is_file():
                logger.warning(f"Skipping {dataset.name}: {dataset.file} not found in {data_dir}")
                continue
            spec = table1_spec(dataset, budget)
            table = load_table(spec.dataset, data_dir)
            result = run_experiment(spec, data_dir=data_dir, table=table)
            records.append(result.record)
            rows.append(table1_row(dataset.name, table, result.record))
    finally:
        detach_trace_file(handler)

    if not rows:
        raise ConfigError(f"none of the regression datasets were found in {data_dir}")
    write_metrics(records, out_dir)
    write_table1_csv(rows, out_dir / TABLE1_FILE)
    print(f"{'dataset':<28}{'AIO MSE':>14}{'DALD MSE':>14}{'AIO R2':>10}{'DALD R2':>10}{'gap':>11}")
    for row in rows:
        print(
            f"{row.dataset:<28}{row.aio_mse:>14.4f}{row.dald_mse:>14.4f}{row.aio_r2 or float('nan'):>10.4f}"
            f"{row.dald_r2 or float('nan'):>10.4f}{row.relative_gap:>11.2e}"
        )
    return EXIT_OK


def cmd_reproduce_table2(
    config: str | None,
    overrides: Sequence[str],
    out_dir: Path,
    data_dir: Path,
    n_list: Sequence[int],
    lambda_list: Sequence[float],
    budget_list: Sequence[int],
    seeds: Sequence[int] | None = None,
    max_workers: int | None = None,
) -> int:
    """Accuracy grid over algorithm × n × λ × budget, aggregated over seeds into table.csv."""
    base = load_run_spec(config, list(overrides))
    if base.dataset.kind == "mnist":
        missing = [name for name in (base.dataset.images, base.dataset.labels) if not (data_dir / name).exists()]
        if missing:
            raise ConfigError(f"MNIST files missing from {data_dir}: {missing}")

    records = []
    handler = attach_trace_file(out_dir / TRACE_FILE)
    try:
        for spec in table2_grid(base, n_list, lambda_list, budget_list):
            results = run_seeds(spec, seeds=seeds, data_dir=data_dir, max_workers=max_workers)
            records.extend(r.record for r in results)
    finally:
        detach_trace_file(handler)

    rows = table2_rows(records)
    write_metrics(records, out_dir)
    write_table2_csv(rows, out_dir / TABLE_FILE)
    for row in rows:
        print(
            f"{row.algorithm:<10} n={row.n:<5} λ={row.lam:<8g} iters={row.iters:<5} "
            f"{row.mean_acc:.2f}% ± {row.std_acc_permyriad:.1f}‱"
        )
    return EXIT_OK


def cmd_validate(out_dir: Path) -> int:
    report = validate_artifacts(out_dir)
    for name in report.checked:
        print(f"ok       {name}")
    for problem in report.problems:
        print(f"invalid  {problem}")
    if not report.checked and not report.problems:
        print(f"no artifacts found in {out_dir}")
    return EXIT_OK if report.ok else EXIT_ERROR
