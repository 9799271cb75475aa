"""End-to-end simulated federation: dataset, partition, client objectives, engine run and metrics."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from data.loaders import DatasetTable, TaskKind, load_csv, load_mnist_3v7
from data.partition import Partition, class_indices, partition_iid_even, partition_stratified_strides
from data.preprocess import add_bias, standardize
from data.synthetic import linear_regression_table, two_class_table
from engine.base import ConsensusEngine, EngineResult
from engine.factory import EngineFactory
from engine.state import EngineState, TraceRecord
from harness.metrics import PER_TEN_THOUSAND, accuracy_percent, compute_metrics
from harness.schemas import PRESET_ALGORITHMS, DatasetSection, MetricsRecord, RunSpec, TopologySection
from models.errors import DaldError, ExperimentError, TopologyError
from models.objectives import LocalObjective
from recoveries.presets import build_preset
from recoveries.runner import build_engine
from topology.coordination import CoordinationSequence, make_scheduler, single_level
from topology.graph import ConsensusGraph, centralized_graph, chain_graph, star_graph
from topology.hierarchy import (
    chain_matrix,
    graph_from_matrix,
    levels_from_matrix,
    load_matrix,
    star_matrix,
    validate_matrix,
)
from utils.config import settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    record: MetricsRecord
    engine_result: EngineResult
    partition: Partition
    sweep_accuracies: list[float] = field(default_factory=list)

    @property
    def trace(self) -> list[TraceRecord]:
        return self.engine_result.trace


def _resolve(path: str, data_dir: Path) -> Path:
    candidate = Path(path)
    return candidate if candidate.is_absolute() else data_dir / candidate


def load_table(section: DatasetSection, data_dir: Path) -> DatasetTable:
    match section.kind:
        case "csv":
            table = load_csv(
                _resolve(section.path, data_dir),
                TaskKind(section.task),
                target_column=section.target_column,
                header=section.header,
                remap_binary=section.remap_binary,
            )
        case "mnist":
            table = load_mnist_3v7(_resolve(section.images, data_dir), _resolve(section.labels, data_dir))
        case "synthetic-regression":
            table = linear_regression_table(section.samples, section.features, section.noise, section.seed)
        case _:
            table = two_class_table(section.samples, section.features, section.separation, section.seed)

    if section.subset is not None and section.subset < len(table):
        table = table.subset(np.arange(section.subset))
    if section.standardize:
        table, _ = standardize(table)
    if section.bias:
        table = add_bias(table)
    return table


def build_partition(spec: RunSpec, table: DatasetTable, seed: int) -> Partition:
    n = spec.partition.clients
    if spec.partition.scheme == "stratified":
        positives, negatives = class_indices(table)
        return partition_stratified_strides(positives, negatives, n, total=len(table), seed=seed)
    return partition_iid_even(table, n, seed)


def client_objectives(spec: RunSpec, table: DatasetTable, partition: Partition) -> dict[int, LocalObjective]:
    """One objective per client; the logistic loss is normalized by the total assigned sample count."""
    objectives = {}
    for client in range(partition.n):
        local = table.subset(partition.client_indices(client))
        objectives[client] = LocalObjective(
            spec.objective.kind,
            local.features,
            local.targets,
            partition.global_count,
            spec.objective.l1_weight,
        )
    return objectives


def build_topology(section: TopologySection, n: int, data_dir: Path) -> tuple[ConsensusGraph, CoordinationSequence]:
    """Consensus graph and full-cycle solve order for the configured topology."""
    match section.kind:
        case "centralized":
            return centralized_graph(n), single_level(list(range(n)))
        case "chain":
            return chain_graph(n), levels_from_matrix(chain_matrix(n))
        case "star":
            return star_graph(n), levels_from_matrix(star_matrix(n))
        case _:
            matrix = load_matrix(_resolve(section.matrix_file, data_dir))
            validation = validate_matrix(matrix)
            if not validation.ok:
                details = "; ".join(v.message for v in validation.violations)
                raise TopologyError(f"invalid hierarchical matrix {section.matrix_file}: {details}")
            if matrix.n != n:
                raise TopologyError(f"matrix has {matrix.n} nodes but the partition has {n} clients")
            return graph_from_matrix(matrix), levels_from_matrix(matrix)


def build_run_engine(
    spec: RunSpec, objectives: dict[int, LocalObjective], seed: int, data_dir: Path, max_workers: int
) -> ConsensusEngine:
    n = len(objectives)
    if spec.run.algorithm in PRESET_ALGORITHMS:
        preset = build_preset(
            spec.run.algorithm,
            n,
            spec.solver.step,
            spec.objective.l1_weight,
            passes=spec.solver.passes,
            seed=seed,
            steps=spec.budget,
            batch=spec.topology.per_sweep if spec.run.algorithm == "MBGD" and spec.topology.per_sweep > 1 else None,
        )
        engine = build_engine(preset, [objectives[c] for c in range(n)])
        engine.max_workers = max_workers
        return engine

    graph, base = build_topology(spec.topology, n, data_dir)
    # a star carries a coordinator hub without local data
    members = {c: objectives.get(c) for c in graph.clients}
    scheduler = make_scheduler(
        spec.topology.coordination,
        base,
        per_sweep=spec.topology.per_sweep,
        seed=seed,
        repeats=spec.topology.repeats,
    )
    return EngineFactory.create(
        graph.mode,
        members,
        graph,
        spec.engine_config(),
        spec.solver,
        scheduler=scheduler,
        max_workers=max_workers,
    )


def _trailing_stats(accuracies: Sequence[float], fraction: float) -> tuple[float | None, float | None]:
    if not accuracies:
        return None, None
    window = np.asarray(accuracies[-max(1, math.ceil(fraction * len(accuracies))) :]) / 100.0
    std = float(np.std(window, ddof=1)) * PER_TEN_THOUSAND if window.size > 1 else 0.0
    return float(np.mean(window)) * 100.0, std


def run_experiment(
    spec: RunSpec,
    *,
    seed: int | None = None,
    data_dir: str | Path | None = None,
    max_workers: int | None = None,
    table: DatasetTable | None = None,
) -> ExperimentResult:
    """Run one seeded experiment and evaluate the final model on the full table.

    The evaluation model is x̂ for centralized runs and the mean of the client
    blocks for decentralized ones.
    """
    seed = spec.run.seeds[0] if seed is None else seed
    data_dir = Path(data_dir) if data_dir is not None else settings.DATA_DIR
    max_workers = max_workers or settings.MAX_WORKERS
    algorithm = spec.run.algorithm
    n = spec.partition.clients

    try:
        table = table if table is not None else load_table(spec.dataset, data_dir)
        partition = build_partition(spec, table, seed)
        objectives = client_objectives(spec, table, partition)
        engine = build_run_engine(spec, objectives, seed, data_dir, max_workers)

        accuracies: list[float] = []

        def track_accuracy(state: EngineState, _record: TraceRecord) -> None:
            accuracies.append(accuracy_percent(state.model(), table))

        on_sweep = track_accuracy if table.task is TaskKind.BINARY else None
        logger.info(f"Running {algorithm} on {table.name}: n={n}, seed={seed}, budget={spec.budget}")
        started = time.perf_counter()
        result = engine.run(on_sweep=on_sweep, dropout=spec.run.dropout)
        wall_time = time.perf_counter() - started
        evaluation = compute_metrics(result.model, table)
    except DaldError as exc:
        raise ExperimentError(f"{type(exc).__name__}: {exc}", algorithm=algorithm, n=n, seed=seed) from exc

    trailing_mean, trailing_std = _trailing_stats(accuracies, spec.run.trailing_fraction)
    report = result.state.residuals
    record = MetricsRecord(
        algorithm=algorithm,
        label=spec.run.label,
        n=n,
        l1_weight=spec.objective.l1_weight,
        budget=spec.budget,
        seed=seed,
        status=str(result.status),
        mse=evaluation.mse,
        r2=evaluation.r2,
        r2_defined=evaluation.r2_defined,
        accuracy_percent=evaluation.accuracy_percent,
        accuracy_std_per_tenthousand=trailing_std,
        trailing_accuracy_percent=trailing_mean,
        primal_inf=report.primal_inf_norm,
        dual_inf=report.dual_inf_norm,
        sweeps=result.total_inner,
        outer_loops=result.outer_loops,
        wall_time_s=wall_time,
    )
    logger.info(
        f"{algorithm} seed={seed} finished with {record.status} after {record.sweeps} sweeps "
        f"(mse={record.mse}, accuracy={record.accuracy_percent})"
    )
    return ExperimentResult(record=record, engine_result=result, partition=partition, sweep_accuracies=accuracies)


def run_seeds(
    spec: RunSpec,
    *,
    seeds: Sequence[int] | None = None,
    data_dir: str | Path | None = None,
    max_workers: int | None = None,
) -> list[ExperimentResult]:
    """Run every seed of the spec, concurrently when more than one worker is allowed.

    The dataset is loaded once and shared read-only; each run owns its engine.
    Results come back in seed order.
    """
    seeds = list(seeds if seeds is not None else spec.run.seeds)
    data_dir = Path(data_dir) if data_dir is not None else settings.DATA_DIR
    workers = max_workers or settings.MAX_WORKERS
    table = load_table(spec.dataset, data_dir)

    def one(seed: int) -> ExperimentResult:
        return run_experiment(spec, seed=seed, data_dir=data_dir, max_workers=1, table=table)

    if workers <= 1 or len(seeds) == 1:
        return [one(seed) for seed in seeds]
    with ThreadPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
        return list(pool.map(one, seeds))
