from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveInt, model_validator

from engine.config import EngineConfig
from models.objectives import ObjectiveKind
from recoveries.presets import PresetKind
from solvers.local import SolverSpec

Algorithm = Literal[
    "fedprox", "dald-cc", "dald-dc",
    "PA", "GD", "NM", "MBGD", "SGD", "FedProx", "FedAvg", "LocalGD", "DGD", "BCGD", "PG",
]
SERVER_ALGORITHMS = ("fedprox", "dald-cc")
PRESET_ALGORITHMS = tuple(kind.value for kind in PresetKind)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DatasetSection(_Section):
    kind: Literal["csv", "mnist", "synthetic-regression", "synthetic-classification"] = "synthetic-regression"
    path: str | None = Field(default=None, description="CSV file, relative to the data directory unless absolute")
    images: str = "train-images-idx3-ubyte"
    labels: str = "train-labels-idx1-ubyte"
    task: Literal["regression", "binary"] = "regression"
    header: bool = False
    target_column: int = -1
    remap_binary: bool = False
    standardize: bool = True
    bias: bool = True
    samples: PositiveInt = 300
    features: PositiveInt = 5
    noise: NonNegativeFloat = 0.1
    separation: float = 1.5
    subset: PositiveInt | None = Field(default=None, description="Keep only the first N samples")
    seed: int = Field(default=0, description="Generator seed for the synthetic datasets")

    @model_validator(mode="after")
    def _csv_needs_path(self):
        if self.kind == "csv" and not self.path:
            raise ValueError("dataset.path is required for csv datasets")
        return self

    @property
    def is_binary(self) -> bool:
        return self.kind in ("mnist", "synthetic-classification") or (self.kind == "csv" and self.task == "binary")


class PartitionSection(_Section):
    scheme: Literal["iid", "stratified"] = "iid"
    clients: PositiveInt = 3


class TopologySection(_Section):
    kind: Literal["centralized", "chain", "star", "matrix"] = "centralized"
    matrix_file: str | None = None
    coordination: Literal["full", "partial-random", "partial-greedy", "selective-repetitive"] = "full"
    per_sweep: PositiveInt = 1
    repeats: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _matrix_needs_file(self):
        if self.kind == "matrix" and not self.matrix_file:
            raise ValueError("topology.matrix_file is required for matrix topologies")
        return self


class ObjectiveSection(_Section):
    kind: ObjectiveKind = ObjectiveKind.LEAST_SQUARES
    l1_weight: NonNegativeFloat = 0.0


class RunSection(_Section):
    algorithm: Algorithm = "dald-cc"
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    budget: PositiveInt | None = Field(
        default=None, description="Cumulative inner sweeps; overrides engine.max_total_inner"
    )
    dropout: dict[int, list[int]] = Field(default_factory=dict, description="Sweep index → clients leaving before it")
    trailing_fraction: float = Field(default=0.1, gt=0.0, le=1.0)
    label: str | None = None


class RunSpec(_Section):
    dataset: DatasetSection = Field(default_factory=DatasetSection)
    partition: PartitionSection = Field(default_factory=PartitionSection)
    topology: TopologySection = Field(default_factory=TopologySection)
    objective: ObjectiveSection = Field(default_factory=ObjectiveSection)
    engine: EngineConfig = Field(default_factory=EngineConfig)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    run: RunSection = Field(default_factory=RunSection)

    @model_validator(mode="after")
    def _check_consistency(self):
        algorithm = self.run.algorithm
        if algorithm in SERVER_ALGORITHMS and self.topology.kind != "centralized":
            raise ValueError(f"{algorithm} runs on a centralized topology, got {self.topology.kind}")
        if algorithm == "dald-dc" and self.topology.kind == "centralized":
            raise ValueError("dald-dc needs a chain, star or matrix topology")
        if self.partition.scheme == "stratified" and not self.dataset.is_binary:
            raise ValueError("the stratified partition needs a binary dataset")
        if self.objective.kind is ObjectiveKind.LOGISTIC_L1 and not self.dataset.is_binary:
            raise ValueError("logistic-l1 objectives need a binary dataset")
        if any(step < 1 for step in self.run.dropout):
            raise ValueError("dropout sweep indices are 1-based")
        return self

    @property
    def budget(self) -> int:
        return self.run.budget or self.engine.max_total_inner

    def engine_config(self) -> EngineConfig:
        update = {"max_total_inner": self.budget}
        if self.run.algorithm == "fedprox":
            update["mu_policy"] = "frozen"
        return self.engine.model_copy(update=update)


class MetricsRecord(BaseModel):
    algorithm: str
    label: str | None = None
    n: int
    l1_weight: float
    budget: int
    seed: int
    status: str
    mse: float | None = None
    r2: float | None = None
    r2_defined: bool = True
    accuracy_percent: float | None = Field(default=None, ge=0.0, le=100.0)
    accuracy_std_per_tenthousand: float | None = Field(
        default=None, description="Std of the trailing sweep accuracies within this run, in ‱"
    )
    trailing_accuracy_percent: float | None = None
    primal_inf: float
    dual_inf: float
    sweeps: int
    outer_loops: int
    wall_time_s: float
    evaluation: str = "training"

    @model_validator(mode="after")
    def _r2_bounded(self):
        if self.r2 is not None and self.r2 > 1.0 + 1e-12:
            raise ValueError(f"r2 cannot exceed 1, got {self.r2}")
        return self
