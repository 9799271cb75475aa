"""Assignment of samples to clients: the even IID split and the stratified stride split."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd

from data.loaders import DatasetTable
from models.errors import DataFormatError, PartitionError

logger = logging.getLogger(__name__)

UNASSIGNED = -1


@dataclass(frozen=True, eq=False)
class Partition:
    """assignment[i] is the client holding sample i, or -1 when the sample was dropped."""

    assignment: npt.NDArray[np.int64]
    n: int

    def __post_init__(self):
        assignment = np.array(self.assignment, dtype=np.int64).reshape(-1)
        if self.n < 1:
            raise PartitionError(f"client count must be >= 1, got {self.n}")
        if np.any((assignment < UNASSIGNED) | (assignment >= self.n)):
            raise PartitionError("assignment refers to a client outside 0..n-1")
        counts = np.bincount(assignment[assignment >= 0], minlength=self.n)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            raise PartitionError(f"clients {empty.tolist()} received no samples")
        assignment.flags.writeable = False
        object.__setattr__(self, "assignment", assignment)

    @property
    def counts(self) -> list[int]:
        return np.bincount(self.assignment[self.assignment >= 0], minlength=self.n).tolist()

    @property
    def global_count(self) -> int:
        return int(np.sum(self.assignment >= 0))

    @property
    def dropped(self) -> int:
        return int(np.sum(self.assignment == UNASSIGNED))

    def client_indices(self, client: int) -> npt.NDArray[np.int64]:
        return np.flatnonzero(self.assignment == client)


def partition_iid_even(table_or_count: DatasetTable | int, n: int, seed: int | None = None) -> Partition:
    """Seeded shuffle, then contiguous chunks; the remainder goes to the lowest ids."""
    total = table_or_count if isinstance(table_or_count, int) else len(table_or_count)
    if n < 1:
        raise PartitionError(f"client count must be >= 1, got {n}")
    if total < n:
        raise PartitionError(f"cannot split {total} samples across {n} clients")
    order = np.random.default_rng(seed).permutation(total)
    assignment = np.empty(total, dtype=np.int64)
    for client, chunk in enumerate(np.array_split(order, n)):
        assignment[chunk] = client
    return Partition(assignment, n)


def partition_stratified_strides(
    class_a: npt.ArrayLike,
    class_b: npt.ArrayLike,
    n: int,
    *,
    total: int | None = None,
    seed: int | None = None,
) -> Partition:
    """Non-IID split with a 4:1 class ratio on even clients and 1:4 on odd ones.

    Client i takes the majority class at positions i, i+n, i+2n, ... and the
    minority class at positions i, i+4n, i+8n, ... of the class lists. With a
    seed the class lists are shuffled first. Samples no stride reaches are left
    unassigned.
    """
    a = np.array(class_a, dtype=np.int64).reshape(-1)
    b = np.array(class_b, dtype=np.int64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise PartitionError("both class index lists must be nonempty")
    if n < 2:
        raise PartitionError(f"stratified split needs n >= 2, got {n}")
    if seed is not None:
        rng = np.random.default_rng(seed)
        a = rng.permutation(a)
        b = rng.permutation(b)
    total = int(max(a.max(), b.max())) + 1 if total is None else total
    assignment = np.full(total, UNASSIGNED, dtype=np.int64)

    for client in range(n):
        major, minor = (a, b) if client % 2 == 0 else (b, a)
        picked = np.concatenate([major[client::n], minor[client :: 4 * n]])
        if picked.size == 0:
            raise PartitionError(f"client {client} receives no samples of either class")
        if np.any(assignment[picked] != UNASSIGNED):
            raise PartitionError("class index lists overlap")
        assignment[picked] = client

    dropped = a.size + b.size - int(np.sum(assignment >= 0))
    if dropped:
        logger.warning(f"Stratified split left {dropped} samples unassigned")
    return Partition(assignment, n)


def class_indices(table: DatasetTable) -> tuple[np.ndarray, np.ndarray]:
    """Indices of the +1 and −1 samples of a binary table."""
    return np.flatnonzero(table.targets > 0), np.flatnonzero(table.targets < 0)


def export_partition(partition: Partition, path: str | Path) -> Path:
    """Write one "index,client_id" line per assigned sample."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    indices = np.flatnonzero(partition.assignment >= 0)
    frame = pd.DataFrame({"index": indices, "client_id": partition.assignment[indices]})
    frame.to_csv(path, index=False)
    return path


def read_partition(path: str | Path, total: int | None = None) -> Partition:
    frame = pd.read_csv(path)
    if list(frame.columns) != ["index", "client_id"]:
        raise DataFormatError(f"{path}: expected header index,client_id, got {list(frame.columns)}")
    if frame.empty:
        raise DataFormatError(f"{path} lists no samples")
    if frame["index"].duplicated().any():
        raise PartitionError(f"{path} assigns a sample more than once")
    size = int(frame["index"].max()) + 1 if total is None else total
    assignment = np.full(size, UNASSIGNED, dtype=np.int64)
    assignment[frame["index"].to_numpy()] = frame["client_id"].to_numpy()
    return Partition(assignment, int(frame["client_id"].max()) + 1)
