"""Dataset ingestion: numeric CSV exports and MNIST IDX files."""

from __future__ import annotations

import gzip
import logging
from dataclasses import dataclass
from utils.compat import StrEnum
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd

from models.errors import DataFormatError

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
MNIST_3V7_TRAIN_COUNT = 12396


class TaskKind(StrEnum):
    REGRESSION = "regression"
    BINARY = "binary"


@dataclass(frozen=True, eq=False)
class DatasetTable:
    features: npt.NDArray[np.float64]
    targets: npt.NDArray[np.float64]
    task: TaskKind
    name: str = ""

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64, ndmin=2)
        targets = np.array(self.targets, dtype=np.float64).reshape(-1)
        if features.shape[0] != targets.shape[0]:
            raise DataFormatError(f"{features.shape[0]} feature rows but {targets.shape[0]} targets")
        task = TaskKind(self.task)
        if task is TaskKind.BINARY and not np.all(np.isin(targets, (-1.0, 1.0))):
            raise DataFormatError("binary targets must be −1/+1")
        features.flags.writeable = False
        targets.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "task", task)

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]

    def subset(self, indices: npt.ArrayLike) -> DatasetTable:
        indices = np.asarray(indices, dtype=np.int64)
        return DatasetTable(self.features[indices], self.targets[indices], self.task, self.name)


def load_csv(
    path: str | Path,
    task: TaskKind | str = TaskKind.REGRESSION,
    *,
    target_column: int = -1,
    header: bool = False,
    remap_binary: bool = False,
    name: str | None = None,
) -> DatasetTable:
    """Read a numeric CSV; the target is the last column unless target_column says otherwise.

    remap_binary maps 0/1 labels to −1/+1.
    """
    path = Path(path)
    task = TaskKind(task)
    try:
        frame = pd.read_csv(path, header=0 if header else None, dtype=str, skip_blank_lines=True)
    except pd.errors.EmptyDataError as exc:
        raise DataFormatError(f"{path} is empty") from exc
    except pd.errors.ParserError as exc:
        raise DataFormatError(f"{path} has ragged rows: {exc}") from exc
    if frame.empty or frame.shape[1] < 2:
        raise DataFormatError(f"{path} needs at least one feature column and one target column")

    first_row = 2 if header else 1
    numeric = frame.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    bad = numeric.isna().to_numpy()
    if bad.any():
        row, col = (int(v) for v in np.argwhere(bad)[0])
        cell = frame.iat[row, col]
        reason = "missing value" if pd.isna(cell) else f"non-numeric cell {cell!r}"
        raise DataFormatError(f"{path}: {reason}", row=row + first_row, column=col + 1)

    values = numeric.to_numpy(dtype=np.float64)
    target_idx = target_column % values.shape[1]
    targets = values[:, target_idx]
    features = np.delete(values, target_idx, axis=1)
    if task is TaskKind.BINARY:
        if remap_binary:
            targets = np.where(targets > 0, 1.0, -1.0)
        elif not np.all(np.isin(targets, (-1.0, 1.0))):
            raise DataFormatError(f"{path}: binary targets must be −1/+1 (set remap_binary for 0/1 labels)")
    table = DatasetTable(features, targets, task, name or path.stem)
    logger.info(f"Loaded {len(table)} samples with {table.feature_count} features from {path}")
    return table


def _read_bytes(path: Path) -> bytes:
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def _read_idx(path: Path, magic: int, dims: int) -> np.ndarray:
    raw = _read_bytes(path)
    header_len = 4 * (1 + dims)
    if len(raw) < header_len:
        raise DataFormatError(f"{path} is truncated: header needs {header_len} bytes")
    header = np.frombuffer(raw[:header_len], dtype=">i4")
    if int(header[0]) != magic:
        raise DataFormatError(f"{path} has magic {int(header[0])}, expected {magic}")
    shape = tuple(int(v) for v in header[1:])
    expected = int(np.prod(shape))
    body = np.frombuffer(raw[header_len:], dtype=np.uint8)
    if body.size < expected:
        raise DataFormatError(f"{path} is truncated: {body.size} of {expected} data bytes present")
    return body[:expected].reshape(shape)


def load_mnist_3v7(image_file: str | Path, label_file: str | Path) -> DatasetTable:
    """Digits 3 (+1) and 7 (−1) from IDX files, pixels scaled to [0, 1]."""
    images = _read_idx(Path(image_file), IMAGE_MAGIC, 3)
    labels = _read_idx(Path(label_file), LABEL_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    if labels.size and int(labels.max()) > 9:
        row = int(np.argmax(labels > 9))
        raise DataFormatError(f"label {int(labels[row])} outside 0-9", row=row + 1)

    keep = np.isin(labels, (3, 7))
    if not keep.any():
        raise DataFormatError("no digits 3 or 7 in the label file")
    features = images[keep].reshape(int(keep.sum()), -1).astype(np.float64) / 255.0
    targets = np.where(labels[keep] == 3, 1.0, -1.0)
    if features.shape[0] != MNIST_3V7_TRAIN_COUNT:
        logger.warning(
            f"MNIST 3-vs-7 table has {features.shape[0]} samples, the canonical training files give "
            f"{MNIST_3V7_TRAIN_COUNT}"
        )
    logger.info(f"Loaded {features.shape[0]} MNIST 3/7 samples ({int((targets > 0).sum())} threes)")
    return DatasetTable(features, targets, TaskKind.BINARY, "mnist-3v7")
