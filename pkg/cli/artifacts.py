"""Run artifacts on disk and their round-trip validation."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from pydantic import TypeAdapter, ValidationError

from data.partition import read_partition
from engine.state import TraceRecord
from harness.schemas import MetricsRecord
from harness.tables import read_table2_csv
from models.errors import DaldError

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.json"
TRACE_FILE = "trace.log"
PARTITION_FILE = "partition.csv"
TABLE_FILE = "table.csv"

_records = TypeAdapter(list[MetricsRecord])


def write_metrics(records: list[MetricsRecord], out_dir: str | Path) -> Path:
    path = Path(out_dir) / METRICS_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_records.dump_json(records, indent=2).decode("utf-8"), encoding="utf-8")
    return path


def read_metrics(path: str | Path) -> list[MetricsRecord]:
    return _records.validate_json(Path(path).read_bytes())


def read_trace(path: str | Path) -> list[TraceRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            records.append(TraceRecord.model_validate_json(line))
    return records


@dataclass
class ArtifactReport:
    checked: list[str] = field(default_factory=list)
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return bool(self.checked) and not self.problems


def validate_artifacts(out_dir: str | Path) -> ArtifactReport:
    """Re-read every known artifact present in out_dir against its schema."""
    out_dir = Path(out_dir)
    report = ArtifactReport()
    readers = {
        METRICS_FILE: read_metrics,
        TRACE_FILE: read_trace,
        PARTITION_FILE: read_partition,
        TABLE_FILE: read_table2_csv,
    }
    for name, reader in readers.items():
        path = out_dir / name
        if not path.exists():
            continue
        try:
            reader(path)
        except (DaldError, ValidationError, ValueError, json.JSONDecodeError) as exc:
            report.problems.append(f"{name}: {exc}")
        else:
            report.checked.append(name)
    logger.info(f"Validated {len(report.checked)} artifact(s) in {out_dir}, {len(report.problems)} problem(s)")
    return report
