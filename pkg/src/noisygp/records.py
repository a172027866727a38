"""Run records and their CSV persistence."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

__all__ = ["RunRecord", "RECORD_FIELDS", "config_hash", "write_records", "read_records", "append_record"]


@dataclass(frozen=True)
class RunRecord:
    method: str
    dataset: str
    noise_level: float
    sample_id: int
    rep_index: int
    seed: int
    final_train_nrmse: float
    final_test_nrmse: float
    wall_time_s: float
    config_hash: str
    # per-generation best training fitness; kept in memory only
    trace: tuple = field(default=(), compare=False, repr=False)

    @property
    def key(self) -> tuple:
        return (self.method, self.dataset, self.noise_level, self.sample_id, self.rep_index)

    def without_timing(self) -> "RunRecord":
        """Copy with wall time zeroed, for reproducibility comparisons."""
        return RunRecord(**{**self.to_row(), "wall_time_s": 0.0})

    def to_row(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "trace"}

    @classmethod
    def from_row(cls, row: dict) -> "RunRecord":
        return cls(
            method=row["method"],
            dataset=row["dataset"],
            noise_level=float(row["noise_level"]),
            sample_id=int(row["sample_id"]),
            rep_index=int(row["rep_index"]),
            seed=int(row["seed"]),
            final_train_nrmse=float(row["final_train_nrmse"]),
            final_test_nrmse=float(row["final_test_nrmse"]),
            wall_time_s=float(row["wall_time_s"]),
            config_hash=row["config_hash"],
        )


RECORD_FIELDS = [f.name for f in fields(RunRecord) if f.name != "trace"]


def config_hash(method: str, config) -> str:
    """Short stable digest of an engine configuration."""
    payload = json.dumps({"method": method, **asdict(config)}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _format(value):
    # repr round-trips floats exactly
    return repr(value) if isinstance(value, float) else value


def append_record(path, record: RunRecord) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RECORD_FIELDS)
        if new:
            writer.writeheader()
        writer.writerow({k: _format(v) for k, v in record.to_row().items()})


def write_records(path, records) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RECORD_FIELDS)
        writer.writeheader()
        for record in records:
            writer.writerow({k: _format(v) for k, v in record.to_row().items()})


def read_records(path) -> list:
    path = Path(path)
    if path.is_dir():
        path = path / "records.csv"
    if not path.exists():
        return []
    with path.open(newline="") as fh:
        return [RunRecord.from_row(row) for row in csv.DictReader(fh)]
