"""Dataset loading, chronological split and consecutive-subset sampling."""

from __future__ import annotations

import itertools
import json
import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import (
    ConfigError,
    DataError,
    EmptyDataset,
    IoError,
    MalformedLine,
    RejectRateExceeded,
    SamplingExhausted,
)

log = logging.getLogger(__name__)

NORMAL = "normal"
ANOMALOUS = "anomalous"


@dataclass(frozen=True, slots=True)
class LogRecord:
    line_no: int
    anomalous: bool
    timestamp: str
    content: str
    raw_line: str

    @property
    def label(self) -> str:
        return ANOMALOUS if self.anomalous else NORMAL


@dataclass(frozen=True)
class DatasetSpec:
    """Line layout of a labeled log file.

    Fields are split on ``field_delimiter``; everything from
    ``content_start_index`` onwards (delimiters included) is the message body.
    ``timestamp_field_indices`` is an inclusive ``(first, last)`` range.
    """

    name: str = "bgl"
    field_delimiter: str = " "
    label_field_index: int = 0
    normal_marker: str = "-"
    timestamp_field_indices: tuple[int, int] = (1, 1)
    content_start_index: int = 9

    def __post_init__(self):
        if not self.field_delimiter:
            raise ConfigError("field_delimiter must be non-empty")
        first, last = self.timestamp_field_indices
        if min(self.label_field_index, self.content_start_index, first, last) < 0:
            raise ConfigError("field indices must be >= 0")
        if self.label_field_index >= self.content_start_index:
            raise ConfigError("label field must precede the content")
        if first > last:
            raise ConfigError("timestamp_field_indices must be an ascending range")


# Label Timestamp Date Node Time NodeRepeat Type Component Level Content
BGL = DatasetSpec("bgl", " ", 0, "-", (1, 1), 9)
# Label Timestamp Date User Month Day Time UserGroup Content
SPIRIT = DatasetSpec("spirit", " ", 0, "-", (1, 1), 8)

PRESETS = {"bgl": BGL, "spirit": SPIRIT}


@dataclass(frozen=True)
class SubsetPolicy:
    size: int = 2000
    min_anomaly_fraction: float = 0.02
    max_anomaly_fraction: float = 0.98
    max_retries: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.size < 1:
            raise ConfigError("subset size must be >= 1")
        if not 0 <= self.min_anomaly_fraction <= self.max_anomaly_fraction <= 1:
            raise ConfigError("need 0 <= min_anomaly_fraction <= max_anomaly_fraction <= 1")
        if self.max_retries < 1:
            raise ConfigError("max_retries must be >= 1")


def parse_line(line_no: int, line: str, spec: DatasetSpec) -> LogRecord:
    limit = spec.content_start_index
    fields = line.split(spec.field_delimiter, limit)
    if len(fields) < limit:
        raise MalformedLine(line_no, f"{len(fields)} fields, content starts at field {limit}")
    content = fields[limit] if len(fields) > limit else ""
    first, last = spec.timestamp_field_indices
    timestamp = spec.field_delimiter.join(fields[first : min(last + 1, limit)])
    return LogRecord(
        line_no=line_no,
        anomalous=fields[spec.label_field_index] != spec.normal_marker,
        timestamp=timestamp,
        content=content,
        raw_line=line,
    )


def read_dataset(
    path, spec: DatasetSpec, max_reject_rate: float = 0.001
) -> tuple[list[LogRecord], list[MalformedLine]]:
    """Load ``path`` and return ``(records, rejects)``.

    Malformed lines are quarantined; the load only fails when the share of
    rejected non-blank lines exceeds ``max_reject_rate``.
    """
    path = Path(path)
    records: list[LogRecord] = []
    rejects: list[MalformedLine] = []
    try:
        with path.open("r", encoding="utf-8", errors="replace", newline="") as fh:
            for line_no, line in enumerate(fh):
                line = line.rstrip("\r\n")
                if not line.strip():
                    continue
                try:
                    records.append(parse_line(line_no, line, spec))
                except MalformedLine as exc:
                    rejects.append(exc)
    except OSError as exc:
        raise IoError(path, exc.strerror or str(exc)) from exc

    total = len(records) + len(rejects)
    if rejects:
        log.warning("%s: %d malformed line(s) quarantined", path, len(rejects))
        if len(rejects) / total > max_reject_rate:
            raise RejectRateExceeded(len(rejects), total, max_reject_rate)
    return records, rejects


def load_dataset(path, spec: DatasetSpec, max_reject_rate: float = 0.001) -> list[LogRecord]:
    return read_dataset(path, spec, max_reject_rate)[0]


def write_rejects(rejects: list[MalformedLine], fh) -> None:
    for r in rejects:
        fh.write(json.dumps({"line_no": r.line_no, "reason": r.reason}) + "\n")


def split_chronological(
    records: list[LogRecord], train_ratio: float = 0.8
) -> tuple[list[LogRecord], list[LogRecord]]:
    if not 0 < train_ratio < 1:
        raise ConfigError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    if not records:
        raise EmptyDataset("cannot split an empty dataset")
    # exact decimal arithmetic: 0.29 * 100 must give 29, not 28
    cut = int(len(records) * Fraction(str(train_ratio)))
    if cut == 0:
        log.warning("train split is empty (%d record(s), ratio %s)", len(records), train_ratio)
    return records[:cut], records[cut:]


def sample_consecutive(test: list[LogRecord], policy: SubsetPolicy) -> list[LogRecord]:
    """Draw a seeded contiguous slice whose anomaly fraction is within bounds."""
    n, size = len(test), policy.size
    if n < size:
        raise DataError(f"test split has {n} records, subset needs {size}")
    prefix = [0, *itertools.accumulate(int(r.anomalous) for r in test)]
    last_start = n - size
    rng = random.Random(policy.seed)
    seen = []
    for _ in range(policy.max_retries):
        start = rng.randint(0, last_start)
        fraction = (prefix[start + size] - prefix[start]) / size
        if policy.min_anomaly_fraction <= fraction <= policy.max_anomaly_fraction:
            log.info("subset [%d, %d) anomaly fraction %.4f", start, start + size, fraction)
            return test[start : start + size]
        seen.append(fraction)
    raise SamplingExhausted(seen)
