"""Window-level scoring and the experiment runner.

Anomalous windows are the positive class. Ratios with a zero denominator
are reported as 0.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from typing import Mapping, Sequence

from .drain import ParsedRecord, Template
from .errors import BackendError, CassetteMiss, ConfigError, MissingResponses, UnparsableResponse
from .fileio import atomic_open
from .ingest import LogRecord
from .llm import Backend, BackendConfig, digest
from .prompts import (
    GRANULARITIES,
    INJECTION_TYPES,
    MODES,
    InjectionConfig,
    PromptTemplate,
    audit_record,
    build_prompt,
    draw_shots,
)
from .responses import NeedsReformat, Verdict, finish_reformat, parse_response, reformat_request
from .sequencer import VIEWS, make_windows, render_sequence

log = logging.getLogger(__name__)

METRIC_FIELDS = ("f1", "precision", "recall", "specificity")
UNPARSABLE_POLICIES = ("anomalous", "normal", "excluded")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def accumulate(counts: ConfusionCounts, predicted: bool, actual: bool) -> ConfusionCounts:
    if predicted:
        return replace(counts, tp=counts.tp + 1) if actual else replace(counts, fp=counts.fp + 1)
    return replace(counts, fn=counts.fn + 1) if actual else replace(counts, tn=counts.tn + 1)


@dataclass(frozen=True)
class Metrics:
    f1: float
    precision: float
    recall: float
    specificity: float


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def f1_score(precision: float, recall: float) -> float:
    return _ratio(2 * precision * recall, precision + recall)


def compute_metrics(counts: ConfusionCounts) -> Metrics:
    precision = _ratio(counts.tp, counts.tp + counts.fp)
    recall = _ratio(counts.tp, counts.tp + counts.fn)
    specificity = _ratio(counts.tn, counts.tn + counts.fp)
    return Metrics(f1_score(precision, recall), precision, recall, specificity)


def format_metric(value: float, places: int = 3) -> str:
    """Half-up rounding on the decimal representation (0.73976 -> '0.740')."""
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "bgl"
    window_sizes: tuple[int, ...] = (10, 20, 30, 40, 50)
    prompt_id: str = "P2"
    mode: str = "zero_shot"
    view: str = "content"
    injection_type: str = "normal"
    shot_count: int = 5
    shot_granularity: str = "log"
    backend: BackendConfig = field(default_factory=BackendConfig)
    seed: int = 0
    exclude_partial: bool = False
    unparsable_policy: str = "anomalous"
    temperature: float = 0.0
    max_output_tokens: int = 100

    def __post_init__(self):
        if not self.window_sizes or any(w < 1 for w in self.window_sizes):
            raise ConfigError("window_sizes must be non-empty and each >= 1")
        checks = [
            (self.mode, MODES, "mode"),
            (self.view, VIEWS, "view"),
            (self.injection_type, INJECTION_TYPES, "injection_type"),
            (self.shot_granularity, GRANULARITIES, "shot_granularity"),
            (self.unparsable_policy, UNPARSABLE_POLICIES, "unparsable_policy"),
        ]
        for value, allowed, name in checks:
            if value not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {value!r}")


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    prompt_id: str
    mode: str
    view: str
    injection_type: str
    window_size: int
    tp: int
    fp: int
    tn: int
    fn: int
    f1: float
    precision: float
    recall: float
    specificity: float
    windows_evaluated: int
    unparsable_count: int
    excluded_count: int = 0

    @property
    def counts(self) -> ConfusionCounts:
        return ConfusionCounts(self.tp, self.fp, self.tn, self.fn)

    @property
    def metrics(self) -> Metrics:
        return Metrics(self.f1, self.precision, self.recall, self.specificity)

    @classmethod
    def build(cls, config: ExperimentConfig, window_size: int, counts: ConfusionCounts, **extra):
        m = compute_metrics(counts)
        return cls(
            config.dataset,
            config.prompt_id,
            config.mode,
            config.view,
            config.injection_type,
            window_size,
            counts.tp,
            counts.fp,
            counts.tn,
            counts.fn,
            m.f1,
            m.precision,
            m.recall,
            m.specificity,
            **extra,
        )


def _verdict_fields(v: Verdict | None) -> dict:
    if v is None:
        return {"is_anomaly": None, "reports": "", "preventive_measures": "", "parse_path": None}
    return {
        "is_anomaly": v.is_anomaly,
        "reports": v.reports,
        "preventive_measures": v.preventive_measures,
        "parse_path": v.parse_path,
    }


def run_experiment(
    config: ExperimentConfig,
    subset: Sequence[LogRecord],
    *,
    backend: Backend,
    template: PromptTemplate,
    parsed: Mapping[int, ParsedRecord] | None = None,
    templates: Sequence[Template] | Mapping[int, Template] | None = None,
    history: Sequence[LogRecord] = (),
    audit: list | None = None,
    verdicts: list | None = None,
) -> list[ResultRow]:
    """Score ``subset`` once per configured window size.

    ``history`` supplies few-shot examples. ``audit`` and ``verdicts``, when
    given, receive one dict per prompt sent and per window scored.
    """
    if template.id != config.prompt_id:
        raise ConfigError(f"template {template.id} does not match prompt_id {config.prompt_id}")
    params = dict(
        model_id=config.backend.model_id,
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    )
    context = dict(
        prompt_id=config.prompt_id,
        mode=config.mode,
        view=config.view,
        injection_type=config.injection_type,
    )
    if templates is not None and not isinstance(templates, Mapping):
        templates = {t.id: t for t in templates}
    rows = []
    for size in sorted(config.window_sizes):
        windows = make_windows(subset, size, parsed)
        if config.exclude_partial:
            windows = [w for w in windows if not w.partial]

        shots = ()
        if config.mode == "few_shot":
            shots = draw_shots(
                history,
                injection_type=config.injection_type,
                shot_count=config.shot_count,
                view=config.view,
                granularity=config.shot_granularity,
                window_size=size,
                parsed=parsed,
                templates=templates,
                seed=config.seed,
            )
        injection = InjectionConfig(config.mode, config.injection_type, shots, config.shot_count)

        requests = [
            build_prompt(template, injection, render_sequence(w, config.view, templates), **params)
            for w in windows
        ]
        digests = [digest(r) for r in requests]
        if audit is not None:
            for w, req, d in zip(windows, requests, digests):
                audit.append(
                    audit_record(req, d, kind="detect", window_size=size, window_index=w.index, **context)
                )

        replies = backend.complete_many(requests)
        missing = [r.digest for r in replies if isinstance(r, CassetteMiss)]
        _raise_other(replies)

        outcomes: list[Verdict | NeedsReformat | None] = [
            None if isinstance(r, BackendError) else parse_response(r.text) for r in replies
        ]
        redo = [i for i, o in enumerate(outcomes) if isinstance(o, NeedsReformat) and o.raw_text]
        re_requests = [reformat_request(outcomes[i].raw_text, **params) for i in redo]
        re_digests = {i: digest(r) for i, r in zip(redo, re_requests)}
        if audit is not None:
            for i, req in zip(redo, re_requests):
                audit.append(
                    audit_record(
                        req, re_digests[i], kind="reformat", window_size=size,
                        window_index=windows[i].index, **context,
                    )
                )
        re_replies = backend.complete_many(re_requests)
        missing += [r.digest for r in re_replies if isinstance(r, CassetteMiss)]
        _raise_other(re_replies)
        if missing:
            raise MissingResponses(missing)

        for i, reply in zip(redo, re_replies):
            try:
                outcomes[i] = finish_reformat(outcomes[i].raw_text, reply.text)
            except UnparsableResponse:
                outcomes[i] = NeedsReformat(outcomes[i].raw_text, "reformat reply unparsable")

        counts = ConfusionCounts()
        unparsable = excluded = 0
        for i, (w, outcome) in enumerate(zip(windows, outcomes)):
            verdict = outcome if isinstance(outcome, Verdict) else None
            status = "ok"
            if verdict is None:
                unparsable += 1
                status = "unparsable"
                if config.unparsable_policy == "excluded":
                    excluded += 1
                    status = "excluded"
            if status == "excluded":
                predicted = None
            elif verdict is not None:
                predicted = verdict.is_anomaly
            else:
                predicted = config.unparsable_policy == "anomalous"
            if predicted is not None:
                counts = accumulate(counts, predicted, w.anomalous)
            if verdicts is not None:
                verdicts.append(
                    {
                        **context,
                        "window_size": size,
                        "window_index": w.index,
                        "label": w.label,
                        "partial": w.partial,
                        "status": status,
                        "predicted": predicted,
                        **_verdict_fields(verdict),
                        "raw_text": replies[i].text,
                        "reformatted_text": verdict.reformatted_text if verdict else "",
                        "prompt_digest": digests[i],
                        "reformat_digest": re_digests.get(i),
                    }
                )

        row = ResultRow.build(
            config,
            size,
            counts,
            windows_evaluated=len(windows),
            unparsable_count=unparsable,
            excluded_count=excluded,
        )
        log.info("window %d: %s", size, row)
        rows.append(row)
    return rows


def _raise_other(replies) -> None:
    for r in replies:
        if isinstance(r, BackendError) and not isinstance(r, CassetteMiss):
            raise r


# reports

ROW_FIELDS = tuple(f.name for f in dataclasses.fields(ResultRow))
_INT_FIELDS = {f.name for f in dataclasses.fields(ResultRow) if f.type in ("int", int)}


def report_text(rows: Sequence[ResultRow], fmt: str = "csv") -> str:
    if not rows:
        raise ValueError("no rows to report")
    if fmt == "jsonl":
        return "".join(json.dumps(dataclasses.asdict(r)) + "\n" for r in rows)
    if fmt != "csv":
        raise ConfigError(f"unknown report format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for r in rows:
        writer.writerow(
            [format_metric(getattr(r, k)) if k in METRIC_FIELDS else getattr(r, k) for k in ROW_FIELDS]
        )
    return buf.getvalue()


def write_report(rows: Sequence[ResultRow], destination, fmt: str = "csv") -> None:
    text = report_text(rows, fmt)
    with atomic_open(destination) as fh:
        fh.write(text)


def read_report(path, fmt: str | None = None) -> list[ResultRow]:
    path = str(path)
    fmt = fmt or ("jsonl" if path.endswith(".jsonl") else "csv")
    with open(path, encoding="utf-8", newline="") as fh:
        if fmt == "jsonl":
            return [ResultRow(**json.loads(line)) for line in fh if line.strip()]
        rows = []
        for rec in csv.DictReader(fh):
            typed = {}
            for k, v in rec.items():
                if k in _INT_FIELDS:
                    typed[k] = int(v)
                elif k in METRIC_FIELDS:
                    typed[k] = float(v)
                else:
                    typed[k] = v
            rows.append(ResultRow(**typed))
        return rows


def combined_table(rows: Sequence[ResultRow]) -> str:
    """Window size x metric (F, P, R, S) against one column per run setting."""
    columns = []
    for r in rows:
        key = (r.dataset, r.prompt_id, r.mode, r.view, r.injection_type)
        if key not in columns:
            columns.append(key)
    cells = {((r.dataset, r.prompt_id, r.mode, r.view, r.injection_type), r.window_size): r for r in rows}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["window_size", "metric", *("/".join(c) for c in columns)])
    for size in sorted({r.window_size for r in rows}):
        for short, name in zip("FPRS", METRIC_FIELDS):
            line = [size, short]
            for c in columns:
                row = cells.get((c, size))
                line.append(format_metric(getattr(row, name)) if row else "")
            writer.writerow(line)
    return buf.getvalue()


def load_reference_results() -> list[dict]:
    """Published per-window results, used as arithmetic fixtures and for
    side-by-side report rendering. Baseline rows are reference data only."""
    text = (resources.files("llmlogad") / "data" / "reference_results.csv").read_text(encoding="utf-8")
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        rec["window_size"] = int(rec["window_size"])
        for k in METRIC_FIELDS:
            rec[k] = float(rec[k])
        out.append(rec)
    return out
