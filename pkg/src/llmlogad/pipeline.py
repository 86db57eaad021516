"""Glue from a RunConfig to parsed, windowed, scored data."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .config import RunConfig
from .drain import ParsedRecord, Template, parse_corpus
from .errors import MalformedLine
from .evaluation import ExperimentConfig, ResultRow, run_experiment
from .ingest import LogRecord, read_dataset, sample_consecutive, split_chronological
from .llm import Backend
from .prompts import PromptTemplate, canonical_templates, load_template

log = logging.getLogger(__name__)


@dataclass
class Prepared:
    records: list[LogRecord]
    rejects: list[MalformedLine]
    train: list[LogRecord]
    subset: list[LogRecord]
    parsed: dict[int, ParsedRecord]
    templates: list[Template]


def prepare(run: RunConfig) -> Prepared:
    """Load, split 8:2 (or as configured), sample the test subset and mine
    templates over the whole file so history and subset share one tree."""
    records, rejects = read_dataset(run.dataset_path, run.dataset, run.max_reject_rate)
    train, test = split_chronological(records, run.train_ratio)
    subset = sample_consecutive(test, run.subset)
    parsed, templates = parse_corpus(records, run.drain, run.mask_rules)
    log.info(
        "%d records (%d rejected), train %d, subset %d, %d templates",
        len(records), len(rejects), len(train), len(subset), len(templates),
    )
    return Prepared(records, rejects, train, subset, {p.line_no: p for p in parsed}, templates)


def prompt_templates(run: RunConfig) -> dict[str, PromptTemplate]:
    out = {t.id: t for t in canonical_templates()}
    for pid, path in run.template_paths.items():
        out[pid] = load_template(path, pid)
    return out


def run_grid(
    run: RunConfig,
    backend: Backend,
    data: Prepared,
    *,
    experiments: list[ExperimentConfig] | None = None,
    audit: list | None = None,
    verdicts: list | None = None,
) -> list[tuple[ExperimentConfig, list[ResultRow]]]:
    templates = prompt_templates(run)
    out = []
    for exp in experiments if experiments is not None else run.experiments():
        rows = run_experiment(
            exp,
            data.subset,
            backend=backend,
            template=templates[exp.prompt_id],
            parsed=data.parsed,
            templates=data.templates,
            history=data.train,
            audit=audit,
            verdicts=verdicts,
        )
        out.append((exp, rows))
    return out
