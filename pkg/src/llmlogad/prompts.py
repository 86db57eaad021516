"""Prompt assembly: task description, format statement, optional labeled
examples, then the input sequence as a list literal."""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .drain import ParsedRecord, Template
from .errors import ConfigError, InvalidInjection
from .ingest import ANOMALOUS, NORMAL, LogRecord
from .sequencer import LogSequence, Window, render_sequence

RESPONSE_KEYS = ("is_anomaly", "reports", "preventive_measures")
KEY_PHRASE = ", ".join(RESPONSE_KEYS)
PROMPT_IDS = ("P1", "P2")
MODES = ("zero_shot", "few_shot")
INJECTION_TYPES = ("normal", "abnormal", "mixed")
GRANULARITIES = ("log", "window")

INJECTION_HEADER = "Here are some historical logs with their labels for reference:"
SEQUENCE_PREFIX = "Log sequence: "
ARROW = " → "


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    task_description: str
    format_statement: str

    def __post_init__(self):
        if self.id not in PROMPT_IDS:
            raise ConfigError(f"prompt id must be one of {PROMPT_IDS}, got {self.id!r}")
        for key in RESPONSE_KEYS:
            hits = len(re.findall(rf"(?<![\w]){key}(?![\w])", self.format_statement))
            if hits != 1:
                raise ConfigError(f"{self.id}: format statement names {key!r} {hits} times")
        if KEY_PHRASE in self.task_description:
            raise ConfigError(f"{self.id}: task description must not repeat the key list")


@dataclass(frozen=True)
class Shot:
    items: tuple[str, ...]
    label: str


@dataclass(frozen=True)
class InjectionConfig:
    mode: str = "zero_shot"
    injection_type: str = "normal"
    shots: tuple[Shot, ...] = ()
    shot_count: int = 5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.injection_type not in INJECTION_TYPES:
            raise ConfigError(f"unknown injection type {self.injection_type!r}")
        if self.mode == "zero_shot":
            if self.shots:
                raise InvalidInjection("zero-shot prompts take no examples")
            return
        if not self.shots:
            raise InvalidInjection("few-shot prompts need examples")
        labels = [s.label for s in self.shots]
        wanted = {
            "normal": [NORMAL] * self.shot_count,
            "abnormal": [ANOMALOUS] * self.shot_count,
            "mixed": [NORMAL] * self.shot_count + [ANOMALOUS] * self.shot_count,
        }[self.injection_type]
        if sorted(labels) != sorted(wanted):
            raise InvalidInjection(
                f"{self.injection_type} injection wants {len(wanted)} shot(s) "
                f"labeled {sorted(set(wanted))}, got {labels}"
            )


@dataclass(frozen=True)
class PromptRequest:
    text: str
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    max_output_tokens: int = 100
    top_choices: int = 1

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise ConfigError("max_output_tokens must be >= 1")
        if self.top_choices != 1:
            raise ConfigError("only the top-1 choice is supported")


def render_list_literal(items: Sequence[str]) -> str:
    quoted = ('"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"' for s in items)
    return "[" + ", ".join(quoted) + "]"


def parse_template_text(text: str, template_id: str) -> PromptTemplate:
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.split("\n"):
        m = re.fullmatch(r"\[(\w+)\]", line.strip())
        if m:
            current = sections.setdefault(m.group(1), [])
        elif current is not None:
            current.append(line)
        elif line.strip() and not line.startswith("#"):
            raise ConfigError(f"{template_id}: text outside of a [section]: {line!r}")
    try:
        body = {k: "\n".join(sections[k]).strip("\n") for k in ("task_description", "format_statement")}
    except KeyError as exc:
        raise ConfigError(f"{template_id}: template file lacks section {exc.args[0]!r}") from None
    return PromptTemplate(template_id, **body)


def load_template(path, template_id: str) -> PromptTemplate:
    return parse_template_text(Path(path).read_text(encoding="utf-8"), template_id)


def canonical_templates() -> tuple[PromptTemplate, PromptTemplate]:
    pkg = resources.files("llmlogad") / "templates"
    return tuple(
        parse_template_text((pkg / f"{pid.lower()}.txt").read_text(encoding="utf-8"), pid)
        for pid in PROMPT_IDS
    )


def injection_block(shots: Sequence[Shot]) -> str:
    lines = [INJECTION_HEADER]
    lines += [render_list_literal(s.items) + ARROW + s.label for s in shots]
    return "\n".join(lines)


def build_prompt(
    template: PromptTemplate,
    injection: InjectionConfig,
    sequence: LogSequence,
    *,
    model_id: str = "gpt-3.5-turbo",
    temperature: float = 0.0,
    max_output_tokens: int = 100,
) -> PromptRequest:
    if injection.mode == "few_shot" and not injection.shots:
        raise InvalidInjection("few-shot prompts need examples")
    block = injection_block(injection.shots) if injection.mode == "few_shot" else ""
    text = "\n".join(
        [
            template.task_description,
            template.format_statement,
            block,
            SEQUENCE_PREFIX + render_list_literal(sequence.items),
        ]
    )
    return PromptRequest(text, model_id, float(temperature), max_output_tokens)


def draw_shots(
    records: Sequence[LogRecord],
    *,
    injection_type: str,
    shot_count: int = 5,
    view: str = "content",
    granularity: str = "log",
    window_size: int = 1,
    parsed: Sequence[ParsedRecord] | Mapping[int, ParsedRecord] | None = None,
    templates: Sequence[Template] | Mapping[int, Template] | None = None,
    seed: int = 0,
) -> tuple[Shot, ...]:
    """Sample labeled examples from historical (training) records.

    With ``granularity="log"`` each shot is a single line; with ``"window"``
    it is a whole window of ``window_size`` lines labeled by the any-anomalous
    rule. Mixed injection draws ``shot_count`` of each class.
    """
    if granularity not in GRANULARITIES:
        raise ConfigError(f"shot granularity must be one of {GRANULARITIES}")
    size = 1 if granularity == "log" else window_size
    if parsed is not None and not isinstance(parsed, Mapping):
        parsed = {p.line_no: p for p in parsed}
    starts = range(0, len(records) - size + 1, size)
    pools: dict[str, list[int]] = {NORMAL: [], ANOMALOUS: []}
    for start in starts:
        bad = any(r.anomalous for r in records[start : start + size])
        pools[ANOMALOUS if bad else NORMAL].append(start)
    wanted = {
        "normal": [(NORMAL, shot_count)],
        "abnormal": [(ANOMALOUS, shot_count)],
        "mixed": [(NORMAL, shot_count), (ANOMALOUS, shot_count)],
    }[injection_type]
    rng = random.Random(seed)
    shots = []
    for label, k in wanted:
        pool = pools[label]
        if len(pool) < k:
            raise InvalidInjection(f"need {k} {label} example(s), history has {len(pool)}")
        for start in sorted(rng.sample(pool, k)):
            chunk = tuple(records[start : start + size])
            refs = tuple(parsed.get(r.line_no) for r in chunk) if parsed is not None else None
            window = Window(start // size, chunk, refs)
            shots.append(Shot(render_sequence(window, view, templates).items, label))
    return tuple(shots)


def audit_record(request: PromptRequest, digest: str, **context) -> dict:
    data = request.text.encode("utf-8")
    return {
        **context,
        "digest": digest,
        "sha256": hashlib.sha256(data).hexdigest(),
        "bytes": len(data),
        "model_id": request.model_id,
        "temperature": request.temperature,
        "max_output_tokens": request.max_output_tokens,
    }
