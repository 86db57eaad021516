"""Count-based tumbling windows and their three textual renderings."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .drain import EMPTY_TEMPLATE_ID, WILDCARD, ParsedRecord, Template
from .errors import ConfigError, InvalidWindowSize, MissingParse
from .ingest import ANOMALOUS, NORMAL, LogRecord

VIEWS = ("raw", "content", "event")

_SPACES = re.compile(r"\s+")


@dataclass(frozen=True)
class Window:
    index: int
    records: tuple[LogRecord, ...]
    parsed: tuple[ParsedRecord, ...] | None = None
    partial: bool = False

    @property
    def anomalous(self) -> bool:
        return any(r.anomalous for r in self.records)

    @property
    def label(self) -> str:
        return ANOMALOUS if self.anomalous else NORMAL


@dataclass(frozen=True)
class LogSequence:
    window_index: int
    view: str
    items: tuple[str, ...]


def make_windows(
    records: Sequence[LogRecord],
    window_size: int,
    parsed: Sequence[ParsedRecord] | Mapping[int, ParsedRecord] | None = None,
) -> list[Window]:
    """Split ``records`` into consecutive chunks of ``window_size``.

    ``parsed`` may be aligned with ``records`` or keyed by line number. The
    last window is kept even when short and is then marked ``partial``.
    """
    if window_size < 1:
        raise InvalidWindowSize(f"window size must be >= 1, got {window_size}")
    if parsed is not None and not isinstance(parsed, Mapping):
        if len(parsed) != len(records):
            raise ConfigError("parsed records are not aligned with the log records")
        parsed = {p.line_no: p for p in parsed}

    windows = []
    for index, start in enumerate(range(0, len(records), window_size)):
        chunk = tuple(records[start : start + window_size])
        refs = None
        if parsed is not None:
            refs = tuple(parsed.get(r.line_no) for r in chunk)
        windows.append(Window(index, chunk, refs, partial=len(chunk) < window_size))
    return windows


def event_text(template: Template | None) -> str:
    if template is None:
        return ""
    return _SPACES.sub(" ", template.text.replace(WILDCARD, " ")).strip()


def render_sequence(
    window: Window, view: str, templates: Mapping[int, Template] | Sequence[Template] | None = None
) -> LogSequence:
    if view == "raw":
        items = tuple(r.raw_line for r in window.records)
    elif view == "content":
        items = tuple(r.content for r in window.records)
    elif view == "event":
        items = tuple(_event_items(window, templates))
    else:
        raise ConfigError(f"unknown view {view!r}; expected one of {VIEWS}")
    return LogSequence(window.index, view, items)


def _event_items(window, templates):
    if templates is None:
        raise ConfigError("event view needs the mined templates")
    if not isinstance(templates, Mapping):
        templates = {t.id: t for t in templates}
    refs = window.parsed or (None,) * len(window.records)
    for rec, ref in zip(window.records, refs):
        if ref is None:
            raise MissingParse(rec.line_no)
        if ref.template_id == EMPTY_TEMPLATE_ID:
            yield ""
        else:
            yield event_text(templates[ref.template_id])


def write_sequences(windows: Sequence[Window], sequences: Sequence[LogSequence], fh) -> None:
    for w, s in zip(windows, sequences):
        row = {
            "window_index": s.window_index,
            "view": s.view,
            "label": w.label,
            "partial": w.partial,
            "items": list(s.items),
        }
        fh.write(json.dumps(row, ensure_ascii=False) + "\n")
