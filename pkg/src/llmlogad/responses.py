"""Turn free-form model replies into structured verdicts.

Order of attempts: the whole reply as JSON (``direct``), then the first
balanced ``{...}`` span or a repaired truncated object (``extracted``), and
finally a second model call asking for JSON (``reformatted``).
"""

from __future__ import annotations

import ast
import json
import logging
import re
from dataclasses import dataclass

from .errors import UnparsableResponse, UnrecognizedFlag
from .prompts import RESPONSE_KEYS, PromptRequest

log = logging.getLogger(__name__)

REFORMAT_PHRASE = "Please format the following text in json format, which include the keys:"

TRUE_WORDS = frozenset({"true", "yes", "anomaly", "anomalous"})
FALSE_WORDS = frozenset({"false", "no", "normal"})

PARSE_PATHS = ("direct", "extracted", "reformatted")

_FENCE = re.compile(r"^\s*```[\w-]*\s*\n?(.*?)\n?\s*```\s*$", re.S)
_MAX_SPANS = 64
_LITERAL = re.compile(r"(true|false|null)\b")


@dataclass(frozen=True)
class Verdict:
    is_anomaly: bool
    reports: str
    preventive_measures: str
    parse_path: str
    raw_text: str
    reformatted_text: str = ""


@dataclass(frozen=True)
class NeedsReformat:
    raw_text: str
    reason: str = ""


def fold_key(key: str) -> str:
    return re.sub(r"[\s_\-]", "", str(key)).lower()


_FOLDED = {fold_key(k): k for k in RESPONSE_KEYS}


def normalize_flag(value) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        if value == 1:
            return True
        if value == 0:
            return False
        raise UnrecognizedFlag(value)
    if isinstance(value, str):
        word = value.strip().lower()
        if word in TRUE_WORDS:
            return True
        if word in FALSE_WORDS:
            return False
    raise UnrecognizedFlag(value)


def _as_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (list, tuple)):
        return "\n".join(_as_text(v) for v in value)
    return json.dumps(value, ensure_ascii=False)


def _pythonize(text: str) -> str:
    """Rewrite bare JSON literals (true/false/null) outside strings for ast."""
    out, i, quote = [], 0, None
    while i < len(text):
        c = text[i]
        if quote:
            out.append(c)
            if c == "\\" and i + 1 < len(text):
                out.append(text[i + 1])
                i += 1
            elif c == quote:
                quote = None
        elif c in "\"'":
            quote = c
            out.append(c)
        else:
            m = _LITERAL.match(text, i)
            if m and (i == 0 or not (text[i - 1].isalnum() or text[i - 1] == "_")):
                out.append({"true": "True", "false": "False", "null": "None"}[m.group(1)])
                i += len(m.group(1))
                continue
            out.append(c)
        i += 1
    return "".join(out)


def _loads(text: str):
    try:
        return json.loads(text)
    except (ValueError, RecursionError):
        pass
    relaxed = re.sub(r",\s*([}\]])", r"\1", text)
    try:
        return json.loads(relaxed)
    except (ValueError, RecursionError):
        pass
    try:
        return ast.literal_eval(_pythonize(relaxed))
    except (ValueError, SyntaxError, TypeError, MemoryError, RecursionError):
        return None


def _balanced_end(text: str, start: int) -> int | None:
    depth, quote, i = 0, None, start
    while i < len(text):
        c = text[i]
        if quote:
            if c == "\\":
                i += 1
            elif c == quote:
                quote = None
        elif c in "\"'":
            # an apostrophe inside a bare word is prose, not a string opener
            if c == "'" and i > 0 and text[i - 1].isalnum():
                pass
            else:
                quote = c
        elif c in "{[":
            depth += 1
        elif c in "}]":
            depth -= 1
            if depth == 0:
                return i
        i += 1
    return None


def _repair_truncated(fragment: str) -> list[str]:
    """Candidate completions of an object cut off mid-stream."""
    stack, quote, i, last_comma = [], None, 0, None
    while i < len(fragment):
        c = fragment[i]
        if quote:
            if c == "\\":
                i += 1
            elif c == quote:
                quote = None
        elif c in "\"'":
            quote = c
        elif c in "{[":
            stack.append("}" if c == "{" else "]")
        elif c in "}]":
            if stack:
                stack.pop()
        elif c == ",":
            last_comma = (i, list(stack))
        i += 1

    body = fragment[:-1] if fragment.endswith("\\") else fragment
    candidates = []
    closed = body + (quote or "")
    stripped = closed.rstrip()
    if stripped.endswith(":"):
        stripped += ' ""'
    candidates.append(stripped.rstrip(",") + "".join(reversed(stack)))
    if last_comma is not None:
        pos, st = last_comma
        candidates.append(fragment[:pos] + "".join(reversed(st)))
    return candidates


def _object_candidates(text: str):
    starts = [m.start() for m in re.finditer(r"\{", text)][:_MAX_SPANS]
    for s in starts:
        end = _balanced_end(text, s)
        if end is not None:
            yield text[s : end + 1]
    if starts:
        yield from _repair_truncated(text[starts[0] :])


def _to_verdict(obj, path: str, raw_text: str) -> Verdict | NeedsReformat:
    if not isinstance(obj, dict):
        return NeedsReformat(raw_text, "reply is not an object")
    fields = {}
    for k, v in obj.items():
        name = _FOLDED.get(fold_key(k))
        if name and name not in fields:
            fields[name] = v
    if "is_anomaly" not in fields:
        return NeedsReformat(raw_text, "is_anomaly missing")
    try:
        flag = normalize_flag(fields["is_anomaly"])
    except UnrecognizedFlag as exc:
        return NeedsReformat(raw_text, str(exc))
    for key in ("reports", "preventive_measures"):
        if key not in fields:
            log.warning("reply lacks %r; using an empty string", key)
    return Verdict(
        is_anomaly=flag,
        reports=_as_text(fields.get("reports")),
        preventive_measures=_as_text(fields.get("preventive_measures")),
        parse_path=path,
        raw_text=raw_text,
    )


def parse_response(text) -> Verdict | NeedsReformat:
    """Total: any input yields a Verdict or a NeedsReformat, never an exception."""
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    elif not isinstance(text, str):
        text = str(text)

    try:
        obj = json.loads(text)
    except (ValueError, RecursionError):
        obj = None
    if isinstance(obj, dict):
        verdict = _to_verdict(obj, "direct", text)
        if isinstance(verdict, Verdict):
            return verdict

    fenced = _FENCE.match(text)
    body = fenced.group(1) if fenced else text
    last = NeedsReformat(text, "no object found")
    for span in _object_candidates(body):
        obj = _loads(span)
        if obj is None:
            continue
        verdict = _to_verdict(obj, "extracted", text)
        if isinstance(verdict, Verdict):
            return verdict
        last = verdict
    return last


def reformat_request(
    raw_text: str,
    keys=RESPONSE_KEYS,
    *,
    model_id: str = "gpt-3.5-turbo",
    temperature: float = 0.0,
    max_output_tokens: int = 100,
) -> PromptRequest:
    text = f"{REFORMAT_PHRASE} {', '.join(keys)}\n{raw_text}"
    return PromptRequest(text, model_id, float(temperature), max_output_tokens)


def finish_reformat(raw_text: str, reply_text: str) -> Verdict:
    parsed = parse_response(reply_text)
    if isinstance(parsed, NeedsReformat):
        raise UnparsableResponse(raw_text, reply_text)
    return Verdict(
        parsed.is_anomaly,
        parsed.reports,
        parsed.preventive_measures,
        "reformatted",
        raw_text,
        reformatted_text=reply_text,
    )


def reformat_flow(backend, raw_text: str, keys=RESPONSE_KEYS, **request_params) -> Verdict:
    """One extra round trip asking the model to restate ``raw_text`` as JSON.

    Backend failures propagate; a reply that still does not parse raises
    ``UnparsableResponse``.
    """
    if not raw_text:
        raise ValueError("nothing to reformat")
    reply = backend.complete(reformat_request(raw_text, keys, **request_params))
    return finish_reformat(raw_text, reply.text)


def resolve(backend, raw_text: str, **request_params) -> Verdict:
    parsed = parse_response(raw_text)
    if isinstance(parsed, Verdict):
        return parsed
    if not raw_text:
        raise UnparsableResponse(raw_text, "")
    return reformat_flow(backend, raw_text, **request_params)

