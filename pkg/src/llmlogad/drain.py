"""Fixed-depth parse tree template miner.

Messages are bucketed by token count, then routed through up to
``depth - 2`` levels keyed by their leading tokens. Each leaf holds a list
of templates; a message joins the most similar template of equal length
when the share of positions it agrees on reaches ``similarity_threshold``,
otherwise it starts a new template.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .errors import ConfigError, EmptyMessage
from .ingest import LogRecord

WILDCARD = "<*>"
EMPTY_TEMPLATE_ID = 0


@dataclass(frozen=True)
class MaskRule:
    pattern: str
    replacement: str = WILDCARD

    @cached_property
    def regex(self) -> re.Pattern:
        return re.compile(self.pattern)


DEFAULT_MASK_RULES = (
    MaskRule(r"blk_-?\d+"),
    MaskRule(r"(?<![\d.])(?:\d{1,3}\.){3}\d{1,3}(?::\d+)?(?![\d.])"),
    MaskRule(r"core\.\d+"),
    MaskRule(r"(?<![A-Za-z0-9])0[xX][0-9a-fA-F]+(?![A-Za-z0-9])"),
    MaskRule(r"(?<![A-Za-z0-9.])[-+]?\d+(?:\.\d+)?(?![A-Za-z0-9.])"),
)


@dataclass(frozen=True)
class ParseTreeConfig:
    depth: int = 4
    similarity_threshold: float = 0.4
    max_children: int = 100
    wildcard: str = WILDCARD

    def __post_init__(self):
        if self.depth < 3:
            raise ConfigError("depth must be >= 3")
        if not 0 < self.similarity_threshold <= 1:
            raise ConfigError("similarity_threshold must lie in (0, 1]")
        if self.max_children < 1:
            raise ConfigError("max_children must be >= 1")
        if self.wildcard != WILDCARD:
            raise ConfigError(f"wildcard token is fixed to {WILDCARD!r}")


@dataclass
class Template:
    id: int
    tokens: list[str]
    match_count: int = 1

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @property
    def wildcard_count(self) -> int:
        return sum(t == WILDCARD for t in self.tokens)

    def parameters(self, tokens) -> list[str]:
        return [tok for tok, t in zip(tokens, self.tokens) if t == WILDCARD]

    def fill(self, parameters) -> list[str]:
        """Substitute ``parameters`` into the wildcard slots, in order."""
        it = iter(parameters)
        return [next(it) if t == WILDCARD else t for t in self.tokens]


@dataclass(frozen=True)
class ParsedRecord:
    line_no: int
    template_id: int
    parameters: tuple[str, ...] = ()


def _apply_rules(text: str, rules) -> str:
    for rule in rules:
        text = rule.regex.sub(rule.replacement, text)
    return text


def tokenize_and_mask(content: str, rules: Iterable[MaskRule] = DEFAULT_MASK_RULES) -> list[str]:
    rules = tuple(rules)
    plain = content.split()
    masked = _apply_rules(content, rules).split()
    if len(masked) != len(plain):
        # a rule matched across whitespace; mask token by token so the count holds
        masked = [_apply_rules(tok, rules) for tok in plain]
    return masked


@dataclass
class _Node:
    children: dict[str, _Node] = field(default_factory=dict)
    templates: list[Template] = field(default_factory=list)


def _has_digit(token: str) -> bool:
    return any(c.isdigit() for c in token)


class ParseTree:
    """Mutable template accumulator. Single writer; read-only once parsing ends."""

    _CACHE_LIMIT = 200_000

    def __init__(self, config: ParseTreeConfig | None = None):
        self.config = config or ParseTreeConfig()
        self._roots: dict[int, _Node] = {}
        self._templates: list[Template] = []
        # exact token tuple -> template with similarity 1; cleared on any template edit
        self._exact: dict[tuple[str, ...], Template] = {}

    @property
    def templates(self) -> list[Template]:
        return list(self._templates)

    def template(self, template_id: int) -> Template:
        return self._templates[template_id - 1]

    def parse(self, tokens) -> tuple[int, list[str]]:
        """Route ``tokens`` to a template, merging or creating as needed.

        Returns the template id and the tokens sitting in its wildcard slots
        as of this call (later merges can add slots).
        """
        key = tuple(tokens)
        if not key:
            raise EmptyMessage("cannot parse an empty token list")
        tmpl = self._match(key)
        return tmpl.id, tmpl.parameters(key)

    def _match(self, key: tuple[str, ...]) -> Template:
        hit = self._exact.get(key)
        if hit is not None:
            hit.match_count += 1
            return hit

        best, best_sim = None, -1.0
        for tmpl in self._candidates(key):
            sim = self._similarity(key, tmpl.tokens)
            if sim > best_sim:  # strict: ties keep the lower id
                best, best_sim = tmpl, sim

        if best is not None and best_sim >= self.config.similarity_threshold:
            merged = [t if t == tok else WILDCARD for tok, t in zip(key, best.tokens)]
            if merged != best.tokens:
                best.tokens = merged
                self._exact.clear()
            best.match_count += 1
        else:
            best = Template(len(self._templates) + 1, list(key))
            self._templates.append(best)
            self._leaf_for_insert(key).templates.append(best)

        if len(self._exact) >= self._CACHE_LIMIT:
            self._exact.clear()
        self._exact[key] = best
        return best

    @staticmethod
    def _similarity(tokens, template_tokens) -> float:
        same = 0
        for tok, t in zip(tokens, template_tokens):
            if tok == t or t == WILDCARD:
                same += 1
        return same / len(tokens)

    def _candidates(self, tokens) -> list[Template]:
        root = self._roots.get(len(tokens))
        if root is None:
            return []
        # follow both the literal and the wildcard branch, so templates stay
        # reachable after later lines add literal siblings
        nodes = [root]
        for tok in tokens[: self.config.depth - 2]:
            nxt = []
            for node in nodes:
                child = node.children.get(tok)
                if child is not None:
                    nxt.append(child)
                wild = node.children.get(WILDCARD)
                if wild is not None and wild is not child:
                    nxt.append(wild)
            nodes = nxt
            if not nodes:
                return []
        out = [t for node in nodes for t in node.templates]
        if len(nodes) > 1:
            out.sort(key=lambda t: t.id)
        return out

    def _leaf_for_insert(self, tokens) -> _Node:
        node = self._roots.setdefault(len(tokens), _Node())
        limit = self.config.max_children
        for tok in tokens[: self.config.depth - 2]:
            children = node.children
            if tok in children:
                node = children[tok]
            elif tok == WILDCARD or _has_digit(tok):
                node = children.setdefault(WILDCARD, _Node())
            elif WILDCARD in children:
                if len(children) < limit:
                    node = children.setdefault(tok, _Node())
                else:
                    node = children[WILDCARD]
            elif len(children) + 1 < limit:
                node = children.setdefault(tok, _Node())
            else:
                node = children.setdefault(WILDCARD, _Node())
        return node


def parse_corpus(
    records: Iterable[LogRecord],
    config: ParseTreeConfig | None = None,
    rules: Iterable[MaskRule] = DEFAULT_MASK_RULES,
    tree: ParseTree | None = None,
) -> tuple[list[ParsedRecord], list[Template]]:
    """Parse every record; parameters are read against the final templates.

    Records with empty content map to ``EMPTY_TEMPLATE_ID`` with no
    parameters and do not count toward any template.
    """
    tree = tree or ParseTree(config)
    rules = tuple(rules)
    assigned = []
    for rec in records:
        tokens = tokenize_and_mask(rec.content, rules)
        if not tokens:
            assigned.append((rec.line_no, EMPTY_TEMPLATE_ID, ()))
            continue
        key = tuple(tokens)
        assigned.append((rec.line_no, tree._match(key).id, key))

    templates = tree.templates
    parsed = [
        ParsedRecord(line_no, tid, tuple(templates[tid - 1].parameters(tokens)) if tid else ())
        for line_no, tid, tokens in assigned
    ]
    return parsed, templates


def write_templates(templates: Iterable[Template], fh) -> None:
    for t in sorted(templates, key=lambda t: t.id):
        fh.write(json.dumps({"id": t.id, "match_count": t.match_count, "template": t.text}) + "\n")


def read_templates(fh) -> list[Template]:
    out = []
    for line in fh:
        if line.strip():
            row = json.loads(line)
            out.append(Template(row["id"], row["template"].split(" "), row["match_count"]))
    return out


def write_parsed(parsed: Iterable[ParsedRecord], fh) -> None:
    for p in parsed:
        fh.write(
            json.dumps(
                {"line_no": p.line_no, "template_id": p.template_id, "parameters": list(p.parameters)},
                ensure_ascii=False,
            )
            + "\n"
        )
