"""Run configuration: a YAML document merged over defaults, then flag overrides."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from .drain import DEFAULT_MASK_RULES, MaskRule, ParseTreeConfig
from .errors import ConfigError
from .evaluation import ExperimentConfig
from .ingest import PRESETS, DatasetSpec, SubsetPolicy
from .llm import BackendConfig

DEFAULTS: dict = {
    "dataset": {
        "path": None,
        "preset": "bgl",
        "train_ratio": 0.8,
        "max_reject_rate": 0.001,
    },
    "subset": {
        "size": 2000,
        "min_anomaly_fraction": 0.02,
        "max_anomaly_fraction": 0.98,
        "max_retries": 100,
    },
    "drain": {
        "depth": 4,
        "similarity_threshold": 0.4,
        "max_children": 100,
        "mask_rules": [r.pattern for r in DEFAULT_MASK_RULES],
    },
    "prompts": {
        "ids": ["P2"],
        "templates": {},
        "modes": ["zero_shot"],
        "injection_type": "normal",
        "shot_count": 5,
        "shot_granularity": "log",
    },
    "experiment": {
        "views": ["content"],
        "window_sizes": [10, 20, 30, 40, 50],
        "exclude_partial": False,
        "unparsable_policy": "anomalous",
        "temperature": 0.0,
        "max_output_tokens": 100,
    },
    "backend": {
        "kind": "replay",
        "cassette": None,
        "endpoint_url": None,
        "auth_token_env": "OPENAI_API_KEY",
        "model_id": "gpt-3.5-turbo",
        "max_in_flight": 4,
        "requests_per_minute": 20,
        "max_retries": 5,
        "backoff_base": 1.0,
        "timeout": 60.0,
    },
    "seed": 0,
    "out": "runs/default",
}

_LAYOUT_KEYS = (
    "name",
    "field_delimiter",
    "label_field_index",
    "normal_marker",
    "timestamp_field_indices",
    "content_start_index",
)


def merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (update or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_dotted(doc: dict, dotted: str, value) -> None:
    *parents, leaf = dotted.split(".")
    node = doc
    for p in parents:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted!r}: {p!r} is not a section")
    node[leaf] = value


def parse_assignment(text: str) -> tuple[str, object]:
    """``a.b=value`` with ``value`` read as YAML (so 0.5, true, [1, 2] work)."""
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        return key.strip(), yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"bad value for {key!r}: {exc}") from None


def load_document(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return doc


@dataclass(frozen=True)
class RunConfig:
    document: dict
    dataset: DatasetSpec
    dataset_path: Path | None
    train_ratio: float
    max_reject_rate: float
    drain: ParseTreeConfig
    mask_rules: tuple[MaskRule, ...]
    subset: SubsetPolicy
    prompt_ids: tuple[str, ...]
    template_paths: dict
    modes: tuple[str, ...]
    views: tuple[str, ...]
    window_sizes: tuple[int, ...]
    backend: BackendConfig
    seed: int
    out: Path

    @classmethod
    def from_document(cls, doc: dict) -> RunConfig:
        doc = merge(DEFAULTS, doc)
        try:
            return cls._build(doc)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from None

    @classmethod
    def _build(cls, doc: dict) -> RunConfig:
        ds = doc["dataset"]
        layout = {}
        if ds.get("preset"):
            if ds["preset"] not in PRESETS:
                raise ConfigError(f"unknown dataset preset {ds['preset']!r}; have {sorted(PRESETS)}")
            base = PRESETS[ds["preset"]]
            layout = {k: getattr(base, k) for k in _LAYOUT_KEYS}
        layout.update({k: ds[k] for k in _LAYOUT_KEYS if k in ds})
        if "timestamp_field_indices" in layout:
            layout["timestamp_field_indices"] = tuple(layout["timestamp_field_indices"])
        spec = DatasetSpec(**layout)

        dr = doc["drain"]
        pr = doc["prompts"]
        ex = doc["experiment"]
        be = {k: v for k, v in doc["backend"].items()}
        be["cassette"] = str(be["cassette"]) if be.get("cassette") else None
        ids = tuple(str(p).upper() for p in pr["ids"])
        return cls(
            document=doc,
            dataset=spec,
            dataset_path=Path(ds["path"]) if ds.get("path") else None,
            train_ratio=float(ds["train_ratio"]),
            max_reject_rate=float(ds["max_reject_rate"]),
            drain=ParseTreeConfig(
                depth=int(dr["depth"]),
                similarity_threshold=float(dr["similarity_threshold"]),
                max_children=int(dr["max_children"]),
            ),
            mask_rules=tuple(MaskRule(p) for p in dr["mask_rules"]),
            subset=SubsetPolicy(
                size=int(doc["subset"]["size"]),
                min_anomaly_fraction=float(doc["subset"]["min_anomaly_fraction"]),
                max_anomaly_fraction=float(doc["subset"]["max_anomaly_fraction"]),
                max_retries=int(doc["subset"]["max_retries"]),
                seed=int(doc["seed"]),
            ),
            prompt_ids=ids,
            template_paths={str(k).upper(): v for k, v in (pr.get("templates") or {}).items() if v},
            modes=tuple(_mode(m) for m in pr["modes"]),
            views=tuple(ex["views"]),
            window_sizes=tuple(int(w) for w in ex["window_sizes"]),
            backend=BackendConfig(**be),
            seed=int(doc["seed"]),
            out=Path(doc["out"]),
        )

    def experiments(self) -> list[ExperimentConfig]:
        """One experiment per (prompt, mode, view); empty when any axis is empty."""
        if not self.window_sizes:
            return []
        pr, ex = self.document["prompts"], self.document["experiment"]
        return [
            ExperimentConfig(
                dataset=self.dataset.name,
                window_sizes=self.window_sizes,
                prompt_id=pid,
                mode=mode,
                view=view,
                injection_type=pr["injection_type"],
                shot_count=int(pr["shot_count"]),
                shot_granularity=pr["shot_granularity"],
                backend=self.backend,
                seed=self.seed,
                exclude_partial=bool(ex["exclude_partial"]),
                unparsable_policy=ex["unparsable_policy"],
                temperature=float(ex["temperature"]),
                max_output_tokens=int(ex["max_output_tokens"]),
            )
            for pid in self.prompt_ids
            for mode in self.modes
            for view in self.views
        ]

    def validate_files(self, *, need_dataset: bool = True, need_backend: bool = False) -> None:
        if need_dataset:
            if self.dataset_path is None:
                raise ConfigError("no dataset path given (dataset.path or --dataset)")
            if not self.dataset_path.is_file():
                raise ConfigError(f"dataset file not found: {self.dataset_path}")
        for pid, path in self.template_paths.items():
            if not Path(path).is_file():
                raise ConfigError(f"template file for {pid} not found: {path}")
        if need_backend:
            self.backend.validate()
            if self.backend.kind == "replay" and not Path(self.backend.cassette).is_file():
                raise ConfigError(f"cassette not found: {self.backend.cassette}")

    def dump(self) -> str:
        return yaml.safe_dump(self.document, sort_keys=True, allow_unicode=True)


def _mode(value: str) -> str:
    aliases = {"zero": "zero_shot", "few": "few_shot"}
    return aliases.get(value, value)
