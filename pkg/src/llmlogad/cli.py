"""Command-line entry point.

    llmlogad parse          mine templates, dump templates and parsed records
    llmlogad sequence       dump windowed sequences for each view and size
    llmlogad detect         score one (prompt, mode, view, window size)
    llmlogad sweep          score the whole configured grid
    llmlogad replay-verify  check that a cassette covers the grid

Exit codes: 0 ok, 1 usage or configuration, 2 data, 3 backend.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import drain, ingest, pipeline, sequencer
from .config import RunConfig, load_document, parse_assignment, set_dotted
from .errors import ConfigError, MissingResponses, PipelineError
from .evaluation import combined_table, report_text
from .fileio import atomic_open, atomic_write_text
from .llm import make_backend

log = logging.getLogger("llmlogad")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _csv(choices=None, cast=str):
    def convert(text):
        values = [cast(v.strip()) for v in text.split(",") if v.strip()]
        if choices:
            bad = [v for v in values if v not in choices]
            if bad:
                raise argparse.ArgumentTypeError(f"invalid choice(s) {bad}; choose from {choices}")
        return values

    return convert


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--dataset", help="log file to read (dataset.path)")
    common.add_argument("--window-size", type=_csv(cast=int), help="comma-separated window sizes")
    common.add_argument("--prompt", type=_csv(["p1", "p2"]), help="p1, p2 or both")
    common.add_argument("--mode", type=_csv(["zero", "few"]), help="zero, few or both")
    common.add_argument("--view", type=_csv(list(sequencer.VIEWS)), help="raw, content, event")
    common.add_argument("--injection", choices=["normal", "abnormal", "mixed"])
    common.add_argument("--backend", choices=["live", "record", "replay"])
    common.add_argument("--cassette")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override any config field, e.g. --set subset.size=500",
    )
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="llmlogad", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn, help_ in [
        ("parse", cmd_parse, "mine templates"),
        ("sequence", cmd_sequence, "dump windowed sequences"),
        ("detect", cmd_detect, "score one configuration"),
        ("sweep", cmd_sweep, "score the configured grid"),
        ("replay-verify", cmd_replay_verify, "check cassette coverage"),
    ]:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=fn)
    return parser


def resolve_config(args) -> RunConfig:
    doc = load_document(args.config) if args.config else {}
    flags = {
        "dataset.path": args.dataset,
        "experiment.window_sizes": args.window_size,
        "prompts.ids": [p.upper() for p in args.prompt] if args.prompt is not None else None,
        "prompts.modes": [f"{m}_shot" for m in args.mode] if args.mode is not None else None,
        "experiment.views": args.view,
        "prompts.injection_type": args.injection,
        "backend.kind": args.backend,
        "backend.cassette": args.cassette,
        "seed": args.seed,
        "out": args.out,
    }
    for key, value in flags.items():
        if value is not None:
            set_dotted(doc, key, value)
    for item in args.set:
        set_dotted(doc, *parse_assignment(item))
    return RunConfig.from_document(doc)


def _echo_config(run: RunConfig) -> None:
    atomic_write_text(run.out / "effective_config.yaml", run.dump())


def _jsonl(path, rows) -> None:
    with atomic_open(path) as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def cmd_parse(run: RunConfig) -> int:
    run.validate_files()
    _echo_config(run)
    records, rejects = ingest.read_dataset(run.dataset_path, run.dataset, run.max_reject_rate)
    parsed, templates = drain.parse_corpus(records, run.drain, run.mask_rules)
    with atomic_open(run.out / "templates.jsonl") as fh:
        drain.write_templates(templates, fh)
    with atomic_open(run.out / "parsed.jsonl") as fh:
        drain.write_parsed(parsed, fh)
    with atomic_open(run.out / "rejects.jsonl") as fh:
        ingest.write_rejects(rejects, fh)
    print(f"{len(records)} records, {len(templates)} templates, {len(rejects)} rejected -> {run.out}")
    return 0


def cmd_sequence(run: RunConfig) -> int:
    run.validate_files()
    _echo_config(run)
    data = pipeline.prepare(run)
    for view in run.views:
        for size in run.window_sizes:
            windows = sequencer.make_windows(data.subset, size, data.parsed)
            seqs = [sequencer.render_sequence(w, view, data.templates) for w in windows]
            with atomic_open(run.out / f"sequences_{view}_w{size}.jsonl") as fh:
                sequencer.write_sequences(windows, seqs, fh)
    print(f"wrote {len(run.views) * len(run.window_sizes)} sequence dump(s) to {run.out}")
    return 0


def _grid_or_fail(run: RunConfig):
    experiments = run.experiments()
    if not experiments:
        raise ConfigError("nothing to run: the prompt/mode/view/window-size grid is empty")
    return experiments


def cmd_detect(run: RunConfig) -> int:
    experiments = _grid_or_fail(run)
    if len(experiments) != 1 or len(run.window_sizes) != 1:
        raise ConfigError(
            "detect scores exactly one prompt, mode, view and window size; use sweep for grids"
        )
    run.validate_files(need_backend=True)
    _echo_config(run)
    data = pipeline.prepare(run)
    backend = make_backend(run.backend)
    audit, verdicts = [], []
    try:
        (_, rows), = pipeline.run_grid(run, backend, data, audit=audit, verdicts=verdicts)
    finally:
        # the audit trail is kept even when the run aborts
        _jsonl(run.out / "prompt_audit.jsonl", audit)
    _jsonl(run.out / "verdicts.jsonl", verdicts)
    atomic_write_text(run.out / "report.csv", report_text(rows, "csv"))
    atomic_write_text(run.out / "report.jsonl", report_text(rows, "jsonl"))
    sys.stdout.write(report_text(rows, "csv"))
    return 0


def cmd_sweep(run: RunConfig) -> int:
    _grid_or_fail(run)
    run.validate_files(need_backend=True)
    _echo_config(run)
    data = pipeline.prepare(run)
    backend = make_backend(run.backend)
    audit, verdicts = [], []
    try:
        results = pipeline.run_grid(run, backend, data, audit=audit, verdicts=verdicts)
    finally:
        _jsonl(run.out / "prompt_audit.jsonl", audit)
    all_rows = []
    for exp, rows in results:
        stem = f"report_{exp.prompt_id.lower()}_{exp.mode}_{exp.view}"
        atomic_write_text(run.out / f"{stem}.csv", report_text(rows, "csv"))
        atomic_write_text(run.out / f"{stem}.jsonl", report_text(rows, "jsonl"))
        all_rows += rows
    _jsonl(run.out / "verdicts.jsonl", verdicts)
    atomic_write_text(run.out / "results.jsonl", report_text(all_rows, "jsonl"))
    atomic_write_text(run.out / "combined.csv", combined_table(all_rows))
    sys.stdout.write(combined_table(all_rows))
    return 0


def cmd_replay_verify(run: RunConfig) -> int:
    experiments = _grid_or_fail(run)
    if run.backend.kind != "replay":
        raise ConfigError("replay-verify needs backend.kind=replay")
    run.validate_files(need_backend=True)
    data = pipeline.prepare(run)
    backend = make_backend(run.backend)
    missing, checked = [], 0
    for exp in experiments:
        for size in exp.window_sizes:
            one = [type(exp)(**{**exp.__dict__, "window_sizes": (size,)})]
            try:
                pipeline.run_grid(run, backend, data, experiments=one)
                checked += 1
            except MissingResponses as exc:
                missing += exc.digests
                print(f"{exp.prompt_id} {exp.mode} {exp.view} w={size}: {len(exc.digests)} missing")
    if missing:
        raise MissingResponses(missing)
    print(f"cassette covers all {checked} run(s)")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        run = resolve_config(args)
        return args.func(run)
    except PipelineError as exc:
        print(f"llmlogad {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
