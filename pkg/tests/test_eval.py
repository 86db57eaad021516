import itertools
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from llmlogad.drain import parse_corpus
from llmlogad.errors import ConfigError, MissingResponses
from llmlogad.evaluation import (
    ConfusionCounts,
    ExperimentConfig,
    ResultRow,
    accumulate,
    combined_table,
    compute_metrics,
    f1_score,
    format_metric,
    load_reference_results,
    read_report,
    report_text,
    run_experiment,
    write_report,
)
from llmlogad.llm import Cassette, ReplayBackend, StubBackend
from llmlogad.prompts import canonical_templates

from conftest import bgl, records_from

P1, P2 = canonical_templates()
CELLS = list(itertools.product(range(6), repeat=4))


def oracle(tp, fp, tn, fn):
    # written independently of the module: F1 from counts, not from P and R
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    s = tn / (tn + fp) if tn + fp else 0.0
    f = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return f, p, r, s


def test_metrics_oracle_1296():
    assert len(CELLS) == 1296
    for cell in CELLS:
        m = compute_metrics(ConfusionCounts(*cell))
        for got, want in zip((m.f1, m.precision, m.recall, m.specificity), oracle(*cell)):
            assert abs(got - want) <= 1e-12, cell


def test_zero_denominators():
    assert compute_metrics(ConfusionCounts()) == compute_metrics(ConfusionCounts(0, 0, 0, 0))
    m = compute_metrics(ConfusionCounts())
    assert (m.f1, m.precision, m.recall, m.specificity) == (0.0, 0.0, 0.0, 0.0)
    assert compute_metrics(ConfusionCounts(tn=3)).specificity == 1.0
    assert f1_score(0.0, 0.0) == 0.0


def test_accumulate():
    c = ConfusionCounts()
    for pred, actual in [(True, True), (True, False), (False, False), (False, True), (True, True)]:
        c = accumulate(c, pred, actual)
    assert c == ConfusionCounts(tp=2, fp=1, tn=1, fn=1) and c.total == 5


def test_format_metric_half_up():
    assert format_metric(0.73976) == "0.740"
    assert format_metric(0.0005) == "0.001"
    assert format_metric(0.0625) == "0.063"  # banker's rounding would give 0.062
    assert format_metric(1.0) == "1.000"
    assert format_metric(0) == "0.000"


def test_reference_fixture_arithmetic():
    rows = [r for r in load_reference_results() if r["method"] == "llm"]
    assert len([r for r in rows if r["table"] == "comparison"]) == 20
    assert len([r for r in rows if r["table"] == "injection"]) == 10
    for r in rows:
        assert abs(f1_score(r["precision"], r["recall"]) - r["f1"]) <= 0.002, r


@pytest.mark.parametrize("p,r,f", [(0.587, 1.0, "0.740"), (0.455, 1.0, "0.625")])
def test_worked_examples(p, r, f):
    assert format_metric(f1_score(p, r)) == f


@given(st.tuples(*[st.integers(0, 50)] * 4))
def test_row_f1_consistent(cell):
    row = ResultRow.build(ExperimentConfig(), 10, ConfusionCounts(*cell), windows_evaluated=sum(cell), unparsable_count=0)
    assert row.f1 == f1_score(row.precision, row.recall)


# run_experiment


def subset(flags):
    return records_from(bgl(f"job {i} step", anomalous=f, i=i) for i, f in enumerate(flags))


FLAGS = [i in (3, 25, 26) for i in range(35)]


def keyword_stub(replies):
    """Answer by window: the first content item identifies the window."""

    def respond(text):
        if text.startswith("Please format"):
            return replies.get("reformat", "still prose")
        seq = text.rsplit("Log sequence: ", 1)[1]
        first = int(re.search(r"job (\d+)", seq).group(1))
        return replies.get(first, '{"is_anomaly": false}')

    return StubBackend(respond)


def cfg(**kw):
    base = dict(window_sizes=(10,), prompt_id="P2")
    base.update(kw)
    return ExperimentConfig(**base)


def test_counts_and_conservation():
    backend = keyword_stub({0: '{"is_anomaly": true}', 10: '{"is_anomaly": true}'})
    verdicts, audit = [], []
    (row,) = run_experiment(cfg(), subset(FLAGS), backend=backend, template=P2, verdicts=verdicts, audit=audit)
    # windows: [0-9] anomalous, [10-19] normal, [20-29] anomalous, [30-34] normal partial
    assert row.counts == ConfusionCounts(tp=1, fp=1, tn=1, fn=1)
    assert row.windows_evaluated == 4 == row.counts.total + row.excluded_count
    assert [v["label"] for v in verdicts] == ["anomalous", "normal", "anomalous", "normal"]
    assert verdicts[3]["partial"] is True
    assert len(audit) == 4 and all(a["kind"] == "detect" for a in audit)


def test_exclude_partial():
    (row,) = run_experiment(cfg(exclude_partial=True), subset(FLAGS), backend=keyword_stub({}), template=P2)
    assert row.windows_evaluated == 3


@pytest.mark.parametrize(
    "policy,counts,excluded",
    [
        ("anomalous", ConfusionCounts(tp=1, fp=1, tn=1, fn=1), 0),
        ("normal", ConfusionCounts(tp=0, fp=0, tn=2, fn=2), 0),
        ("excluded", ConfusionCounts(tp=0, fp=0, tn=1, fn=1), 2),
    ],
)
def test_unparsable_policy(policy, counts, excluded):
    # windows 0 and 10 answer in prose and the reformat reply is prose too
    backend = keyword_stub({0: "hmm", 10: "unsure"})
    verdicts = []
    (row,) = run_experiment(cfg(unparsable_policy=policy), subset(FLAGS), backend=backend, template=P2, verdicts=verdicts)
    assert row.counts == counts
    assert row.unparsable_count == 2 and row.excluded_count == excluded
    assert row.windows_evaluated == row.counts.total + row.excluded_count


def test_reformat_recovers():
    backend = keyword_stub({0: "it is an anomaly", "reformat": '{"is_anomaly": "yes"}'})
    verdicts, audit = [], []
    (row,) = run_experiment(cfg(), subset(FLAGS), backend=backend, template=P2, verdicts=verdicts, audit=audit)
    assert verdicts[0]["parse_path"] == "reformatted" and verdicts[0]["predicted"] is True
    assert row.unparsable_count == 0
    assert [a["kind"] for a in audit].count("reformat") == 1


def test_missing_responses_listed(tmp_path):
    backend = ReplayBackend(Cassette())
    with pytest.raises(MissingResponses) as exc:
        run_experiment(cfg(), subset(FLAGS), backend=backend, template=P2)
    assert len(exc.value.digests) == 4 and exc.value.exit_code == 3


def test_few_shot_and_event_view():
    recs = subset([i % 9 == 0 for i in range(120)])
    parsed, templates = parse_corpus(recs)
    by_line = {p.line_no: p for p in parsed}
    seen = []

    def respond(text):
        seen.append(text)
        return '{"is_anomaly": false}'

    config = cfg(mode="few_shot", view="event", injection_type="mixed", window_sizes=(10, 20))
    rows = run_experiment(
        config, recs[60:], backend=StubBackend(respond), template=P2,
        parsed=by_line, templates=templates, history=recs[:60],
    )
    assert [r.window_size for r in rows] == [10, 20]
    assert all("Here are some historical logs" in t for t in seen)
    assert all("<*>" not in t.rsplit("Log sequence: ", 1)[1] for t in seen)


def test_template_mismatch():
    with pytest.raises(ConfigError):
        run_experiment(cfg(prompt_id="P1"), subset(FLAGS), backend=keyword_stub({}), template=P2)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(window_sizes=())
    with pytest.raises(ConfigError):
        ExperimentConfig(view="tree")
    with pytest.raises(ConfigError):
        ExperimentConfig(unparsable_policy="ignore")


def _rows():
    out = []
    for size, cell in [(10, (3, 1, 5, 0)), (20, (0, 0, 0, 0)), (30, (2, 2, 2, 2))]:
        for mode in ("zero_shot", "few_shot"):
            out.append(ResultRow.build(cfg(mode=mode), size, ConfusionCounts(*cell), windows_evaluated=sum(cell), unparsable_count=0))
    return out


def test_report_round_trip(tmp_path):
    rows = _rows()
    write_report(rows, tmp_path / "r.jsonl", "jsonl")
    assert read_report(tmp_path / "r.jsonl") == rows
    write_report(rows, tmp_path / "r.csv", "csv")
    back = read_report(tmp_path / "r.csv")
    assert [r.counts for r in back] == [r.counts for r in rows]
    assert [format_metric(r.f1) for r in back] == [format_metric(r.f1) for r in rows]
    assert "0.857" in report_text(rows, "csv")  # f1 of (3, 1, 5, 0): 6/7


def test_combined_table_shape():
    text = combined_table(_rows())
    lines = text.splitlines()
    assert lines[0] == "window_size,metric,bgl/P2/zero_shot/content/normal,bgl/P2/few_shot/content/normal"
    assert len(lines) == 1 + 3 * 4
    assert [line.split(",")[1] for line in lines[1:5]] == ["F", "P", "R", "S"]


def test_report_rejects_empty():
    with pytest.raises(ValueError):
        report_text([])
    with pytest.raises(ConfigError):
        report_text(_rows(), "xml")
