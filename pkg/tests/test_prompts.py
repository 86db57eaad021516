import difflib
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from llmlogad.errors import ConfigError, InvalidInjection
from llmlogad.prompts import (
    INJECTION_HEADER,
    KEY_PHRASE,
    InjectionConfig,
    PromptRequest,
    PromptTemplate,
    Shot,
    audit_record,
    build_prompt,
    canonical_templates,
    draw_shots,
    injection_block,
    load_template,
    parse_template_text,
    render_list_literal,
)
from llmlogad.sequencer import LogSequence

from conftest import GOLDEN, bgl, records_from

FORMAT = (
    "Output format: Please note that return back in following json format, "
    "include keys: is_anomaly, reports, preventive_measures"
)

# one content sequence shared by every golden file
SEQUENCE = LogSequence(
    0,
    "content",
    (
        "instruction cache parity error corrected",
        "generating core.2275",
        'ciod: LOGIN chdir(/p/gb1/"stella") failed: No such file or directory',
        "data TLB error interrupt",
    ),
)
SHOTS = tuple(
    Shot((c,), "normal")
    for c in (
        "total of 1 ddr error(s) detected and corrected",
        "CE sym 2, at 0x0b85eee0, mask 0x05",
        "instruction cache parity error corrected",
        "generating core.862",
        "shutdown complete",
    )
)


def golden_cases():
    p1, p2 = canonical_templates()
    for tmpl in (p1, p2):
        yield tmpl, "zero_shot", InjectionConfig("zero_shot")
        yield tmpl, "few_shot", InjectionConfig("few_shot", "normal", SHOTS)


@pytest.mark.parametrize("tmpl,mode,inj", list(golden_cases()), ids=lambda v: getattr(v, "id", v))
def test_golden_bytes(tmpl, mode, inj):
    text = build_prompt(tmpl, inj, SEQUENCE).text
    golden = (GOLDEN / f"{tmpl.id.lower()}_{mode}.txt").read_bytes()
    assert text.encode("utf-8") == golden
    assert tmpl.format_statement.count(KEY_PHRASE) == 1
    assert text.count(KEY_PHRASE) == 1


@pytest.mark.parametrize("tmpl", canonical_templates(), ids=lambda t: t.id)
def test_zero_few_diff_is_injection_block(tmpl):
    zero = build_prompt(tmpl, InjectionConfig("zero_shot"), SEQUENCE).text
    few = build_prompt(tmpl, InjectionConfig("few_shot", "normal", SHOTS), SEQUENCE).text
    assert len(few) > len(zero)
    block = injection_block(SHOTS)
    ops = [op for op in difflib.SequenceMatcher(None, zero, few, autojunk=False).get_opcodes() if op[0] != "equal"]
    assert len(ops) == 1 and ops[0][0] == "insert"
    _, i1, _, j1, j2 = ops[0]
    assert few[j1:j2] == block
    assert zero[:i1] + block + zero[i1:] == few


def test_canonical_templates():
    p1, p2 = canonical_templates()
    assert "Output your thought process" in p1.task_description
    assert p1.task_description != p2.task_description
    assert p1.format_statement == p2.format_statement == FORMAT
    assert "preventive measures" in p2.task_description


def test_layout():
    p1, _ = canonical_templates()
    text = build_prompt(p1, InjectionConfig("zero_shot"), LogSequence(0, "content", ("a",))).text
    assert text == f'{p1.task_description}\n{FORMAT}\n\nLog sequence: ["a"]'


def test_list_literal():
    assert render_list_literal(["a", "b"]) == '["a", "b"]'
    assert render_list_literal([]) == "[]"
    # hand-escaped: a "q" \ b  ->  "a \"q\" \\ b"
    assert render_list_literal(['a "q" \\ b']) == '["a \\"q\\" \\\\ b"]'


@given(st.lists(st.text(st.characters(blacklist_categories=("Cs", "Cc")), max_size=20), max_size=6))
def test_list_literal_unescapes(items):
    # without control characters the escaping coincides with JSON string syntax
    assert json.loads(render_list_literal(items)) == items


def test_injection_invariants():
    with pytest.raises(InvalidInjection):
        InjectionConfig("zero_shot", shots=SHOTS)
    with pytest.raises(InvalidInjection):
        InjectionConfig("few_shot")
    with pytest.raises(InvalidInjection):
        InjectionConfig("few_shot", "abnormal", SHOTS)
    with pytest.raises(InvalidInjection):
        InjectionConfig("few_shot", "normal", SHOTS[:4])
    mixed = SHOTS + tuple(Shot(s.items, "anomalous") for s in SHOTS)
    assert len(InjectionConfig("few_shot", "mixed", mixed).shots) == 10
    with pytest.raises(ConfigError):
        InjectionConfig("one_shot")


def test_injection_block_format():
    block = injection_block([Shot(("x", "y"), "anomalous")])
    assert block == f'{INJECTION_HEADER}\n["x", "y"] → anomalous'


def test_request_invariants():
    with pytest.raises(ConfigError):
        PromptRequest("t", temperature=-0.1)
    with pytest.raises(ConfigError):
        PromptRequest("t", max_output_tokens=0)
    with pytest.raises(ConfigError):
        PromptRequest("t", top_choices=2)
    r = PromptRequest("t")
    assert (r.model_id, r.temperature, r.max_output_tokens, r.top_choices) == ("gpt-3.5-turbo", 0.0, 100, 1)


def test_template_validation():
    with pytest.raises(ConfigError):
        PromptTemplate("P1", "task", "include keys: is_anomaly, reports")
    with pytest.raises(ConfigError):
        PromptTemplate("P1", "task is_anomaly, reports, preventive_measures", FORMAT)
    with pytest.raises(ConfigError):
        PromptTemplate("P3", "task", FORMAT)
    with pytest.raises(ConfigError):
        parse_template_text("[task_description]\nonly", "P1")
    with pytest.raises(ConfigError):
        parse_template_text("stray\n[task_description]\nx\n[format_statement]\n" + FORMAT, "P1")


def test_user_template_file(tmp_path):
    path = tmp_path / "mine.txt"
    path.write_text(f"# mine\n[task_description]\nLook.\n  indented\n\n[format_statement]\n{FORMAT}\n")
    tmpl = load_template(path, "P2")
    assert tmpl.task_description == "Look.\n  indented"


def _history():
    flags = [i % 7 == 3 for i in range(200)]
    return records_from(bgl(f"event {i}", anomalous=f, i=i) for i, f in enumerate(flags))


@pytest.mark.parametrize("kind,labels", [("normal", {"normal"}), ("abnormal", {"anomalous"}), ("mixed", {"normal", "anomalous"})])
def test_draw_shots(kind, labels):
    hist = _history()
    shots = draw_shots(hist, injection_type=kind, shot_count=5, seed=3)
    assert {s.label for s in shots} == labels
    assert len(shots) == (10 if kind == "mixed" else 5)
    assert shots == draw_shots(hist, injection_type=kind, shot_count=5, seed=3)
    by_content = {r.content: r.label for r in hist}
    assert all(by_content[s.items[0]] == s.label for s in shots)
    InjectionConfig("few_shot", kind, shots, 5)


def test_draw_window_shots():
    hist = _history()
    shots = draw_shots(hist, injection_type="abnormal", granularity="window", window_size=10, seed=1)
    assert all(len(s.items) == 10 for s in shots)


def test_draw_shots_needs_enough_history():
    with pytest.raises(InvalidInjection):
        draw_shots(_history()[:3], injection_type="abnormal")


def test_audit_record():
    req = PromptRequest("héllo")
    rec = audit_record(req, "d" * 64, prompt_id="P1")
    assert rec["bytes"] == 6 and rec["prompt_id"] == "P1" and rec["digest"] == "d" * 64
