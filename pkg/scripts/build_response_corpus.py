"""Write tests/data/malformed_responses.jsonl and the cassette holding the
reformat answers for the cases that need a second round trip.

Each corpus row: name, input, expected (direct | extracted | reformatted |
unparsable), is_anomaly (expected flag or null), reformat_reply (or null).
"""

import json
import sys
from pathlib import Path

from llmlogad.llm import CassetteWriter, CompletionResponse, digest
from llmlogad.responses import reformat_request

OUT = Path(__file__).resolve().parent.parent / "tests" / "data"

R = "data TLB error interrupt"
M = "Check the memory and CPU usage"
FULL_T = json.dumps({"is_anomaly": True, "reports": R, "preventive_measures": M})
FULL_F = json.dumps({"is_anomaly": False, "reports": "", "preventive_measures": ""})


def ok(flag):
    return json.dumps({"is_anomaly": flag, "reports": "restated", "preventive_measures": "none"})


CASES = [
    # well-formed
    ("direct_true", FULL_T, "direct", True, None),
    ("direct_false", FULL_F, "direct", False, None),
    ("direct_string_yes", '{"is_anomaly": "Yes", "reports": "x", "preventive_measures": "y"}', "direct", True, None),
    ("direct_numeric_zero", '{"is_anomaly": 0, "reports": "", "preventive_measures": ""}', "direct", False, None),
    ("direct_camel_keys", '{"isAnomaly": true, "Reports": "r", "PreventiveMeasures": "p"}', "direct", True, None),
    ("direct_hyphen_keys", '{"is-anomaly": "normal", "reports": "", "preventive-measures": ""}', "direct", False, None),
    ("direct_missing_optional", '{"is_anomaly": "anomalous"}', "direct", True, None),
    ("direct_list_reports", '{"is_anomaly": true, "reports": ["a", "b"], "preventive_measures": ["c"]}', "direct", True, None),
    ("direct_whitespace", "\n\n  " + FULL_T + "  \n", "direct", True, None),
    # prose-wrapped
    ("prose_prefix", "Sure! Here is the result: " + FULL_F, "extracted", False, None),
    ("prose_both_sides", "Analysis done.\n" + FULL_T + "\nLet me know if you need more.", "extracted", True, None),
    ("code_fence_json", "```json\n" + FULL_T + "\n```", "extracted", True, None),
    ("code_fence_bare", "```\n" + FULL_F + "\n```", "extracted", False, None),
    ("fence_in_prose", "Result:\n```json\n" + FULL_T + "\n```\nThanks.", "extracted", True, None),
    ("thought_then_object", "Thought process: the log shows a TLB error, which is fatal.\nOutput: " + FULL_T, "extracted", True, None),
    ("apostrophe_prose", "It's clear the system's fine: " + FULL_F, "extracted", False, None),
    ("braces_in_strings", '{"is_anomaly": true, "reports": "value {x} out of range", "preventive_measures": "use }"}', "direct", True, None),
    ("nested_object", 'Answer {"is_anomaly": false, "reports": {"summary": "ok"}, "preventive_measures": ""}', "extracted", False, None),
    # single quotes and python literals
    ("single_quoted", "{'is_anomaly': True, 'reports': 'parity', 'preventive_measures': 'none'}", "extracted", True, None),
    ("single_quoted_json_literals", "{'is_anomaly': false, 'reports': '', 'preventive_measures': ''}", "extracted", False, None),
    ("mixed_quotes", "{\"is_anomaly\": 'yes', 'reports': \"r\", \"preventive_measures\": 'p'}", "extracted", True, None),
    ("trailing_comma", '{"is_anomaly": true, "reports": "r", "preventive_measures": "p",}', "extracted", True, None),
    ("python_none", "{'is_anomaly': 'normal', 'reports': None, 'preventive_measures': None}", "extracted", False, None),
    # boolean synonyms
    ("flag_anomaly_word", '{"is_anomaly": "anomaly", "reports": "", "preventive_measures": ""}', "direct", True, None),
    ("flag_upper_false", '{"is_anomaly": "FALSE", "reports": "", "preventive_measures": ""}', "direct", False, None),
    ("flag_numeric_one", '{"is_anomaly": 1, "reports": "", "preventive_measures": ""}', "direct", True, None),
    ("flag_spaced_no", '{"is_anomaly": " no ", "reports": "", "preventive_measures": ""}', "direct", False, None),
    # truncated by the output-token cap
    ("truncated_in_string", '{"is_anomaly": true, "reports": "The sequence contains a data TLB error inter', "extracted", True, None),
    ("truncated_after_comma", '{"is_anomaly": false, "reports": "nothing unusual",', "extracted", False, None),
    ("truncated_after_colon", '{"is_anomaly": true, "reports":', "extracted", True, None),
    ("truncated_nested_list", '{"is_anomaly": true, "reports": ["TLB error", "cache parity', "extracted", True, None),
    ("truncated_in_key", '{"is_anomaly": true, "reports": "r", "preventive_mea', "extracted", True, None),
    ("truncated_prose_prefix", 'Here you go: {"is_anomaly": false, "reports": "all normal, no action needed", "preventive_meas', "extracted", False, None),
    ("truncated_escape", '{"is_anomaly": true, "reports": "path C:\\', "extracted", True, None),
    # need the reformat round trip
    ("prose_only_anomalous", "The sequence looks suspicious: the data TLB error interrupt indicates a hardware fault.", "reformatted", True, ok(True)),
    ("prose_only_normal", "These logs are routine informational messages; nothing abnormal.", "reformatted", False, ok(False)),
    ("yaml_like", "is_anomaly: yes\nreports: TLB error\npreventive_measures: replace node", "reformatted", True, ok("yes")),
    ("markdown_table", "| key | value |\n|---|---|\n| is_anomaly | true |", "reformatted", True, "Sure: " + ok(True)),
    ("unknown_flag", '{"is_anomaly": "maybe", "reports": "", "preventive_measures": ""}', "reformatted", False, '{"is_anomaly": "no", "reports": "", "preventive_measures": ""}'),
    ("missing_flag", '{"anomaly_score": 0.9, "reports": "TLB"}', "reformatted", True, ok(True)),
    ("array_reply", '["anomalous", "TLB error"]', "reformatted", True, "```json\n" + ok(True) + "\n```"),
    ("truncated_before_flag", '{"reports": "The sequence shows repeated', "reformatted", False, ok(False)),
    # reformat reply is still prose: stays unresolved
    ("hopeless_prose", "I cannot determine this without more context.", "unparsable", None, "I still cannot determine this."),
    ("hopeless_flag", "Verdict: possibly.", "unparsable", None, '{"is_anomaly": "possibly"}'),
]


def main() -> int:
    OUT.mkdir(parents=True, exist_ok=True)
    corpus = OUT / "malformed_responses.jsonl"
    with corpus.open("w", encoding="utf-8") as fh:
        for name, text, expected, flag, reply in CASES:
            row = {"name": name, "input": text, "expected": expected, "is_anomaly": flag, "reformat_reply": reply}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    cassette = OUT / "reformat_cassette.jsonl"
    cassette.unlink(missing_ok=True)
    # fixed header so the committed file does not change on every rebuild
    cassette.write_text(json.dumps({"meta": {"model_id": "gpt-3.5-turbo", "created_at": "fixture"}}) + "\n")
    writer = CassetteWriter(cassette, "gpt-3.5-turbo")
    for name, text, _, _, reply in CASES:
        if reply is not None:
            writer.append(CompletionResponse(reply, "stop", digest(reformat_request(text))))
    print(f"{len(CASES)} cases -> {corpus}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
