"""Record a cassette for a run config without any network, answering every
prompt with a keyword heuristic. Useful for exercising replay end to end.

    python scripts/build_cassette.py --config run.yaml --cassette c.jsonl
"""

import argparse
import re
import sys

from llmlogad.config import RunConfig, load_document
from llmlogad.llm import CassetteWriter, RecordingBackend, StubBackend
from llmlogad.pipeline import prepare, run_grid

KEYWORDS = re.compile(r"error|fatal|fail|exception|interrupt", re.I)
NORMAL = '{"is_anomaly": false, "reports": "", "preventive_measures": ""}'


def respond(text: str) -> str:
    if text.startswith("Please format"):
        return NORMAL
    seq = text.rsplit("Log sequence: ", 1)[-1]
    if KEYWORDS.search(seq):
        return '{"is_anomaly": true, "reports": "error keywords present", "preventive_measures": "inspect the node"}'
    return NORMAL


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--cassette", required=True)
    args = ap.parse_args(argv)
    run = RunConfig.from_document(load_document(args.config))
    data = prepare(run)
    writer = CassetteWriter(args.cassette, run.backend.model_id)
    results = run_grid(run, RecordingBackend(StubBackend(respond), writer), data)
    print(f"{sum(len(rows) for _, rows in results)} run(s) recorded -> {args.cassette}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
