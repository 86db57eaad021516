"""Run the full prompt x mode x view x window grid from a cassette and print
the combined table next to the published LLM rows for the same cells.

    python scripts/run_grid.py --config run.yaml --cassette c.jsonl --out results/
"""

import argparse
import sys
from pathlib import Path

from llmlogad.config import RunConfig, load_document, set_dotted
from llmlogad.evaluation import combined_table, format_metric, load_reference_results, write_report
from llmlogad.llm import Cassette, ReplayBackend
from llmlogad.pipeline import prepare, run_grid


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True)
    ap.add_argument("--cassette", required=True)
    ap.add_argument("--out", default="results")
    args = ap.parse_args(argv)
    doc = load_document(args.config)
    set_dotted(doc, "prompts.ids", ["P1", "P2"])
    set_dotted(doc, "prompts.modes", ["zero_shot", "few_shot"])
    run = RunConfig.from_document(doc)
    data = prepare(run)
    results = run_grid(run, ReplayBackend(Cassette.load(args.cassette)), data)
    rows = [r for _, rs in results for r in rs]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(rows, out / "grid.csv", "csv")
    (out / "combined.csv").write_text(combined_table(rows))
    print(combined_table(rows))

    # published LLM rows use P2 and are keyed by dataset and shot setting
    published = {
        (r["dataset"], r["setting"], r["window_size"]): r
        for r in load_reference_results()
        if r["method"] == "llm" and r["table"] == "comparison"
    }
    print("window prompt mode        F(ours) F(published)")
    for r in rows:
        ref = published.get((r.dataset, r.mode, r.window_size))
        if ref is not None and r.prompt_id == "P2":
            print(f"{r.window_size:>6} {r.prompt_id:<6} {r.mode:<11} {format_metric(r.f1):>7} {format_metric(ref['f1']):>12}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
