"""Write a BGL-layout synthetic log for smoke runs and timing.

    python scripts/make_synthetic_corpus.py out.log --lines 100000 --seed 1
"""

import argparse
import sys

from llmlogad import synthetic


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("path")
    ap.add_argument("--lines", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--anomaly-rate", type=float, default=0.05)
    args = ap.parse_args(argv)
    lines = synthetic.generate(args.lines, seed=args.seed, anomaly_rate=args.anomaly_rate)
    synthetic.write(args.path, lines)
    print(f"{args.lines} lines -> {args.path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
