"""Run the desk-scale debiasing benchmark end to end.

Trains the proposed model, the no-labels ablation, and the beta-VAE baseline
(3 seeds each, 20 epochs) on the biased glyphs data, evaluates every cell,
and renders the aggregate report. Completed cells are skipped on rerun.

Usage:
    python scripts/run_benchmark.py [--root OUT] [--seeds 0,1,2] [--epochs 20]
"""
import argparse
import sys
from pathlib import Path

from debiasvae.benchmark import run_benchmark
from debiasvae.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--root", default="benchmark_out")
    parser.add_argument("--seeds", default="0,1,2")
    parser.add_argument("--epochs", type=int, default=20)
    args = parser.parse_args()

    seeds = [int(s) for s in args.seeds.split(",")]
    results = run_benchmark(args.root, seeds=seeds, epochs=args.epochs)
    print(f"results in {results}")
    code = cli_main(["report", "--in", str(results), "--out", str(Path(args.root) / "report")])
    if code == 0:
        print(f"report in {Path(args.root) / 'report'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
