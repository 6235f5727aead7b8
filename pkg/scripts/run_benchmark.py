"""Benchmark the default roster on the synthetic presets; write results, ranks and frontier tables.

    python3 scripts/run_benchmark.py --presets 0-10 --out-dir runs/benchmark
"""

import argparse
import logging
from pathlib import Path

from chemtime.evaluation import (
    ModelSpec,
    average_ranks,
    frontier_from_results,
    run_benchmark,
    write_frontier,
    write_ranks,
    write_results,
)
from chemtime.models import DEFAULT_ROSTER
from chemtime.simgen import N_PRESETS, generate_dataset, preset_config


def parse_range(text):
    out = []
    for part in text.split(","):
        lo, _, hi = part.partition("-")
        out.extend(range(int(lo), int(hi or lo) + 1))
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--presets", default=f"0-{N_PRESETS - 1}")
    p.add_argument("--models", default=",".join(DEFAULT_ROSTER))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--kernels", type=int, default=1000)
    p.add_argument("--out-dir", default="runs/benchmark")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    pairs = [generate_dataset(preset_config(i)) for i in parse_range(args.presets)]
    specs = [ModelSpec(m, {"n_kernels": args.kernels} if m == "rocket" else {}) for m in args.models.split(",")]
    records = run_benchmark(specs, pairs, seed=args.seed, jobs=args.jobs)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_results(records, out / "results.csv")
    print(write_ranks(average_ranks(records), out / "ranks.csv"))
    print(write_frontier(frontier_from_results(records), out / "frontier.csv"))


if __name__ == "__main__":
    main()
