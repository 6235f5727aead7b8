"""Train ChemTime on a preset and dump per-step embeddings and margins for a few test samples.

One CSV per sample (t, e0.., distance), the raw material for trajectory plots.

    python3 scripts/dump_trajectories.py --preset 0 --n 8 --out-dir runs/trajectories
"""

import argparse
from pathlib import Path

import numpy as np

from chemtime.encoder import ChemTimeClassifier, forward
from chemtime.simgen import generate_dataset, preset_config


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--preset", type=int, default=0)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="runs/trajectories")
    args = p.parse_args()

    train, test = generate_dataset(preset_config(args.preset))
    clf = ChemTimeClassifier(seed=args.seed).fit(train)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s in test.samples[: args.n]:
        traj = forward(clf.model, s)
        t = np.arange(1, s.length + 1)
        cols = np.column_stack([t, traj.points, traj.distances])
        header = "t," + ",".join(f"e{i}" for i in range(traj.points.shape[1])) + ",distance"
        np.savetxt(out / f"{s.id}.csv", cols, delimiter=",", header=header, comments="", fmt="%.10g")
        flips = np.flatnonzero(np.diff(traj.distances > 0)) + 2
        print(f"{s.id} analyte={test.analyte_names[int(np.argmax(s.concentrations))]} "
              f"final={traj.distances[-1]:+.3f} sign changes at t={flips.tolist()}")  # fmt: skip


if __name__ == "__main__":
    main()
