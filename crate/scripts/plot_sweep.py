#!/usr/bin/env python3
"""Render OG / CV curves from a sweep output directory.

Each hyperparameter cell is drawn as a light line (mean over its seeds);
the best cell from summary.csv, when one exists, is drawn dark. Usage:

    python3 scripts/plot_sweep.py out/gridworld_cbp_sweep [-o sweep.png]
"""

import argparse
import csv
import re
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_run(path):
    iters, og, cv = [], [], []
    with open(path) as fh:
        for row in csv.DictReader(line for line in fh if not line.startswith("#")):
            iters.append(int(row["iter"]))
            og.append(float(row["og_running"]))
            cv.append(float(row["cv_running"]))
    return iters, og, cv


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("sweep_dir", type=Path)
    parser.add_argument("-o", "--out", type=Path, default=None)
    args = parser.parse_args()

    summary = {}
    best_cell = None
    with open(args.sweep_dir / "summary.csv") as fh:
        for row in csv.DictReader(fh):
            summary[int(row["cell"])] = row["label"]
            if row["best"] == "1":
                best_cell = int(row["cell"])

    by_cell = defaultdict(list)
    for path in sorted((args.sweep_dir / "runs").glob("cell*_seed*.csv")):
        match = re.match(r"cell(\d+)_seed", path.name)
        if match:
            by_cell[int(match.group(1))].append(read_run(path))

    fig, (ax_og, ax_cv) = plt.subplots(1, 2, figsize=(11, 4))
    for cell, runs in sorted(by_cell.items()):
        iters = runs[0][0]
        mean_og = [sum(r[1][i] for r in runs) / len(runs) for i in range(len(iters))]
        mean_cv = [sum(r[2][i] for r in runs) / len(runs) for i in range(len(iters))]
        is_best = cell == best_cell
        style = dict(
            color="C3" if is_best else "C0",
            alpha=1.0 if is_best else 0.25,
            lw=2.0 if is_best else 1.0,
            zorder=3 if is_best else 1,
        )
        label = summary.get(cell, str(cell)) if is_best else None
        ax_og.plot(iters, mean_og, label=label, **style)
        ax_cv.plot(iters, mean_cv, label=label, **style)

    ax_og.set_xlabel("iteration")
    ax_og.set_ylabel("average optimality gap")
    ax_cv.set_xlabel("iteration")
    ax_cv.set_ylabel("average constraint violation (signed)")
    ax_cv.axhline(0.0, color="k", lw=0.5)
    if best_cell is not None:
        ax_og.legend(loc="upper right", fontsize=8)
    fig.suptitle(args.sweep_dir.name)
    fig.tight_layout()

    out = args.out or args.sweep_dir / "sweep.png"
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
