#!/usr/bin/env python3
"""Plot mean MAE vs ratio r per method from an aggregates.csv file.

Usage: tools/plot_results.py <out-dir-or-aggregates.csv> [plot.png]
"""

import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    path = Path(sys.argv[1])
    if path.is_dir():
        path = path / "aggregates.csv"
    out = Path(sys.argv[2]) if len(sys.argv) > 2 else path.with_suffix(".png")

    series = defaultdict(list)  # method -> [(r, mean, lo, hi)]
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            series[row["method"]].append(
                (
                    float(row["r"]),
                    float(row["mean_mae"]),
                    float(row["ci_low"]),
                    float(row["ci_high"]),
                )
            )

    fig, ax = plt.subplots(figsize=(6, 4))
    for method, points in sorted(series.items()):
        points.sort()
        rs = [p[0] for p in points]
        means = [p[1] for p in points]
        lo = [p[1] - p[2] for p in points]
        hi = [p[3] - p[1] for p in points]
        ax.errorbar(rs, means, yerr=[lo, hi], marker="o", capsize=3, label=method)
    ax.set_xlabel("ratio r = n_t / n_s")
    ax.set_ylabel("mean MAE")
    ax.set_xscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
