#!/usr/bin/env python3
"""Plot training curves from metrics.csv files and method summaries from comparison.csv.

    python scripts/plot_metrics.py results/spike/spike_fira.csv results/spike/spike_nolimit.csv -o spike.png
    python scripts/plot_metrics.py --comparison results/ablation/comparison.csv -o ablation.png
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def plot_runs(paths, out):
    fig, (ax_loss, ax_resid) = plt.subplots(1, 2, figsize=(11, 4))
    for path in paths:
        df = pd.read_csv(path)
        label = Path(path).stem
        ax_loss.plot(df["step"], df["loss"], label=label)
        resid_cols = [c for c in df.columns if c.endswith("_resid_norm")]
        if resid_cols:
            ax_resid.plot(df["step"], df[resid_cols].sum(axis=1), label=label)
    ax_loss.set_yscale("log")
    ax_loss.set_xlabel("step")
    ax_loss.set_ylabel("loss")
    ax_resid.set_xlabel("step")
    ax_resid.set_ylabel("sum of residual norms")
    ax_loss.legend()
    ax_resid.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def plot_comparison(path, out):
    df = pd.read_csv(path)
    df["label"] = df.apply(
        lambda r: r["method"] if r["rank"] == 0 else f"{r['method']} r={r['rank']}", axis=1
    )
    df = df.sort_values("median_final_loss")
    fig, ax = plt.subplots(figsize=(8, 0.4 * len(df) + 1.5))
    err = [df["median_final_loss"] - df["min_final_loss"], df["max_final_loss"] - df["median_final_loss"]]
    ax.barh(df["label"], df["median_final_loss"], xerr=err, color="tab:blue", alpha=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("final loss (median, min-max over seeds)")
    ax.invert_yaxis()
    fig.tight_layout()
    fig.savefig(out, dpi=150)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("metrics", nargs="*", help="metrics.csv files written by `fira train`")
    parser.add_argument("--comparison", help="comparison.csv written by `fira compare`")
    parser.add_argument("-o", "--out", default="plot.png")
    args = parser.parse_args()
    if args.comparison:
        plot_comparison(args.comparison, args.out)
    elif args.metrics:
        plot_runs(args.metrics, args.out)
    else:
        parser.error("give metrics files or --comparison")


if __name__ == "__main__":
    main()
