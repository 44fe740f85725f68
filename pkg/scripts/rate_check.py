"""Summed squared confusion error against the number of items, with its log-log slope."""

import argparse

import numpy as np

from optds.pipeline import RunConfig, sweep
from optds.synth import SynthConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=30)
    ap.add_argument("--ns", default="250,500,1000,2000,4000")
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--tie-break", choices=("diagonal", "random"), default="diagonal")
    ap.add_argument("--out", default="rate.tsv")
    args = ap.parse_args()
    ns = [int(x) for x in args.ns.split(",")]
    _, means = sweep(
        SynthConfig(m=args.m), RunConfig("opt-ds", tie_break=args.tie_break), "n", ns, args.trials,
        out_path=args.out,
    )
    sq = [row["sq_error"] for row in means]
    for n, v in zip(ns, sq):
        print(f"n={n}\tsum_sq_error={v:.5f}")
    print(f"slope {np.polyfit(np.log(ns), np.log(sq), 1)[0]:.3f}")


if __name__ == "__main__":
    main()
