"""Converged Opt-D&S error as the confusion floor varies."""

import argparse

from optds.em import CONVERGE
from optds.pipeline import RunConfig, sweep
from optds.synth import SynthConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pi", type=float, default=0.5)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--out", default="threshold.tsv")
    args = ap.parse_args()
    deltas = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
    _, means = sweep(
        SynthConfig(sparsity=args.pi), RunConfig("opt-ds", em_rounds=CONVERGE), "delta", deltas, args.trials,
        out_path=args.out,
    )
    for row in means:
        print(f"delta={row['value']:g}\terror={row['error']:.3f}%\trounds={row['rounds']:.1f}")


if __name__ == "__main__":
    main()
