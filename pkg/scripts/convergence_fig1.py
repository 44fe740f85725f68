"""Per-round prediction error and confusion error of spectral vs majority-vote
initialization at a low labeling rate."""

import argparse

import numpy as np

from optds.io import atomic_write
from optds.pipeline import RunConfig, fit
from optds.synth import SynthConfig, generate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pi", type=float, default=0.2)
    ap.add_argument("--rounds", type=int, default=10)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--out", default="convergence.tsv")
    args = ap.parse_args()

    curves = {}
    for method in ("opt-ds", "mv-ds"):
        err, sq = [], []
        for t in range(args.trials):
            labels, model = generate(SynthConfig(sparsity=args.pi, seed=t))
            res = fit(labels, RunConfig(method, em_rounds=args.rounds, seed=t), model.truth, model.confusions)
            err.append(res.round_errors)
            sq.append(res.round_sq_errors)
        curves[method] = (np.mean(err, axis=0), np.mean(sq, axis=0))

    lines = ["round\tmethod\terror\tsq_error"]
    for method, (e, s) in curves.items():
        lines += [f"{r + 1}\t{method}\t{e[r]:.4f}\t{s[r]:.6f}" for r in range(args.rounds)]
    atomic_write(args.out, "\n".join(lines) + "\n")
    print("\n".join(lines))


if __name__ == "__main__":
    main()
