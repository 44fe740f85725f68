"""Prediction error of each method on the binary synthetic regime, by labeling rate."""

import argparse

import numpy as np

from optds.pipeline import RunConfig, fit, prediction_error, write_table
from optds.synth import SynthConfig, generate

METHODS = ("opt-ds", "mv-ds", "mv")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pis", default="0.2,0.5,1.0")
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--em-rounds", type=int, default=10)
    ap.add_argument("--out", default="table1.tsv")
    args = ap.parse_args()

    rows = []
    print("pi\t" + "\t".join(METHODS))
    for pi in (float(x) for x in args.pis.split(",")):
        errs = {m: [] for m in METHODS}
        for t in range(args.trials):
            labels, model = generate(SynthConfig(sparsity=pi, seed=t))
            for m in METHODS:
                res = fit(labels, RunConfig(m, em_rounds=args.em_rounds, seed=t))
                e = prediction_error(res.predictions, model.truth)
                errs[m].append(e)
                rows.append(dict(variable="pi", value=pi, trial=t, method=m, error=e,
                                 sq_error=float("nan"), rounds=args.em_rounds, fallback=int(res.fallback is not None), seconds=0.0))
        print(f"{pi}\t" + "\t".join(f"{np.mean(errs[m]):.2f}" for m in METHODS))
    write_table(args.out, rows)


if __name__ == "__main__":
    main()
