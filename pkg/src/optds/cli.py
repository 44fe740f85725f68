"""Command line entry point: ``optds synth | run | sweep``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .em import CONVERGE
from .errors import DataError, NumericalError
from .pipeline import METHODS, SWEEP_VARIABLES, RunConfig, run, sweep, wrap_synthetic
from .synth import REGIMES, SynthConfig, generate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rounds(value: str):
    if value == CONVERGE:
        return value
    try:
        r = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or '{CONVERGE}'") from None
    if r < 1:
        raise argparse.ArgumentTypeError("em rounds must be >= 1")
    return r


def _add_synth_args(p):
    p.add_argument("--m", type=int, default=100, help="number of workers")
    p.add_argument("--n", type=int, default=1000, help="number of items")
    p.add_argument("--k", type=int, default=2, help="number of classes")
    p.add_argument("--pi", type=float, default=1.0, help="labeling probability")
    p.add_argument("--regime", choices=[r for r in REGIMES if r != "explicit"], default="binary")
    p.add_argument("--diag-range", type=float, nargs=2, default=(0.3, 0.9))
    p.add_argument("--p-range", type=float, nargs=2, default=(0.6, 0.9))
    p.add_argument("--data-seed", type=int, default=0)


def _add_run_args(p, method_default="opt-ds"):
    p.add_argument("--method", choices=METHODS, default=method_default)
    p.add_argument("--em-rounds", type=_rounds, default=10)
    p.add_argument("--threshold", type=float, default=1e-6, help="confusion entry floor")
    p.add_argument("--seed", type=int, default=0, help="partition / tensor restart seed")
    p.add_argument("--restarts", type=int, default=30)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--hard-vote", action="store_true", help="one-hot majority-vote posterior")
    p.add_argument("--onecoin-reference", choices=("shared", "per_worker"), default="shared")
    p.add_argument("--tie-break", choices=("diagonal", "random"), default="diagonal",
                   help="column matching rule for contested classes")


def _run_config(args, k=None) -> RunConfig:
    cfg = RunConfig(
        method=args.method,
        k=k,
        em_rounds=args.em_rounds,
        delta=args.threshold,
        seed=args.seed,
        restarts=args.restarts,
        iters=args.iters,
        soft_vote=not args.hard_vote,
        onecoin_reference=args.onecoin_reference,
        tie_break=args.tie_break,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _synth_config(args) -> SynthConfig:
    return SynthConfig(
        m=args.m,
        n=args.n,
        k=args.k,
        sparsity=args.pi,
        regime=args.regime,
        diag_range=tuple(args.diag_range),
        p_range=tuple(args.p_range),
        seed=args.data_seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="optds", description="Crowd label aggregation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _add_synth_args(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("run", help="aggregate a labels file")
    _add_run_args(p)
    p.add_argument("--k", type=int, default=None, help="number of classes (default: max label)")
    p.add_argument("--labels", required=True)
    p.add_argument("--truth", default=None)
    p.add_argument("--true-confusions", default=None)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("sweep", help="vary one parameter over synthetic datasets")
    _add_synth_args(p)
    _add_run_args(p)
    p.add_argument("--variable", choices=SWEEP_VARIABLES, required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--methods", default=None, help="comma-separated; defaults to --method")
    p.add_argument("--out", required=True, help="output table (tab separated)")
    return parser


def _cmd_synth(args):
    labels, model = generate(_synth_config(args))
    data = wrap_synthetic(labels)
    out = Path(args.out)
    io.write_labels(out / "labels.csv", data)
    io.write_truth(out / "truth.csv", data.item_ids, model.truth)
    io.write_confusions(out / "confusions_true.csv", data.worker_ids, model.confusions)
    print(f"wrote {labels.num_labels} labels to {out}")


def _cmd_run(args):
    cfg = _run_config(args, args.k)
    data = io.read_labels(args.labels, args.k)
    truth = io.read_truth(args.truth) if args.truth else None
    true_conf = None
    if args.true_confusions:
        true_conf = io.read_confusions(
            args.true_confusions, data.worker_index(), data.labels.num_classes
        )
    result = run(cfg, data, truth, true_conf, out_dir=args.out)
    rep = result.report
    msg = f"{rep.method}: {rep.num_items} items, {rep.num_workers} workers"
    if rep.prediction_error_percent is not None:
        msg += f", error {rep.prediction_error_percent:.2f}% on {rep.evaluated_items} items"
    if rep.fallback:
        msg += " (spectral init fell back to majority vote)"
    print(msg)


def _parse_values(variable, text):
    vals = [v.strip() for v in text.split(",") if v.strip()]
    if not vals:
        raise UsageError("--values is empty")
    try:
        if variable == "n":
            return [int(v) for v in vals]
        if variable == "em_rounds":
            return [_rounds(v) for v in vals]
        return [float(v) for v in vals]
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise UsageError(f"bad --values: {exc}") from None


def _cmd_sweep(args):
    cfg = _run_config(args)
    values = _parse_values(args.variable, args.values)
    methods = args.methods.split(",") if args.methods else None
    if methods and any(m not in METHODS for m in methods):
        raise UsageError(f"--methods must be drawn from {METHODS}")
    _, means = sweep(
        _synth_config(args), cfg, args.variable, values, args.trials, methods, args.out
    )
    for row in means:
        print(f"{row['variable']}={row['value']}\t{row['method']}\terror={row['error']:.3f}%"
              f"\tsq_error={row['sq_error']:.4g}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    handler = {"synth": _cmd_synth, "run": _cmd_run, "sweep": _cmd_sweep}[args.command]
    try:
        handler(args)
    except UsageError as exc:
        print(f"optds: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"optds: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"optds: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
