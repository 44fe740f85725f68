"""Method drivers, evaluation metrics, single runs and parameter sweeps."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import io
from .baselines import majority_vote
from .em import CONVERGE, DEFAULT_DELTA, majority_vote_init, run_em
from .errors import IllConditionedMomentsError, NotPositiveDefiniteError, TooFewWorkersError
from .model import ObservedLabels, Posterior
from .onecoin import onecoin
from .spectral import DEFAULT_ITERS, DEFAULT_RESTARTS, spectral_init
from .synth import SynthConfig, generate

log = logging.getLogger(__name__)

METHODS = ("opt-ds", "mv-ds", "mv", "onecoin")
SWEEP_VARIABLES = ("n", "pi", "delta", "em_rounds")


@dataclass(frozen=True)
class RunConfig:
    method: str = "opt-ds"
    k: Optional[int] = None
    em_rounds: Union[int, str] = 10
    delta: float = DEFAULT_DELTA
    seed: int = 0
    restarts: int = DEFAULT_RESTARTS
    iters: int = DEFAULT_ITERS
    soft_vote: bool = True
    onecoin_reference: str = "shared"
    tie_break: str = "diagonal"

    def validate(self, labels: Optional[ObservedLabels] = None):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.em_rounds != CONVERGE and int(self.em_rounds) < 1:
            raise ValueError("em_rounds must be >= 1 or 'converge'")
        if not self.delta > 0:
            raise ValueError("threshold must be positive")
        if labels is not None and self.method in ("opt-ds", "onecoin") and labels.num_workers < 3:
            raise TooFewWorkersError(f"{self.method} needs at least 3 workers")


@dataclass
class FitResult:
    method: str
    posterior: Posterior
    confusions: Optional[np.ndarray]
    trace: list
    init_confusions: Optional[np.ndarray] = None
    prior: Optional[np.ndarray] = None
    fallback: Optional[str] = None
    round_errors: list = field(default_factory=list)
    round_sq_errors: list = field(default_factory=list)

    @property
    def predictions(self):
        return self.posterior.predictions


def fit(
    labels: ObservedLabels,
    config: RunConfig,
    truth: Optional[np.ndarray] = None,
    true_confusions: Optional[np.ndarray] = None,
) -> FitResult:
    """Run one method. With ``truth`` / ``true_confusions`` (0-based, ``-1`` for
    unknown items) the per-round prediction and confusion errors are recorded."""
    config.validate(labels)
    if config.method == "mv":
        post = majority_vote(labels, soft=config.soft_vote)
        return FitResult("mv", post, None, [])
    if config.method == "onecoin":
        res = onecoin(
            labels, config.em_rounds, config.onecoin_reference, allow_missing=True
        )
        return FitResult(
            "onecoin", res.posterior, res.confusions(labels.num_classes), res.trace
        )

    fallback = prior = None
    if config.method == "opt-ds":
        try:
            sres = spectral_init(
                labels,
                config.seed,
                config.delta,
                config.restarts,
                config.iters,
                tie_break=config.tie_break,
            )
            init, prior = sres.confusions, sres.prior
        except (IllConditionedMomentsError, NotPositiveDefiniteError) as exc:
            log.warning("spectral initialization failed (%s); using majority vote", exc)
            fallback = f"mv-ds: {exc}"
            init = majority_vote_init(labels, config.delta, config.soft_vote)
    else:
        init = majority_vote_init(labels, config.delta, config.soft_vote)

    errs, sq = [], []

    def on_round(r, post, conf):
        if truth is not None:
            errs.append(prediction_error(post.predictions, truth))
        if true_confusions is not None:
            sq.append(confusion_sq_error(conf, true_confusions))

    state = run_em(labels, init, config.em_rounds, on_round)
    return FitResult(
        config.method, state.posterior, state.confusions, state.trace, init, prior,
        fallback, errs, sq,
    )


def prediction_error(predictions, truth) -> float:
    """Percent of mismatches over items whose truth is known (``truth >= 0``)."""
    truth = np.asarray(truth)
    known = truth >= 0
    if not known.any():
        return float("nan")
    return float(100.0 * np.mean(np.asarray(predictions)[known] != truth[known]))


def confusion_sq_error(estimate, truth) -> float:
    """Sum over workers of the squared Frobenius distance between confusions."""
    return float(((np.asarray(estimate) - np.asarray(truth)) ** 2).sum())


@dataclass
class MetricsReport:
    method: str
    num_workers: int
    num_items: int
    num_classes: int
    num_labels: int
    em_rounds: Union[int, str, None]
    threshold: float
    seed: int
    prediction_error_percent: Optional[float] = None
    evaluated_items: int = 0
    confusion_sq_error: Optional[float] = None
    loglik_trace: list = field(default_factory=list)
    loglik_prior_constant: str = "dropped (-log(k) per labeled item omitted)"
    fallback: Optional[str] = None
    wall_time_s: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


@dataclass
class RunResult:
    fit: FitResult
    report: MetricsReport
    data: io.LabelData


def truth_vector(data: io.LabelData, truth_map: Optional[dict]) -> Optional[np.ndarray]:
    """0-based truth aligned with ``data`` items, ``-1`` where unknown."""
    if truth_map is None:
        return None
    out = np.full(data.labels.num_items, -1, dtype=np.int64)
    for j, ext in enumerate(data.item_ids):
        c = truth_map.get(int(ext))
        if c is not None:
            out[j] = c - 1
    return out


def run(
    config: RunConfig,
    data: io.LabelData,
    truth_map: Optional[dict] = None,
    true_confusions: Optional[np.ndarray] = None,
    out_dir=None,
) -> RunResult:
    """Fit ``config.method`` and optionally write predictions, confusions and report."""
    labels = data.labels
    truth = truth_vector(data, truth_map)
    start = time.perf_counter()
    res = fit(labels, config, truth, true_confusions)
    elapsed = time.perf_counter() - start
    report = MetricsReport(
        method=config.method,
        num_workers=labels.num_workers,
        num_items=labels.num_items,
        num_classes=labels.num_classes,
        num_labels=labels.num_labels,
        em_rounds=None if config.method == "mv" else config.em_rounds,
        threshold=config.delta,
        seed=config.seed,
        loglik_trace=[float(x) for x in res.trace],
        fallback=res.fallback,
        wall_time_s=elapsed,
    )
    if truth is not None:
        report.prediction_error_percent = prediction_error(res.predictions, truth)
        report.evaluated_items = int((truth >= 0).sum())
    if true_confusions is not None and res.confusions is not None:
        report.confusion_sq_error = confusion_sq_error(res.confusions, true_confusions)
    if out_dir is not None:
        out = Path(out_dir)
        io.write_predictions(out / "predictions.csv", data.item_ids, res.predictions)
        if res.confusions is not None:
            io.write_confusions(out / "confusions.csv", data.worker_ids, res.confusions)
        io.atomic_write(out / "report.json", report.to_json() + "\n")
    return RunResult(res, report, data)


def wrap_synthetic(labels: ObservedLabels) -> io.LabelData:
    """Attach 1-based external ids to generated labels."""
    return io.LabelData(
        labels,
        np.arange(1, labels.num_workers + 1),
        np.arange(1, labels.num_items + 1),
    )


def run_synthetic(config: RunConfig, synth: SynthConfig):
    labels, model = generate(synth)
    data = wrap_synthetic(labels)
    truth_map = {j + 1: int(c) + 1 for j, c in enumerate(model.truth)}
    return run(config, data, truth_map, model.confusions), model


def sweep(
    synth: SynthConfig,
    config: RunConfig,
    variable: str,
    values: Sequence,
    trials: int,
    methods: Optional[Sequence[str]] = None,
    out_path=None,
):
    """Rerun methods on fresh synthetic data for every value of ``variable``.

    Trial ``t`` uses data seed ``synth.seed + t`` and method seed
    ``config.seed + t``. Returns ``(rows, means)``; each is a list of dicts.
    """
    if variable not in SWEEP_VARIABLES:
        raise ValueError(f"variable must be one of {SWEEP_VARIABLES}")
    if not values:
        raise ValueError("values must be non-empty")
    methods = list(methods or [config.method])
    rows = []
    for value in values:
        for t in range(trials):
            s = synth.with_(seed=synth.seed + t)
            c = replace(config, seed=config.seed + t)
            if variable == "n":
                s = s.with_(n=int(value))
            elif variable == "pi":
                s = s.with_(sparsity=float(value))
            elif variable == "delta":
                c = replace(c, delta=float(value))
            else:
                c = replace(c, em_rounds=value if value == CONVERGE else int(value))
            labels, model = generate(s)
            for method in methods:
                start = time.perf_counter()
                res = fit(labels, replace(c, method=method), model.truth, model.confusions)
                rows.append(
                    dict(
                        variable=variable,
                        value=value,
                        trial=t,
                        method=method,
                        error=prediction_error(res.predictions, model.truth),
                        sq_error=(
                            confusion_sq_error(res.confusions, model.confusions)
                            if res.confusions is not None
                            else float("nan")
                        ),
                        rounds=len(res.trace) - 1 if res.trace else 0,
                        fallback=int(res.fallback is not None),
                        seconds=time.perf_counter() - start,
                    )
                )
    means = []
    for value in values:
        for method in methods:
            sel = [r for r in rows if r["value"] == value and r["method"] == method]
            means.append(
                dict(
                    variable=variable,
                    value=value,
                    trial="mean",
                    method=method,
                    error=float(np.mean([r["error"] for r in sel])),
                    sq_error=float(np.mean([r["sq_error"] for r in sel])),
                    rounds=float(np.mean([r["rounds"] for r in sel])),
                    fallback=int(sum(r["fallback"] for r in sel)),
                    seconds=float(np.mean([r["seconds"] for r in sel])),
                )
            )
    if out_path is not None:
        write_table(out_path, rows + means)
    return rows, means


TABLE_COLUMNS = ("variable", "value", "trial", "method", "error", "sq_error", "rounds", "fallback", "seconds")


def write_table(path, rows):
    """Tab-separated, one header line, plot-ready."""
    lines = ["\t".join(TABLE_COLUMNS)]
    for r in rows:
        lines.append("\t".join(_fmt(r[c]) for c in TABLE_COLUMNS))
    io.atomic_write(path, "\n".join(lines) + "\n")


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def read_table(path) -> list:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        return [dict(zip(header, line.rstrip("\n").split("\t"))) for line in fh if line.strip()]

