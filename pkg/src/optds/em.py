"""EM refinement of Dawid-Skene confusion matrices under a uniform class prior.

All products over workers are accumulated as sums of logs. The marginal
log-likelihood omits the uniform prior: each labeled item's ``-log k`` is
dropped and unlabeled items, whose full contribution is exactly zero, are
skipped (see :data:`PRIOR_CONSTANT_DROPPED`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import logsumexp

from .baselines import majority_vote
from .errors import ZeroProbabilityError
from .model import ObservedLabels, Posterior, clamp_normalize

PRIOR_CONSTANT_DROPPED = True
CONVERGE = "converge"
CONVERGE_TOL = 1e-10
CONVERGE_MAX_ROUNDS = 500
DEFAULT_DELTA = 1e-6


def _log_scores(labels: ObservedLabels, conf: np.ndarray) -> np.ndarray:
    """``s[j, l] = sum_i log conf[i, z_ij, l]`` over observed labels."""
    with np.errstate(divide="ignore"):
        logc = np.log(conf)
    contrib = logc[labels.worker, labels.label]  # (nnz, k)
    scores = np.zeros((labels.num_items, labels.num_classes))
    np.add.at(scores, labels.item, contrib)
    impossible = np.isneginf(scores).all(axis=1)
    if impossible.any():
        j = int(np.flatnonzero(impossible)[0])
        raise ZeroProbabilityError(
            f"item {j + 1} has zero likelihood under every class"
        )
    return scores


def e_step(labels: ObservedLabels, conf: np.ndarray) -> Posterior:
    scores = _log_scores(labels, conf)
    # unlabeled items have all-zero scores and therefore a uniform row
    scores -= scores.max(axis=1, keepdims=True)
    q = np.exp(scores)
    q /= q.sum(axis=1, keepdims=True)
    return Posterior.from_beliefs(q)


def m_step(labels: ObservedLabels, posterior) -> np.ndarray:
    """Maximize the expected complete log-likelihood; empty columns become uniform."""
    q = posterior.beliefs if isinstance(posterior, Posterior) else np.asarray(posterior)
    m, k = labels.num_workers, labels.num_classes
    counts = np.zeros((m, k, k))
    np.add.at(counts, (labels.worker, labels.label), q[labels.item])
    denom = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        conf = np.where(denom > 0, counts / denom, 1.0 / k)
    return conf


def log_marginal_likelihood(labels: ObservedLabels, conf: np.ndarray) -> float:
    labeled = labels.labels_per_item() > 0
    return float(logsumexp(_log_scores(labels, conf)[labeled], axis=1).sum())


@dataclass
class EmState:
    confusions: np.ndarray
    posterior: Posterior
    log_marginal: float
    iteration: int
    trace: list = field(default_factory=list)
    converged: bool = False

    @property
    def predictions(self) -> np.ndarray:
        return self.posterior.predictions


RoundCallback = Callable[[int, Posterior, np.ndarray], None]


def run_em(
    labels: ObservedLabels,
    init_confusions: np.ndarray,
    rounds: Union[int, str] = 10,
    on_round: Optional[RoundCallback] = None,
) -> EmState:
    """Alternate E- and M-steps starting from ``init_confusions``.

    ``rounds`` is a positive integer or ``"converge"`` (stop once the
    log-likelihood moves by less than 1e-10, at most 500 rounds). ``trace``
    holds the log-likelihood of the initial point and after every round.
    ``on_round(r, posterior, confusions)`` is called after round ``r`` with the
    E-step posterior and the M-step confusions of that round.
    """
    until_converged = rounds == CONVERGE
    if until_converged:
        max_rounds = CONVERGE_MAX_ROUNDS
    else:
        max_rounds = int(rounds)
        if max_rounds < 1:
            raise ValueError("rounds must be >= 1")
    conf = np.asarray(init_confusions, dtype=float)
    trace = [log_marginal_likelihood(labels, conf)]
    converged = False
    r = 0
    for r in range(1, max_rounds + 1):
        post = e_step(labels, conf)
        conf = m_step(labels, post)
        trace.append(log_marginal_likelihood(labels, conf))
        if on_round is not None:
            on_round(r, post, conf)
        if until_converged and abs(trace[-1] - trace[-2]) < CONVERGE_TOL:
            converged = True
            break
    return EmState(conf, post, trace[-1], r, trace, converged)


def majority_vote_init(
    labels: ObservedLabels, delta: float = DEFAULT_DELTA, soft: bool = True
) -> np.ndarray:
    """Initial confusions from one M-step on the majority-vote posterior."""
    return clamp_normalize(m_step(labels, majority_vote(labels, soft=soft)), delta)
