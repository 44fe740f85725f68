"""One-coin model: each worker is right with probability ``p_i`` and otherwise
picks one of the ``k - 1`` wrong classes uniformly.

Initialization uses only pairwise agreement statistics; refinement is EM on
the one-coin likelihood. Sparse data is handled by computing agreement over
co-labeled items and normalizing each worker's accuracy update by the number
of items it labeled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .em import CONVERGE, CONVERGE_MAX_ROUNDS, CONVERGE_TOL
from .errors import DegeneratePairError, NoOverlapError, TooFewWorkersError
from .model import ObservedLabels, Posterior, onecoin_confusions

RHO_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class PairwiseStats:
    stats: np.ndarray  # (m, m), symmetric
    overlap: np.ndarray  # (m, m) co-labeled item counts
    k: int


@dataclass(frozen=True, eq=False)
class OneCoinInit:
    accuracies: np.ndarray
    partners: np.ndarray  # (m, 2): (a_i, b_i)
    reference: int  # the shared sign reference a_1
    flipped: bool


@dataclass
class OneCoinResult:
    accuracies: np.ndarray
    posterior: Posterior
    trace: list

    @property
    def predictions(self):
        return self.posterior.predictions

    def confusions(self, k: int) -> np.ndarray:
        return onecoin_confusions(self.accuracies, k)


def pairwise_stats(labels: ObservedLabels, allow_missing: bool = False) -> PairwiseStats:
    """``N_ab = (k-1)/k * (agreement rate - 1/k)`` over items both workers labeled.

    Pairs with no common item raise :class:`NoOverlapError` unless
    ``allow_missing`` is set, in which case their statistic is 0.
    """
    k = labels.num_classes
    m, n = labels.num_workers, labels.num_items
    ones = np.ones(labels.num_labels)
    z = sparse.csr_matrix((ones, (labels.worker, labels.item * k + labels.label)), (m, n * k))
    present = sparse.csr_matrix((ones, (labels.worker, labels.item)), (m, n))
    agree = (z @ z.T).toarray()
    overlap = (present @ present.T).toarray()
    missing = overlap == 0
    if missing.any() and not allow_missing:
        a, b = np.argwhere(missing)[0]
        raise NoOverlapError(int(a) + 1, int(b) + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(missing, 1.0 / k, agree / np.maximum(overlap, 1))
    return PairwiseStats((k - 1) / k * (rate - 1.0 / k), overlap, k)


def population_pairwise_stats(p, k: int) -> np.ndarray:
    """Expected ``N_ab = (p_a - 1/k)(p_b - 1/k)``; diagonal as for a self-pair."""
    beta = np.asarray(p, dtype=float) - 1.0 / k
    stats = np.outer(beta, beta)
    np.fill_diagonal(stats, ((k - 1) / k) ** 2)
    return stats


def _best_pairs(stats: np.ndarray) -> np.ndarray:
    m = stats.shape[0]
    iu, ju = np.triu_indices(m, 1)
    mag = np.abs(stats[iu, ju])
    partners = np.empty((m, 2), dtype=np.int64)
    for i in range(m):
        cand = np.where((iu != i) & (ju != i), mag, -1.0)
        t = int(np.argmax(cand))
        partners[i] = iu[t], ju[t]
    return partners


def init_accuracies(
    stats,
    k: int,
    reference: str = "shared",
    floor: float = RHO_FLOOR,
) -> OneCoinInit:
    """Moment estimate of every worker's accuracy from pairwise statistics.

    For worker ``i`` take the pair ``(a_i, b_i)`` (neither equal to ``i``)
    with the largest ``|N_ab|``; then ``|p_i - 1/k| = sqrt(N_ia N_ib / N_ab)``.
    The sign comes from ``N_{i, a_1}`` where ``a_1`` is worker 0's partner
    (``reference="shared"``) or from ``N_{i, a_i}`` (``reference="per_worker"``).
    If the mean accuracy falls below ``1/k`` all estimates are mirrored to
    ``2/k - p``. Results are clamped to ``[floor, 1 - floor]``.
    """
    n_ab = stats.stats if isinstance(stats, PairwiseStats) else np.asarray(stats, dtype=float)
    m = n_ab.shape[0]
    if m < 3:
        raise TooFewWorkersError(f"need at least 3 workers, got {m}")
    partners = _best_pairs(n_ab)
    a, b = partners[:, 0], partners[:, 1]
    idx = np.arange(m)
    denom = n_ab[a, b]
    if (denom == 0).any():
        i = int(np.flatnonzero(denom == 0)[0])
        raise DegeneratePairError(f"strongest pair for worker {i + 1} has zero statistic")
    ratio = np.maximum(n_ab[idx, a] * n_ab[idx, b] / denom, 0.0)
    if reference == "shared":
        sign = np.sign(n_ab[idx, a[0]])
    elif reference == "per_worker":
        sign = np.sign(n_ab[idx, a])
    else:
        raise ValueError(f"unknown reference {reference!r}")
    p = 1.0 / k + sign * np.sqrt(ratio)
    flipped = bool(p.mean() < 1.0 / k)
    if flipped:
        p = 2.0 / k - p
    p = np.clip(p, floor, 1.0 - floor)
    return OneCoinInit(p, partners, int(a[0]), flipped)


def _log_scores(labels: ObservedLabels, p: np.ndarray) -> np.ndarray:
    k = labels.num_classes
    log_hit = np.log(p)
    log_miss = np.log((1.0 - p) / (k - 1))
    scores = np.zeros((labels.num_items, k))
    # every label adds log_miss to all classes, then the reported class is corrected
    np.add.at(scores, labels.item, log_miss[labels.worker][:, None])
    np.add.at(scores, (labels.item, labels.label), (log_hit - log_miss)[labels.worker])
    return scores


def onecoin_e_step(labels: ObservedLabels, p: np.ndarray) -> Posterior:
    s = _log_scores(labels, p)
    s -= s.max(axis=1, keepdims=True)
    q = np.exp(s)
    return Posterior.from_beliefs(q / q.sum(axis=1, keepdims=True))


def onecoin_m_step(labels: ObservedLabels, posterior, floor: float = RHO_FLOOR) -> np.ndarray:
    q = posterior.beliefs if isinstance(posterior, Posterior) else np.asarray(posterior)
    hits = np.bincount(
        labels.worker, weights=q[labels.item, labels.label], minlength=labels.num_workers
    )
    n_i = labels.labels_per_worker()
    p = np.where(n_i > 0, hits / np.maximum(n_i, 1), 1.0 / labels.num_classes)
    return np.clip(p, floor, 1.0 - floor)


def onecoin_log_likelihood(labels: ObservedLabels, p: np.ndarray) -> float:
    s = _log_scores(labels, p)[labels.labels_per_item() > 0]
    top = s.max(axis=1, keepdims=True)
    return float((top[:, 0] + np.log(np.exp(s - top).sum(axis=1))).sum())


def run_onecoin_em(
    labels: ObservedLabels, p_init, rounds=10, floor: float = RHO_FLOOR
) -> OneCoinResult:
    """Alternate the one-coin E- and M-steps; ``rounds`` may be ``"converge"``."""
    until_converged = rounds == CONVERGE
    max_rounds = CONVERGE_MAX_ROUNDS if until_converged else int(rounds)
    if max_rounds < 1:
        raise ValueError("rounds must be >= 1")
    p = np.clip(np.asarray(p_init, dtype=float), floor, 1.0 - floor)
    trace = [onecoin_log_likelihood(labels, p)]
    for _ in range(max_rounds):
        post = onecoin_e_step(labels, p)
        p = onecoin_m_step(labels, post, floor)
        trace.append(onecoin_log_likelihood(labels, p))
        if until_converged and abs(trace[-1] - trace[-2]) < CONVERGE_TOL:
            break
    return OneCoinResult(p, post, trace)


def onecoin(
    labels: ObservedLabels,
    rounds: int = 10,
    reference: str = "shared",
    allow_missing: bool = False,
) -> OneCoinResult:
    """Moment initialization followed by one-coin EM."""
    init = init_accuracies(
        pairwise_stats(labels, allow_missing), labels.num_classes, reference
    )
    return run_onecoin_em(labels, init.accuracies, rounds)
