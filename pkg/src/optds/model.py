"""Core data types for crowd labels and the Dawid-Skene generative model.

Conventions used throughout the package:

* Internally every index (worker, item, class) is 0-based. The 1-based
  convention only appears at the edges: :meth:`ObservedLabels.from_entries`,
  :meth:`ObservedLabels.to_entries` and the text file formats in
  :mod:`optds.io`.
* A stack of confusion matrices is an array ``conf`` of shape ``(m, k, k)``
  with ``conf[i, c, l]`` the probability that worker ``i`` reports class ``c``
  for an item of true class ``l``. Columns sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DuplicateLabelError,
    EmptyDatasetError,
    InvalidRhoError,
    LabelOutOfRangeError,
    ZeroEntryError,
)

ABSENT = -1


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True).reshape(-1)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ObservedLabels:
    """Sparse worker x item assignment of categorical labels.

    Stored in coordinate form (``worker[t]``, ``item[t]``, ``label[t]``), all
    0-based. A missing (worker, item) pair means "not labeled".
    """

    num_workers: int
    num_items: int
    num_classes: int
    worker: np.ndarray
    item: np.ndarray
    label: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "worker", _frozen(self.worker, np.int64))
        object.__setattr__(self, "item", _frozen(self.item, np.int64))
        object.__setattr__(self, "label", _frozen(self.label, np.int64))
        if not (self.worker.size == self.item.size == self.label.size):
            raise ValueError("worker, item and label arrays differ in length")
        if self.num_workers < 1 or self.num_items < 1:
            raise ValueError("need at least one worker and one item")
        if self.num_classes < 2:
            raise ValueError("need at least two classes")

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_triples(cls, m: int, n: int, k: int, triples: Iterable, validate=True):
        """Build from 1-based ``(worker, item, label)`` triples."""
        arr = np.array(list(triples), dtype=np.int64).reshape(-1, 3)
        obj = cls(m, n, k, arr[:, 0] - 1, arr[:, 1] - 1, arr[:, 2] - 1)
        if validate:
            obj.validate()
        return obj

    @classmethod
    def from_entries(cls, m: int, n: int, k: int, entries: Mapping, validate=True):
        """Build from a 1-based mapping ``{(worker, item): label}``."""
        return cls.from_triples(
            m, n, k, [(i, j, c) for (i, j), c in entries.items()], validate=validate
        )

    @classmethod
    def from_matrix(cls, matrix, k: int):
        """Build from an ``m x n`` array of 0-based labels, ``-1`` for absent."""
        matrix = np.asarray(matrix)
        w, j = np.nonzero(matrix != ABSENT)
        obj = cls(matrix.shape[0], matrix.shape[1], k, w, j, matrix[w, j])
        obj.validate()
        return obj

    @classmethod
    def from_one_hot(cls, z):
        """Inverse of :meth:`one_hot`: rows equal to zero are absent."""
        z = np.asarray(z)
        present = z.sum(axis=2) > 0
        w, j = np.nonzero(present)
        return cls(z.shape[0], z.shape[1], z.shape[2], w, j, z[w, j].argmax(axis=1))

    # -- views -------------------------------------------------------------

    @property
    def num_labels(self) -> int:
        return int(self.label.size)

    def to_entries(self) -> dict:
        return {
            (int(i) + 1, int(j) + 1): int(c) + 1
            for i, j, c in zip(self.worker, self.item, self.label)
        }

    def matrix(self) -> np.ndarray:
        """Dense ``m x n`` label matrix, ``-1`` where absent."""
        out = np.full((self.num_workers, self.num_items), ABSENT, dtype=np.int64)
        out[self.worker, self.item] = self.label
        return out

    def one_hot(self) -> np.ndarray:
        """The ``z_ij`` vector view, shape ``(m, n, k)``; zero vector when absent."""
        z = np.zeros((self.num_workers, self.num_items, self.num_classes))
        z[self.worker, self.item, self.label] = 1.0
        return z

    def labels_per_worker(self) -> np.ndarray:
        return np.bincount(self.worker, minlength=self.num_workers)

    def labels_per_item(self) -> np.ndarray:
        return np.bincount(self.item, minlength=self.num_items)

    def sparsity(self) -> np.ndarray:
        """Fraction of items each worker labeled (reporting only)."""
        return self.labels_per_worker() / self.num_items

    def validate(self):
        validate(self)

    def replace_labels(self, label) -> "ObservedLabels":
        return ObservedLabels(
            self.num_workers, self.num_items, self.num_classes, self.worker, self.item, label
        )

    def subset_workers(self, workers) -> "ObservedLabels":
        """Keep only the listed workers, re-indexed in the given order."""
        workers = np.asarray(workers, dtype=np.int64)
        remap = np.full(self.num_workers, -1, dtype=np.int64)
        remap[workers] = np.arange(workers.size)
        keep = remap[self.worker] >= 0
        return ObservedLabels(
            workers.size,
            self.num_items,
            self.num_classes,
            remap[self.worker[keep]],
            self.item[keep],
            self.label[keep],
        )


def validate(labels: ObservedLabels) -> None:
    """Raise if ``labels`` breaks any ObservedLabels invariant."""
    if labels.num_labels == 0:
        raise EmptyDatasetError("dataset holds no labels")
    m, n, k = labels.num_workers, labels.num_items, labels.num_classes
    bad = (
        (labels.label < 0)
        | (labels.label >= k)
        | (labels.worker < 0)
        | (labels.worker >= m)
        | (labels.item < 0)
        | (labels.item >= n)
    )
    if bad.any():
        t = int(np.flatnonzero(bad)[0])
        raise LabelOutOfRangeError(
            int(labels.worker[t]) + 1, int(labels.item[t]) + 1, int(labels.label[t]) + 1, k
        )
    key = labels.worker * n + labels.item
    uniq, counts = np.unique(key, return_counts=True)
    if (counts > 1).any():
        dup = int(uniq[np.argmax(counts > 1)])
        raise DuplicateLabelError(dup // n + 1, dup % n + 1)


@dataclass(frozen=True, eq=False)
class Posterior:
    """Row-stochastic ``n x k`` beliefs and their argmax predictions (0-based)."""

    beliefs: np.ndarray
    predictions: np.ndarray

    @classmethod
    def from_beliefs(cls, beliefs):
        beliefs = np.asarray(beliefs, dtype=float)
        # np.argmax returns the first maximal index: lowest class wins ties
        return cls(beliefs, beliefs.argmax(axis=1))


@dataclass(frozen=True, eq=False)
class GroundTruthModel:
    """Parameters and latent labels of a generated dataset."""

    prior: np.ndarray  # (k,)
    confusions: np.ndarray  # (m, k, k)
    sparsity: np.ndarray  # (m,)
    truth: np.ndarray  # (n,), 0-based

    def __post_init__(self):
        m, k, _ = self.confusions.shape
        if self.prior.shape != (k,) or self.sparsity.shape != (m,):
            raise ValueError("inconsistent model dimensions")
        if not (self.sparsity > 0).all():
            raise ValueError("every worker needs positive sparsity")


def check_prior(w, atol=1e-9) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if (w <= 0).any() or abs(w.sum() - 1.0) > atol:
        raise ValueError(f"not a valid class prior: {w}")
    return w


def check_confusions(conf, atol=1e-9) -> np.ndarray:
    conf = np.asarray(conf, dtype=float)
    if conf.ndim == 2:
        conf = conf[None]
    if conf.ndim != 3 or conf.shape[1] != conf.shape[2]:
        raise ValueError("confusions must have shape (m, k, k)")
    if (conf < 0).any() or (conf > 1).any():
        raise ValueError("confusion entries must lie in [0, 1]")
    if np.abs(conf.sum(axis=1) - 1.0).max() > atol:
        raise ValueError("confusion columns must sum to 1")
    return conf


def uniform_confusions(m: int, k: int) -> np.ndarray:
    return np.full((m, k, k), 1.0 / k)


def onecoin_confusions(p, k: int) -> np.ndarray:
    """Confusions with ``p_i`` on the diagonal and ``(1-p_i)/(k-1)`` elsewhere."""
    p = np.asarray(p, dtype=float)
    off = (1.0 - p) / (k - 1)
    conf = np.broadcast_to(off[:, None, None], (p.size, k, k)).copy()
    idx = np.arange(k)
    conf[:, idx, idx] = p[:, None]
    return conf


def clamp_normalize(conf, delta: float) -> np.ndarray:
    """Raise entries below ``delta`` to ``delta``, then rescale columns to sum 1."""
    conf = np.maximum(np.asarray(conf, dtype=float), delta)
    return conf / conf.sum(axis=-2, keepdims=True)


def mean_kl_separation(model: GroundTruthModel) -> float:
    """Minimum over ordered class pairs of the sparsity-weighted mean column KL."""
    conf = model.confusions
    if (conf <= 0).any():
        raise ZeroEntryError("KL divergence undefined for zero confusion entries")
    m, k, _ = conf.shape
    logc = np.log(conf)
    # kl[i, l, l'] = sum_c mu_ilc (log mu_ilc - log mu_il'c)
    kl = np.einsum("icl,icl->il", conf, logc)[:, :, None] - np.einsum(
        "icl,icL->ilL", conf, logc
    )
    avg = np.einsum("i,ilL->lL", model.sparsity, kl) / m
    off = ~np.eye(k, dtype=bool)
    return float(avg[off].min())


def inject_label_noise(
    labels: ObservedLabels, rho: float, seed: int, return_mask: bool = False
):
    """Replace each observed label, with probability ``k * rho``, by a uniform class.

    Absent entries stay absent. With ``return_mask`` the boolean array of
    replaced positions is returned alongside.
    """
    k = labels.num_classes
    if rho < 0 or k * rho > 1:
        raise InvalidRhoError(f"need 0 <= k*rho <= 1, got k*rho={k * rho}")
    rng = np.random.default_rng(seed)
    replace = rng.random(labels.num_labels) < k * rho
    draws = rng.integers(0, k, size=labels.num_labels)
    new = np.where(replace, draws, labels.label)
    out = labels.replace_labels(new)
    return (out, replace) if return_mask else out
