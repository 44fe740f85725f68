"""Majority voting."""

import numpy as np

from .model import ObservedLabels, Posterior


def vote_counts(labels: ObservedLabels) -> np.ndarray:
    counts = np.zeros((labels.num_items, labels.num_classes))
    np.add.at(counts, (labels.item, labels.label), 1.0)
    return counts


def majority_vote(labels: ObservedLabels, soft: bool = True) -> Posterior:
    """Vote-share posterior per item; items without votes get the uniform row.

    With ``soft=False`` the beliefs are one-hot on the (lowest-index) winner.
    """
    counts = vote_counts(labels)
    k = labels.num_classes
    total = counts.sum(axis=1, keepdims=True)
    beliefs = np.where(total > 0, counts / np.maximum(total, 1), 1.0 / k)
    post = Posterior.from_beliefs(beliefs)
    if soft:
        return post
    return Posterior(np.eye(k)[post.predictions], post.predictions)
