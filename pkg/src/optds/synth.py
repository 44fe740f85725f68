"""Synthetic crowd datasets drawn from the Dawid-Skene model.

Draw order for a given seed is fixed: worker confusions, then true labels,
then labels worker by worker (for each worker: which items it labels, then
the reported classes of those items).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InvalidConfigError
from .model import GroundTruthModel, ObservedLabels, onecoin_confusions

REGIMES = ("binary", "explicit", "one_coin")


@dataclass(frozen=True)
class SynthConfig:
    m: int = 100
    n: int = 1000
    k: int = 2
    sparsity: float = 1.0
    prior: Optional[tuple] = None  # uniform when None
    regime: str = "binary"
    diag_range: tuple = (0.3, 0.9)  # binary
    p_range: tuple = (0.6, 0.9)  # one_coin
    confusions: Optional[np.ndarray] = None  # explicit, shape (m, k, k)
    seed: int = 0

    def with_(self, **kw) -> "SynthConfig":
        return replace(self, **kw)

    def validate(self):
        if self.m < 1 or self.n < 1 or self.k < 2:
            raise InvalidConfigError("need m >= 1, n >= 1, k >= 2")
        if not 0 < self.sparsity <= 1:
            raise InvalidConfigError("sparsity must lie in (0, 1]")
        if self.regime not in REGIMES:
            raise InvalidConfigError(f"unknown regime {self.regime!r}")
        if self.prior is not None:
            w = np.asarray(self.prior, dtype=float)
            if w.shape != (self.k,) or (w <= 0).any() or abs(w.sum() - 1) > 1e-9:
                raise InvalidConfigError("prior must be a positive length-k vector summing to 1")
        if self.regime == "binary":
            lo, hi = self.diag_range
            if self.k != 2 or not 0 <= lo <= hi <= 1:
                raise InvalidConfigError("binary needs k=2 and a diagonal range in [0, 1]")
        if self.regime == "one_coin":
            lo, hi = self.p_range
            if not 0 <= lo <= hi <= 1:
                raise InvalidConfigError("p_range must lie in [0, 1]")
        if self.regime == "explicit":
            c = None if self.confusions is None else np.asarray(self.confusions)
            if c is None or c.shape != (self.m, self.k, self.k):
                raise InvalidConfigError("explicit regime needs confusions of shape (m, k, k)")
            if (c < 0).any() or np.abs(c.sum(axis=1) - 1).max() > 1e-9:
                raise InvalidConfigError("explicit confusions must be column-stochastic")


def draw_confusions(config: SynthConfig, rng) -> np.ndarray:
    m, k = config.m, config.k
    if config.regime == "binary":
        diag = rng.uniform(*config.diag_range, size=(m, 2))
        conf = np.empty((m, 2, 2))
        conf[:, 0, 0], conf[:, 1, 1] = diag[:, 0], diag[:, 1]
        conf[:, 1, 0], conf[:, 0, 1] = 1 - diag[:, 0], 1 - diag[:, 1]
        return conf
    if config.regime == "one_coin":
        return onecoin_confusions(rng.uniform(*config.p_range, size=m), k)
    return np.array(config.confusions, dtype=float)


def generate(config: SynthConfig):
    """Draw ``(labels, model)`` from ``config``; identical output for identical seeds."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    m, n, k = config.m, config.n, config.k
    prior = np.full(k, 1.0 / k) if config.prior is None else np.asarray(config.prior, float)
    conf = draw_confusions(config, rng)
    truth = rng.choice(k, size=n, p=prior)
    cdf = np.cumsum(conf, axis=1)  # (m, k, k) along observed class
    cdf[:, -1, :] = 1.0
    workers, items, labs = [], [], []
    for i in range(m):
        if config.sparsity >= 1.0:
            js = np.arange(n)
        else:
            js = np.flatnonzero(rng.random(n) < config.sparsity)
        u = rng.random(js.size)
        col = cdf[i][:, truth[js]]  # (k, |js|)
        labs.append((u[None, :] >= col).sum(axis=0))
        workers.append(np.full(js.size, i))
        items.append(js)
    labels = ObservedLabels(
        m, n, k, np.concatenate(workers), np.concatenate(items), np.concatenate(labs)
    )
    model = GroundTruthModel(prior, conf, np.full(m, float(config.sparsity)), truth)
    return labels, model
