"""Plain-text file formats.

``labels``      ``worker_id,item_id,label`` per line
``truth``       ``item_id,label``
``predictions`` ``item_id,label``
``confusions``  ``worker_id,true_label,reported_label,probability``

Ids and labels are positive integers; lines starting with ``#`` and blank
lines are skipped. Worker and item ids are densified to contiguous indices in
sorted id order, and the maps are kept so output uses the original ids.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DuplicateLabelError, EmptyDatasetError, LabelOutOfRangeError, ParseError
from .model import ObservedLabels


@dataclass(frozen=True, eq=False)
class LabelData:
    labels: ObservedLabels
    worker_ids: np.ndarray  # worker_ids[index] = external id
    item_ids: np.ndarray

    def item_index(self) -> dict:
        return {int(x): j for j, x in enumerate(self.item_ids)}

    def worker_index(self) -> dict:
        return {int(x): i for i, x in enumerate(self.worker_ids)}


def _rows(path, width):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != width:
                raise ParseError(lineno, f"expected {width} fields, got {len(parts)}")
            try:
                yield lineno, [int(p) for p in parts]
            except ValueError:
                raise ParseError(lineno, f"non-integer field in {line!r}") from None


def read_labels(path, k: Optional[int] = None) -> LabelData:
    """Parse a labels file; ``k`` defaults to the largest label seen (at least 2)."""
    triples = []
    for lineno, (w, j, c) in _rows(path, 3):
        if w < 1 or j < 1:
            raise ParseError(lineno, "ids must be positive integers")
        if c < 1 or (k is not None and c > k):
            raise LabelOutOfRangeError(w, j, c, k)
        triples.append((w, j, c))
    if not triples:
        raise EmptyDatasetError(f"{path}: no labels")
    arr = np.array(triples, dtype=np.int64)
    worker_ids, widx = np.unique(arr[:, 0], return_inverse=True)
    item_ids, jidx = np.unique(arr[:, 1], return_inverse=True)
    if k is None:
        k = max(2, int(arr[:, 2].max()))
    key = widx * len(item_ids) + jidx
    uniq, first, counts = np.unique(key, return_index=True, return_counts=True)
    if (counts > 1).any():
        t = first[np.argmax(counts > 1)]
        raise DuplicateLabelError(int(arr[t, 0]), int(arr[t, 1]))
    labels = ObservedLabels(len(worker_ids), len(item_ids), k, widx, jidx, arr[:, 2] - 1)
    labels.validate()
    return LabelData(labels, worker_ids, item_ids)


def read_truth(path) -> dict:
    """Map external item id to 1-based label; items may be missing."""
    truth = {}
    for lineno, (j, c) in _rows(path, 2):
        if j < 1 or c < 1:
            raise ParseError(lineno, "ids and labels must be positive integers")
        if j in truth:
            raise ParseError(lineno, f"duplicate item id {j}")
        truth[j] = c
    return truth


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_labels(path, data: LabelData):
    lab = data.labels
    lines = [
        f"{data.worker_ids[i]},{data.item_ids[j]},{c + 1}"
        for i, j, c in zip(lab.worker, lab.item, lab.label)
    ]
    atomic_write(path, "\n".join(lines) + "\n")


def write_truth(path, item_ids, labels0):
    """``labels0`` are 0-based classes aligned with ``item_ids``."""
    atomic_write(path, "".join(f"{j},{int(c) + 1}\n" for j, c in zip(item_ids, labels0)))


write_predictions = write_truth


def write_confusions(path, worker_ids, conf: np.ndarray):
    m, k, _ = conf.shape
    out = ["# worker_id,true_label,reported_label,probability"]
    for i in range(m):
        for l in range(k):
            for c in range(k):
                out.append(f"{worker_ids[i]},{l + 1},{c + 1},{conf[i, c, l]:.17g}")
    atomic_write(path, "\n".join(out) + "\n")


def read_confusions(path, worker_index: dict, k: int) -> np.ndarray:
    """Confusions for the workers in ``worker_index`` (external id to index)."""
    conf = np.full((len(worker_index), k, k), np.nan)
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ParseError(lineno, "expected 4 fields")
            try:
                w, l, c, p = int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])
            except ValueError:
                raise ParseError(lineno, "malformed field") from None
            if not (1 <= l <= k and 1 <= c <= k):
                raise ParseError(lineno, "class index out of range")
            if w in worker_index:
                conf[worker_index[w], c - 1, l - 1] = p
    if np.isnan(conf).any():
        raise ParseError(0, "confusion file does not cover every worker")
    return conf
