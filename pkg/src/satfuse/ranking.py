"""Distribution-separability feature ranking.

The separability score of a feature is the mean pairwise distance between
class-conditional means divided by the mean of class-conditional standard
deviations. Features are min-max normalized over the full sample first so
reported deltas are comparable across features; the score itself is
invariant under positive affine transforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .dataset import LabeledSet, to_unit
from .errors import DegenerateInputError


@dataclass
class RankingEntry:
    feature: str
    delta_mean: float
    delta_sigma: float
    d_s: float


@dataclass
class RankingTable:
    entries: list
    threshold: float

    def selected(self):
        return [e for e in self.entries if e.d_s >= self.threshold]


def _minmax(values):
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi > lo:
        return (values - lo) / (hi - lo)
    return np.zeros_like(values)


def class_stats(values, labels, num_classes):
    """Per-class population (mean, std) on min-max normalized values."""
    values = _minmax(values)
    labels = np.asarray(labels)
    means, stds = [], []
    for k in range(num_classes):
        sel = values[labels == k]
        if sel.size == 0:
            raise DegenerateInputError(f"class {k} has no samples")
        means.append(float(sel.mean()))
        stds.append(float(sel.std()))
    return means, stds


def separability(means, stds):
    """(delta_mean, delta_sigma, d_s) from per-class stats; needs K >= 2."""
    if len(means) < 2:
        raise ValueError("separability needs at least 2 classes")
    pairs = [abs(a - b) for a, b in combinations(means, 2)]
    delta_mean = float(np.mean(pairs))
    delta_sigma = float(np.mean(stds))
    if delta_sigma > 0:
        d_s = delta_mean / delta_sigma
    else:
        d_s = np.inf if delta_mean > 0 else 0.0
    return delta_mean, delta_sigma, d_s


def rank_features(matrix, names, labels, num_classes, threshold=0.3) -> RankingTable:
    """Rank every feature column by separability score, descending.

    Ties are broken by feature name so the ordering is fully deterministic.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.size == 0:
        raise DegenerateInputError("empty feature matrix")
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    entries = []
    for j, name in enumerate(names):
        means, stds = class_stats(matrix[:, j], labels, num_classes)
        dm, ds, score = separability(means, stds)
        entries.append(RankingEntry(name, dm, ds, score))
    entries.sort(key=lambda e: (-e.d_s, e.feature))
    return RankingTable(entries, threshold)


def dataset_separability_raw(dataset: LabeledSet):
    """Table-2-style statistics of the raw unit-scaled pixel vectors.

    Observations are flattened patches; delta_mean is the mean over class
    pairs of the per-dimension mean absolute difference of class means,
    delta_sigma the grand mean of per-class per-dimension stds.
    """
    if dataset.num_classes < 2:
        raise DegenerateInputError("need at least 2 classes")
    flat = to_unit(dataset.patches).reshape(len(dataset), -1)
    means, stds = [], []
    for k in range(dataset.num_classes):
        sel = flat[dataset.labels == k]
        if sel.shape[0] == 0:
            raise DegenerateInputError(f"class {k} has no samples")
        means.append(sel.mean(axis=0))
        stds.append(sel.std(axis=0))
    pair_dists = [np.mean(np.abs(a - b)) for a, b in combinations(means, 2)]
    return float(np.mean(pair_dists)), float(np.mean(stds))


def dataset_separability_features(matrix, names, labels, num_classes):
    """Average per-feature (delta_mean, delta_sigma) over the given features."""
    matrix = np.asarray(matrix, dtype=np.float64)
    dms, dss = [], []
    for j in range(matrix.shape[1]):
        means, stds = class_stats(matrix[:, j], labels, num_classes)
        dm, ds, _ = separability(means, stds)
        dms.append(dm)
        dss.append(ds)
    return float(np.mean(dms)), float(np.mean(dss))
