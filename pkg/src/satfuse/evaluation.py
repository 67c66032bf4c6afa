"""Accuracy, confusion matrices and McNemar's paired test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

P_FLOOR = 2.2e-16  # reporting convention: below this, print "< 2.2e-16"


def accuracy(preds, labels) -> float:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ValueError("prediction/label length mismatch")
    return float((preds == labels).mean())


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, cols = predicted

    @property
    def accuracy(self):
        return float(np.trace(self.counts) / self.counts.sum())


def confusion(preds, labels, num_classes) -> ConfusionMatrix:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ValueError("prediction/label length mismatch")
    if labels.size and (labels.max() >= num_classes or preds.max() >= num_classes):
        raise ValueError("label or prediction out of range")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return ConfusionMatrix(counts)


@dataclass
class McNemarResult:
    b: int  # A correct, B wrong
    c: int  # A wrong, B correct
    chi2: float
    p_two_tailed: float

    def p_string(self):
        return f"< {P_FLOOR:g}" if self.p_two_tailed < P_FLOOR else f"{self.p_two_tailed:.6g}"


def chi2_sf_1df(chi2: float) -> float:
    """Upper tail of chi-square with 1 d.o.f. via the erfc relation."""
    return math.erfc(math.sqrt(chi2 / 2.0))


def mcnemar(preds_a, preds_b, labels, correction=True) -> McNemarResult:
    """Paired test on discordant counts of two classifiers.

    chi2 = (|b - c| - 1)^2 / (b + c) with continuity correction (the
    default); no discordant pairs yields chi2 = 0, p = 1.
    """
    preds_a = np.asarray(preds_a)
    preds_b = np.asarray(preds_b)
    labels = np.asarray(labels)
    if not (preds_a.shape == preds_b.shape == labels.shape):
        raise ValueError("prediction/label length mismatch")
    ok_a = preds_a == labels
    ok_b = preds_b == labels
    b = int(np.sum(ok_a & ~ok_b))
    c = int(np.sum(~ok_a & ok_b))
    if b + c == 0:
        return McNemarResult(b, c, 0.0, 1.0)
    diff = abs(b - c) - 1 if correction else abs(b - c)
    chi2 = max(diff, 0) ** 2 / (b + c)
    return McNemarResult(b, c, float(chi2), chi2_sf_1df(chi2))
