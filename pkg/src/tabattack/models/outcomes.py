"""Confusion metrics and the TP/TN/FP/FN row partition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from .blackbox import BlackBoxModel

THRESHOLD = 0.5


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    fp_count: int
    fn_count: int
    # [[tn, fp], [fn, tp]]
    confusion: tuple[tuple[int, int], tuple[int, int]]

    @property
    def n(self) -> int:
        return sum(sum(r) for r in self.confusion)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "fp": self.fp_count,
            "fn": self.fn_count,
            "confusion": [list(r) for r in self.confusion],
        }


@dataclass(frozen=True)
class OutcomePartition:
    tp: np.ndarray
    tn: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    threshold: float = THRESHOLD

    @property
    def correct(self) -> np.ndarray:
        return np.union1d(self.tp, self.tn)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("tp", "tn", "fp", "fn")} | {
            "threshold": self.threshold
        }


def classify(proba: np.ndarray, threshold: float = THRESHOLD) -> np.ndarray:
    # a probability exactly at the threshold counts as positive
    return (np.asarray(proba) >= threshold).astype(np.int64)


def partition_from_proba(proba, labels, threshold: float = THRESHOLD) -> OutcomePartition:
    pred = classify(proba, threshold)
    labels = np.asarray(labels)
    return OutcomePartition(
        tp=np.flatnonzero((pred == 1) & (labels == 1)),
        tn=np.flatnonzero((pred == 0) & (labels == 0)),
        fp=np.flatnonzero((pred == 1) & (labels == 0)),
        fn=np.flatnonzero((pred == 0) & (labels == 1)),
        threshold=threshold,
    )


def metrics_from_partition(part: OutcomePartition) -> Metrics:
    tp, tn, fp, fn = (len(part.tp), len(part.tn), len(part.fp), len(part.fn))
    n = tp + tn + fp + fn
    return Metrics(
        accuracy=(tp + tn) / n if n else 0.0,
        fp_count=fp,
        fn_count=fn,
        confusion=((tn, fp), (fn, tp)),
    )


def metrics_from_proba(proba, labels, threshold: float = THRESHOLD) -> Metrics:
    return metrics_from_partition(partition_from_proba(proba, labels, threshold))


def evaluate(m: BlackBoxModel, d: Dataset, threshold: float = THRESHOLD) -> Metrics:
    return metrics_from_proba(m.predict_proba(d.values), d.labels, threshold)


def partition_outcomes(
    m: BlackBoxModel, d: Dataset, threshold: float = THRESHOLD
) -> OutcomePartition:
    return partition_from_proba(m.predict_proba(d.values), d.labels, threshold)
