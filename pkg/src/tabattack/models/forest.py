"""Random forest of Gini CART trees, stored as flat node arrays.

Trees are grown with scikit-learn and immediately flattened into plain arrays;
prediction runs on those arrays alone, so a reloaded forest predicts
bit-for-bit like the freshly trained one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from sklearn.ensemble import RandomForestClassifier

from ..data import Dataset
from ..errors import DataError
from .blackbox import BlackBoxModel


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 100
    max_depth: int | None = None
    bootstrap: bool = True
    max_features: str = "sqrt"
    seed: int = 42
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")


@numba.njit(cache=True)
def _traverse(X, roots, left, right, feature, threshold, vote):
    n, t = X.shape[0], roots.shape[0]
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(t):
            node = roots[j]
            while left[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            s += vote[node]
        out[i] = s / t
    return out


class ForestModel(BlackBoxModel):
    """Forest whose probability is the fraction of trees voting class 1."""

    kind = "forest"

    def __init__(self, n_features, roots, left, right, feature, threshold, vote):
        super().__init__(n_features)
        self.roots = np.ascontiguousarray(roots, dtype=np.int64)
        self.left = np.ascontiguousarray(left, dtype=np.int64)
        self.right = np.ascontiguousarray(right, dtype=np.int64)
        self.feature = np.ascontiguousarray(feature, dtype=np.int64)
        self.threshold = np.ascontiguousarray(threshold, dtype=np.float64)
        self.vote = np.ascontiguousarray(vote, dtype=np.float64)

    @property
    def n_estimators(self) -> int:
        return int(self.roots.shape[0])

    def _proba(self, rows):
        X = np.ascontiguousarray(rows, dtype=np.float64)
        return _traverse(
            X, self.roots, self.left, self.right, self.feature, self.threshold, self.vote
        )

    def vote_counts(self, rows) -> np.ndarray:
        """Number of trees voting class 1 per row (counts as queries)."""
        return np.rint(self.predict_proba(rows) * self.n_estimators).astype(np.int64)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "roots": self.roots,
            "left": self.left,
            "right": self.right,
            "feature": self.feature,
            "threshold": self.threshold,
            "vote": self.vote,
        }


def _require_two_classes(train: Dataset):
    if train.n_samples == 0:
        raise DataError("training set is empty")
    if np.unique(train.labels).size < 2:
        raise DataError("training data contains a single class")


def train_random_forest(train: Dataset, cfg: ForestConfig = ForestConfig()) -> ForestModel:
    _require_two_classes(train)
    rf = RandomForestClassifier(
        n_estimators=cfg.n_estimators,
        criterion="gini",
        max_depth=cfg.max_depth,
        bootstrap=cfg.bootstrap,
        max_features=cfg.max_features,
        random_state=cfg.seed,
        n_jobs=cfg.n_jobs,
    )
    rf.fit(train.values, train.labels)
    classes = list(rf.classes_)
    pos = classes.index(1)

    roots, left, right, feature, threshold, vote = [], [], [], [], [], []
    offset = 0
    for est in rf.estimators_:
        t = est.tree_
        leaf = t.children_left < 0
        roots.append(offset)
        left.append(np.where(leaf, -1, t.children_left + offset))
        right.append(np.where(leaf, -1, t.children_right + offset))
        feature.append(np.where(leaf, 0, t.feature))
        threshold.append(np.where(leaf, 0.0, t.threshold))
        # one vote per tree: the leaf's majority class, ties to class 1
        counts = t.value[:, 0, :]
        vote.append((counts[:, pos] >= counts.max(axis=1)).astype(float))
        offset += t.node_count
    return ForestModel(
        train.n_features,
        np.array(roots),
        np.concatenate(left),
        np.concatenate(right),
        np.concatenate(feature),
        np.concatenate(threshold),
        np.concatenate(vote),
    )
