"""The black-box surface: probability queries plus a query counter.

Attacks, importance estimation and detection only ever call
:meth:`BlackBoxModel.predict_proba` and read :attr:`BlackBoxModel.n_features`.
"""

from __future__ import annotations

import threading
from typing import Callable

import numpy as np

from ..errors import ShapeError


class BlackBoxModel:
    """Base class. Subclasses implement :meth:`_proba` on a validated batch."""

    kind = "abstract"

    def __init__(self, n_features: int):
        self.n_features = int(n_features)
        self._queries = 0
        self._lock = threading.Lock()

    @property
    def query_count(self) -> int:
        return self._queries

    def reset_queries(self) -> None:
        with self._lock:
            self._queries = 0

    def predict_proba(self, rows) -> np.ndarray:
        """P(class 1) for each row; bumps ``query_count`` by the batch size."""
        rows = np.asarray(rows, dtype=float)
        if rows.ndim == 1:
            rows = rows.reshape(1, -1) if rows.size else rows.reshape(0, self.n_features)
        if rows.ndim != 2 or rows.shape[1] != self.n_features:
            raise ShapeError(
                f"model expects {self.n_features} features, got shape {rows.shape}"
            )
        if rows.shape[0] == 0:
            return np.empty(0)
        with self._lock:
            self._queries += rows.shape[0]
        p = np.asarray(self._proba(rows), dtype=float).reshape(-1)
        return np.clip(p, 0.0, 1.0)

    def _proba(self, rows: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FunctionModel(BlackBoxModel):
    """Wrap any ``f(rows) -> probabilities`` as a black box (tests, stubs)."""

    kind = "function"

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], n_features: int):
        super().__init__(n_features)
        self._fn = fn

    def _proba(self, rows):
        return self._fn(rows)


def predict_proba(m: BlackBoxModel, rows) -> np.ndarray:
    return m.predict_proba(rows)
