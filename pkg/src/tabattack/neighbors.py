"""Minkowski distance and an exact KD-tree k-nearest-neighbour index."""

from __future__ import annotations

import heapq
import math

import numpy as np

from .errors import DataError, ShapeError

DEFAULT_P = 2.0
LEAF_SIZE = 8


def minkowski(a, b, p: float = DEFAULT_P) -> float:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if not p >= 1:
        raise ValueError(f"Minkowski order must be >= 1, got {p}")
    return float(_rowwise(a[None, :], b, float(p))[0])


def _rowwise(points: np.ndarray, q: np.ndarray, p: float) -> np.ndarray:
    # the single kernel behind every distance, so tree and scan agree bitwise
    return np.sum(np.abs(points - q) ** p, axis=1) ** (1.0 / p)


class NeighborIndex:
    """Balanced KD-tree (median split, cycling axes) over a fixed point set.

    Nodes live in flat arrays. Internal node ``i`` splits on ``axis[i]`` at
    ``split[i]``; leaves hold a contiguous slice ``[lo, hi)`` of
    :attr:`order`, the permutation of stored points.
    """

    def __init__(self, vectors, p: float = DEFAULT_P, source_indices=None, leaf_size: int = LEAF_SIZE):
        pts = np.asarray(vectors, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DataError("cannot index an empty point set")
        if not p >= 1:
            raise ValueError(f"Minkowski order must be >= 1, got {p}")
        self.points = pts
        self.points.setflags(write=False)
        self.p = float(p)
        if source_indices is None:
            source_indices = np.arange(pts.shape[0])
        self.source_indices = np.asarray(source_indices, dtype=np.int64)
        if self.source_indices.shape[0] != pts.shape[0]:
            raise DataError("one source index per vector required")
        self.leaf_size = max(1, int(leaf_size))

        self.order = np.arange(pts.shape[0])
        self._axis: list[int] = []
        self._split: list[float] = []
        self._children: list[tuple[int, int]] = []
        self._span: list[tuple[int, int]] = []
        self._build(0, pts.shape[0], 0)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def _new_node(self, axis, split, lo, hi) -> int:
        self._axis.append(axis)
        self._split.append(split)
        self._children.append((-1, -1))
        self._span.append((lo, hi))
        return len(self._axis) - 1

    def _build(self, lo: int, hi: int, depth: int) -> int:
        if hi - lo <= self.leaf_size:
            return self._new_node(-1, 0.0, lo, hi)
        axis = depth % self.dim
        idx = self.order[lo:hi]
        # stable sort keeps the build deterministic under duplicate coordinates
        idx = idx[np.argsort(self.points[idx, axis], kind="stable")]
        self.order[lo:hi] = idx
        mid = lo + (hi - lo) // 2
        node = self._new_node(axis, float(self.points[self.order[mid], axis]), lo, hi)
        left = self._build(lo, mid, depth + 1)
        right = self._build(mid, hi, depth + 1)
        self._children[node] = (left, right)
        return node

    def depth(self) -> int:
        def rec(node):
            l, r = self._children[node]
            if self._axis[node] < 0:
                return 1
            return 1 + max(rec(l), rec(r))
        return rec(0)

    def nearest(self, query, k: int = 1) -> list[tuple[int, float]]:
        """Exact ``k`` nearest points as ``(source_index, distance)``, ascending
        by distance then source index."""
        q = np.asarray(query, dtype=float).reshape(-1)
        if q.shape[0] != self.dim:
            raise ShapeError(f"query width {q.shape[0]}, index width {self.dim}")
        if k < 1:
            raise ValueError("k must be >= 1")
        if k > len(self):
            raise DataError(f"k={k} exceeds index size {len(self)}")

        # max-heap of the k best as (-dist, -source, position)
        best: list[tuple[float, int, int]] = []
        p = self.p

        def worst() -> float:
            return -best[0][0] if len(best) == k else math.inf

        def visit(node: int) -> None:
            axis = self._axis[node]
            if axis < 0:
                lo, hi = self._span[node]
                pos = self.order[lo:hi]
                dists = _rowwise(self.points[pos], q, p)
                for j, d in zip(pos, dists):
                    key = (-float(d), -int(self.source_indices[j]), int(j))
                    if len(best) < k:
                        heapq.heappush(best, key)
                    elif key > best[0]:
                        heapq.heapreplace(best, key)
                return
            diff = q[axis] - self._split[node]
            left, right = self._children[node]
            near, far = (left, right) if diff < 0 else (right, left)
            visit(near)
            # the far side can only hold points at distance >= |diff|; equality is
            # kept so tied distances still resolve by source index
            if abs(diff) <= worst() * (1.0 + 1e-12):
                visit(far)

        visit(0)
        out = sorted(((-nd, -ns) for nd, ns, _ in best), key=lambda t: (t[0], t[1]))
        return [(int(s), float(d)) for d, s in out]


def build_index(vectors, p: float = DEFAULT_P, source_indices=None) -> NeighborIndex:
    return NeighborIndex(vectors, p, source_indices)


def nearest(idx: NeighborIndex, query, k: int = 1) -> list[tuple[int, float]]:
    return idx.nearest(query, k)


def linear_scan(vectors, query, p: float = DEFAULT_P, k: int = 1, source_indices=None):
    """Brute-force reference for :meth:`NeighborIndex.nearest`."""
    pts = np.asarray(vectors, dtype=float)
    src = np.arange(pts.shape[0]) if source_indices is None else np.asarray(source_indices)
    d = np.array([minkowski(v, query, p) for v in pts])
    order = np.lexsort((src, d))[:k]
    return [(int(src[i]), float(d[i])) for i in order]
