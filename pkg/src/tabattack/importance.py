"""Black-box Shapley attributions and feature rankings.

The value of a coalition ``S`` is estimated interventionally: features in
``S`` take the explained sample's values, every other feature takes a
background row's value, and the model's predictions are averaged over the
background rows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from .data import Dataset
from .errors import DataError, ShapeError
from .models.blackbox import BlackBoxModel

MAX_EXACT_FEATURES = 15
DEFAULT_BACKGROUND_ROWS = 16


@dataclass(frozen=True)
class ShapleyValues:
    phi: np.ndarray
    base_value: float
    sample_index: int | None = None

    def to_json(self, feature_names=None) -> str:
        names = feature_names or [f"f{i}" for i in range(len(self.phi))]
        return json.dumps(
            {
                "base_value": self.base_value,
                "sample_index": self.sample_index,
                "phi": {str(n): float(v) for n, v in zip(names, self.phi)},
            },
            indent=2,
        )


def sample_background(
    rows: np.ndarray, n: int = DEFAULT_BACKGROUND_ROWS, seed: int = 0
) -> np.ndarray:
    """Uniformly pick ``n`` reference rows (all of them if fewer)."""
    rows = np.asarray(rows, dtype=float)
    if rows.shape[0] == 0:
        raise DataError("background source is empty")
    if rows.shape[0] <= n:
        return rows.copy()
    idx = np.sort(np.random.default_rng(seed).choice(rows.shape[0], n, replace=False))
    return rows[idx]


def _check(m: BlackBoxModel, x, bg):
    x = np.asarray(x, dtype=float).reshape(-1)
    bg = np.asarray(bg, dtype=float)
    if bg.ndim != 2 or bg.shape[0] == 0:
        raise DataError("background must be a non-empty matrix")
    if x.shape[0] != m.n_features or bg.shape[1] != m.n_features:
        raise ShapeError(
            f"model width {m.n_features}, sample {x.shape[0]}, background {bg.shape[1]}"
        )
    return x, bg


def shapley_exact(m: BlackBoxModel, x, bg) -> ShapleyValues:
    """Enumerate every coalition; costs ``2**n_features * len(bg)`` queries."""
    x, bg = _check(m, x, bg)
    n_feat = x.shape[0]
    if n_feat > MAX_EXACT_FEATURES:
        raise DataError(
            f"exact Shapley limited to {MAX_EXACT_FEATURES} features, got {n_feat}"
        )
    n_bg = bg.shape[0]
    # row s is the coalition whose bit j marks feature j
    masks = ((np.arange(2**n_feat)[:, None] >> np.arange(n_feat)) & 1).astype(bool)
    rows = np.where(masks[:, None, :], x[None, None, :], bg[None, :, :])
    value = m.predict_proba(rows.reshape(-1, n_feat)).reshape(-1, n_bg).mean(axis=1)

    sizes = masks.sum(axis=1)
    fact = [math.factorial(i) for i in range(n_feat + 1)]
    weight = np.array(
        [fact[s] * fact[n_feat - s - 1] / fact[n_feat] if s < n_feat else 0.0 for s in sizes]
    )
    phi = np.zeros(n_feat)
    for j in range(n_feat):
        bit = 1 << j
        without = np.flatnonzero(~masks[:, j])
        phi[j] = np.sum(weight[without] * (value[without | bit] - value[without]))
    return ShapleyValues(phi, float(value[0]))


def _permutation_rows(x, bg, perm):
    n_feat = x.shape[0]
    # step t: features perm[:t+1] come from x
    inc = np.zeros((n_feat, n_feat), dtype=bool)
    inc[np.arange(n_feat)[:, None] >= np.arange(n_feat)[None, :]] = True
    masks = np.zeros_like(inc)
    masks[:, perm] = inc
    return np.where(masks[:, None, :], x[None, None, :], bg[None, :, :])


def shapley_sampled(
    m: BlackBoxModel, x, bg, n_permutations: int = 10, seed: int = 0
) -> ShapleyValues:
    """Monte Carlo Shapley estimate over random feature orderings.

    Issues exactly ``n_permutations * n_features * len(bg) + len(bg)`` queries.
    Each permutation draws from its own seed substream, so the estimate does
    not depend on evaluation order.
    """
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    x, bg = _check(m, x, bg)
    n_feat, n_bg = x.shape[0], bg.shape[0]
    base = float(m.predict_proba(bg).mean())
    children = np.random.SeedSequence(int(seed) & 0xFFFFFFFF).spawn(n_permutations)
    contrib = np.zeros((n_permutations, n_feat))
    for k, child in enumerate(children):
        perm = np.random.default_rng(child).permutation(n_feat)
        rows = _permutation_rows(x, bg, perm)
        v = m.predict_proba(rows.reshape(-1, n_feat)).reshape(n_feat, n_bg).mean(axis=1)
        contrib[k, perm] = np.diff(np.concatenate(([base], v)))
    return ShapleyValues(contrib.mean(axis=0), base)


def rank_by_magnitude(scores) -> np.ndarray:
    """Indices sorted by descending ``|score|``; ties by ascending index."""
    mag = np.abs(np.asarray(scores, dtype=float))
    return np.lexsort((np.arange(mag.size), -mag))


def global_ranking(
    m: BlackBoxModel,
    probe: Dataset,
    n_probe: int = 10,
    n_permutations: int = 10,
    seed: int = 0,
    background=None,
    return_scores: bool = False,
):
    """Rank features by mean ``|phi|`` over ``n_probe`` rows drawn from ``probe``."""
    if probe.n_samples == 0:
        raise DataError("probe set is empty")
    if n_probe > probe.n_samples:
        raise DataError(f"n_probe={n_probe} exceeds {probe.n_samples} probe rows")
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(probe.n_samples, n_probe, replace=False))
    if background is None:
        background = sample_background(probe.values, seed=int(rng.integers(2**31)))
    seeds = rng.integers(0, 2**31, size=n_probe)
    total = np.zeros(probe.n_features)
    for r, s in zip(rows, seeds):
        total += np.abs(shapley_sampled(m, probe.values[r], background, n_permutations, int(s)).phi)
    scores = total / max(n_probe, 1)
    ranking = rank_by_magnitude(scores)
    return (ranking, scores) if return_scores else ranking


def ranking_query_cost(n_features: int, n_background: int, n_permutations: int, n_probe: int) -> int:
    return n_probe * (n_permutations * n_features * n_background + n_background)


def top_k(ranking, k: int) -> np.ndarray:
    ranking = np.asarray(ranking, dtype=np.int64)
    if k < 0 or k > ranking.size:
        raise ValueError(f"k={k} outside [0, {ranking.size}]")
    return ranking[:k].copy()


def rank_correlation(ranking_a, ranking_b, top: int | None = None) -> float:
    """Spearman correlation of feature positions, over the ``top`` leading
    features of ``ranking_a``."""
    a = np.asarray(ranking_a)
    b = np.asarray(ranking_b)
    pos_a = np.empty(a.size, dtype=np.int64)
    pos_a[a] = np.arange(a.size)
    pos_b = np.empty(b.size, dtype=np.int64)
    pos_b[b] = np.arange(b.size)
    feats = a[: top or a.size]
    return float(spearmanr(pos_a[feats], pos_b[feats]).statistic)
