"""Feature-importance-guided interpolation attack, the random brute-force
ablation, and severity sweeps over the number of modified features."""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Literal

import numpy as np

from ._seeding import row_rng
from .data import Dataset
from .errors import DataError, EmptyPoolError, ShapeError
from .importance import (
    DEFAULT_BACKGROUND_ROWS,
    global_ranking,
    rank_by_magnitude,
    sample_background,
    shapley_sampled,
    top_k,
)
from .models.blackbox import BlackBoxModel
from .models.outcomes import (
    THRESHOLD,
    Metrics,
    OutcomePartition,
    metrics_from_proba,
    partition_from_proba,
)
from .neighbors import DEFAULT_P, NeighborIndex

SWEEP_COLUMNS = ("method", "k", "accuracy", "fp", "fn", "queries", "seconds")
DEFAULT_SWEEP_ROWS = 1000

EndpointMode = Literal["FPFN", "TPTN"]
ShapMode = Literal["global", "per_sample"]


@dataclass(frozen=True)
class AttackConfig:
    k_features: int = 10
    p: float = DEFAULT_P
    n_interp: int = 10
    interp_position: int | None = None  # None -> n_interp - 1
    endpoint_mode: EndpointMode = "FPFN"
    shap_mode: ShapMode = "global"
    n_permutations: int = 10
    n_probe: int = 10
    n_background: int = DEFAULT_BACKGROUND_ROWS
    seed: int = 0
    threshold: float = THRESHOLD
    workers: int = 1

    def __post_init__(self):
        if self.interp_position is None:
            object.__setattr__(self, "interp_position", self.n_interp - 1)
        if self.n_interp < 2:
            raise ValueError("n_interp must be >= 2")
        if not 0 <= self.interp_position < self.n_interp:
            raise ValueError("interp_position must lie in [0, n_interp)")
        if self.k_features < 0:
            raise ValueError("k_features must be >= 0")
        if self.endpoint_mode not in ("FPFN", "TPTN"):
            raise ValueError(f"unknown endpoint_mode {self.endpoint_mode!r}")
        if self.shap_mode not in ("global", "per_sample"):
            raise ValueError(f"unknown shap_mode {self.shap_mode!r}")


@dataclass(frozen=True)
class RowProvenance:
    status: str  # "attacked" | "skipped_misclassified" | "untouched"
    target_row: int | None = None
    modified_features: tuple[int, ...] = ()
    endpoint_mode: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["modified_features"] = list(self.modified_features)
        return d


@dataclass(frozen=True, eq=False)
class AttackedDataset:
    values: np.ndarray
    provenance: tuple[RowProvenance, ...]
    method: str

    @property
    def attacked_rows(self) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.provenance) if r.status == "attacked"])

    def to_dataset(self, original: Dataset) -> Dataset:
        return original.with_values(self.values, attack=self.method)

    def provenance_dict(self) -> dict:
        return {
            "method": self.method,
            "rows": [r.to_dict() for r in self.provenance],
        }


@dataclass
class AttackReport:
    method: str
    metrics_before: Metrics
    metrics_after: Metrics
    queries: int
    seconds: float
    k_features: int
    sweep: list[dict] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "k_features": self.k_features,
            "metrics_before": self.metrics_before.to_dict(),
            "metrics_after": self.metrics_after.to_dict(),
            "queries": self.queries,
            "seconds": self.seconds,
            "sweep": self.sweep,
            "details": self.details,
        }

    def sweep_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in self.sweep:
            w.writerow([
                row["method"], row["k"], "%.6f" % row["accuracy"], row["fp"], row["fn"],
                row["queries"], "%.3f" % row["seconds"],
            ])
        return buf.getvalue()


def interpolate(a, b, n: int) -> np.ndarray:
    """``n`` evenly spaced points from ``a`` to ``b`` inclusive, shape ``(n, len)``.

    Row 0 is ``a`` and row ``n-1`` is ``b`` bit-for-bit; every entry stays
    inside the closed segment between the two endpoints.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape} vs {b.shape}")
    if n < 2:
        raise ValueError("interpolation needs n >= 2")
    i = np.arange(n, dtype=float).reshape((n,) + (1,) * a.ndim)
    out = a + i * (b - a) / (n - 1)
    out = np.clip(out, np.minimum(a, b), np.maximum(a, b))
    out[0] = a
    out[-1] = b
    return out


def _interp_point(a, b, n, position):
    if position == n - 1:
        return np.array(b, dtype=float)
    return interpolate(a, b, n)[position]


def _check_width(m: BlackBoxModel, d: Dataset):
    if m.n_features != d.n_features:
        raise ShapeError(f"model expects {m.n_features} features, data has {d.n_features}")


@dataclass
class AttackPlan:
    """Everything the main attack needs that does not depend on ``k``.

    Built once per run: baseline predictions, candidate pools with one
    neighbour index each, per-row targets, and feature rankings.
    """

    cfg: AttackConfig
    baseline_proba: np.ndarray
    partition: OutcomePartition
    targets: np.ndarray  # -1 for rows left alone
    ranking: np.ndarray | None  # global mode
    row_rankings: dict[int, np.ndarray]  # per_sample mode
    baseline_queries: int
    ranking_queries: int
    pool_sizes: dict[str, int]


def _pools(part: OutcomePartition, mode: str) -> tuple[np.ndarray, np.ndarray]:
    """(pool for label-1 sources, pool for label-0 sources)."""
    if mode == "FPFN":
        # true positives head for samples the model wrongly calls 0, and vice versa
        return part.fn, part.fp
    return part.tn, part.tp


def plan_attack(
    m: BlackBoxModel, test: Dataset, cfg: AttackConfig, background=None
) -> AttackPlan:
    _check_width(m, test)
    q0 = m.query_count
    proba = m.predict_proba(test.values)
    part = partition_from_proba(proba, test.labels, cfg.threshold)
    pool_pos, pool_neg = _pools(part, cfg.endpoint_mode)
    sources = {1: part.tp, 0: part.tn}
    pools = {1: pool_pos, 0: pool_neg}
    names = {"FPFN": ("FN", "FP"), "TPTN": ("TN", "TP")}[cfg.endpoint_mode]

    targets = np.full(test.n_samples, -1, dtype=np.int64)
    for label, pool_name in zip((1, 0), names):
        src = sources[label]
        if src.size == 0:
            continue
        pool = pools[label]
        if pool.size == 0:
            hint = " (model too accurate; try endpoint_mode TPTN)" if cfg.endpoint_mode == "FPFN" else ""
            raise EmptyPoolError(
                f"no {pool_name} samples to serve as targets for class-{label} rows{hint}"
            )
        index = NeighborIndex(test.values[pool], cfg.p, pool)
        for r in src:
            targets[r] = index.nearest(test.values[r], 1)[0][0]

    baseline_queries = m.query_count - q0
    ranking = None
    row_rankings: dict[int, np.ndarray] = {}
    if cfg.k_features > 0:
        if background is None:
            background = sample_background(test.values, cfg.n_background, cfg.seed)
        if cfg.shap_mode == "global":
            n_probe = min(cfg.n_probe, test.n_samples)
            ranking = global_ranking(
                m, test, n_probe, cfg.n_permutations, cfg.seed, background=background
            )
        else:
            rows = np.flatnonzero(targets >= 0)

            def rank_row(r):
                seed = int(row_rng(cfg.seed, int(r)).integers(2**31))
                sv = shapley_sampled(m, test.values[r], background, cfg.n_permutations, seed)
                return int(r), rank_by_magnitude(sv.phi)

            with ThreadPoolExecutor(max(1, cfg.workers)) as pool:
                row_rankings = dict(pool.map(rank_row, rows))
    return AttackPlan(
        cfg=cfg,
        baseline_proba=proba,
        partition=part,
        targets=targets,
        ranking=ranking,
        row_rankings=row_rankings,
        baseline_queries=baseline_queries,
        ranking_queries=m.query_count - q0 - baseline_queries,
        pool_sizes={names[0]: int(pool_pos.size), names[1]: int(pool_neg.size)},
    )


def apply_plan(test: Dataset, plan: AttackPlan, k: int) -> AttackedDataset:
    cfg = plan.cfg
    if k > test.n_features:
        raise DataError(f"k={k} exceeds {test.n_features} features")
    values = test.values.copy()
    prov = []
    for r in range(test.n_samples):
        t = plan.targets[r]
        if t < 0:
            prov.append(RowProvenance("skipped_misclassified", endpoint_mode=cfg.endpoint_mode))
            continue
        ranking = plan.ranking if plan.ranking is not None else plan.row_rankings.get(r)
        feats = top_k(ranking, k) if k else np.empty(0, dtype=np.int64)
        if feats.size:
            values[r, feats] = _interp_point(
                test.values[r, feats], test.values[t, feats], cfg.n_interp, cfg.interp_position
            )
        prov.append(RowProvenance("attacked", int(t), tuple(int(f) for f in feats), cfg.endpoint_mode))
    return AttackedDataset(values, tuple(prov), "main")


def fimba_attack(
    m: BlackBoxModel, test: Dataset, cfg: AttackConfig, background=None, plan: AttackPlan | None = None
) -> tuple[AttackedDataset, AttackReport]:
    """Run the main attack on every correctly classified row of ``test``.

    Model queries: one pass over ``test`` for the baseline, the Shapley
    budget of the ranking step, and one pass over the attacked rows.
    """
    if cfg.k_features > test.n_features:
        raise DataError(f"k={cfg.k_features} exceeds {test.n_features} features")
    t0 = time.perf_counter()
    q0 = m.query_count
    if plan is None:
        plan = plan_attack(m, test, cfg, background)
        plan_queries = 0
    else:
        # charge only what a standalone run at this k would have spent
        plan_queries = plan.baseline_queries + (plan.ranking_queries if cfg.k_features else 0)
    attacked = apply_plan(test, plan, cfg.k_features)
    after = m.predict_proba(attacked.values)
    report = AttackReport(
        method="main",
        metrics_before=metrics_from_proba(plan.baseline_proba, test.labels, cfg.threshold),
        metrics_after=metrics_from_proba(after, test.labels, cfg.threshold),
        queries=m.query_count - q0 + plan_queries,
        seconds=time.perf_counter() - t0,
        k_features=cfg.k_features,
        details={
            "endpoint_mode": cfg.endpoint_mode,
            "shap_mode": cfg.shap_mode,
            "p": cfg.p,
            "n_interp": cfg.n_interp,
            "interp_position": cfg.interp_position,
            "pool_sizes": plan.pool_sizes,
            "n_attacked": int(np.sum(plan.targets >= 0)),
            "n_background": cfg.n_background,
            "ranking_head": [] if plan.ranking is None else plan.ranking[:20].tolist(),
        },
    )
    return attacked, report


def brute_force_attack(
    m: BlackBoxModel, test: Dataset, k: int, seed: int = 0, threshold: float = THRESHOLD
) -> tuple[AttackedDataset, AttackReport]:
    """Overwrite ``k`` uniformly chosen features per row with uniform noise
    drawn strictly inside (-1, 1)."""
    _check_width(m, test)
    if not 0 <= k <= test.n_features:
        raise DataError(f"k={k} outside [0, {test.n_features}]")
    t0 = time.perf_counter()
    q0 = m.query_count
    before = m.predict_proba(test.values)
    values = test.values.copy()
    low = np.nextafter(-1.0, 0.0)
    prov = []
    for r in range(test.n_samples):
        rng = row_rng(seed, r)
        feats = np.sort(rng.choice(test.n_features, k, replace=False)) if k else np.empty(0, np.int64)
        values[r, feats] = rng.uniform(low, 1.0, feats.size)
        prov.append(RowProvenance("attacked", None, tuple(int(f) for f in feats), None))
    after = m.predict_proba(values)
    report = AttackReport(
        method="brute",
        metrics_before=metrics_from_proba(before, test.labels, threshold),
        metrics_after=metrics_from_proba(after, test.labels, threshold),
        queries=m.query_count - q0,
        seconds=time.perf_counter() - t0,
        k_features=k,
    )
    return AttackedDataset(values, tuple(prov), "brute"), report


def subsample(test: Dataset, n_rows: int | None, seed: int) -> Dataset:
    if n_rows is None or n_rows >= test.n_samples:
        return test
    rows = np.sort(np.random.default_rng(seed).choice(test.n_samples, n_rows, replace=False))
    return test.subset(rows)


def severity_sweep(
    m: BlackBoxModel,
    test: Dataset,
    cfg: AttackConfig,
    k_values,
    method: str = "main",
    n_rows: int | None = DEFAULT_SWEEP_ROWS,
    background=None,
    record_timing: bool = True,
) -> AttackReport:
    """Attack strength curve: accuracy/FP/FN for each ``k`` in ``k_values``.

    For the main method the ``k``-independent work (targets, ranking) is
    done once; each sweep point still reports the query cost a standalone
    run at that ``k`` would have.
    """
    k_values = [int(k) for k in k_values]
    if k_values != sorted(k_values):
        raise ValueError("k_values must be sorted ascending")
    if method not in ("main", "brute"):
        raise ValueError(f"unknown method {method!r}")
    sub = subsample(test, n_rows, cfg.seed)
    t_all = time.perf_counter()
    q_all = m.query_count
    plan = None
    plan_seconds = 0.0
    if method == "main":
        plan_cfg = replace(cfg, k_features=max(k_values, default=0))
        t0 = time.perf_counter()
        plan = plan_attack(m, sub, plan_cfg, background)
        plan_seconds = time.perf_counter() - t0
    points = []
    rep = None
    for k in k_values:
        if method == "main":
            _, rep = fimba_attack(m, sub, replace(cfg, k_features=k), plan=plan)
            rep.seconds += plan_seconds
        else:
            _, rep = brute_force_attack(m, sub, k, cfg.seed, cfg.threshold)
        points.append({
            "method": method,
            "k": k,
            "accuracy": rep.metrics_after.accuracy,
            "fp": rep.metrics_after.fp_count,
            "fn": rep.metrics_after.fn_count,
            "queries": rep.queries,
            "seconds": rep.seconds if record_timing else 0.0,
        })
    if rep is None:
        raise ValueError("k_values is empty")
    return AttackReport(
        method=method,
        metrics_before=rep.metrics_before,
        metrics_after=rep.metrics_after,
        queries=m.query_count - q_all,
        seconds=(time.perf_counter() - t_all) if record_timing else 0.0,
        k_features=rep.k_features,
        sweep=points,
        details={"n_rows": sub.n_samples},
    )
