"""Dataset ingestion, min-max scaling, train/test splitting and a synthetic
two-class generator.

Datasets are immutable: every operation returns a new :class:`Dataset`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import (
    DataError,
    LabelError,
    MissingColumnError,
    NonFiniteError,
    NonNumericError,
)

LABEL_COLUMN = "label"
# Lossless float text round trip.
FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class Normalization:
    """Per-feature (min, max) seen by :func:`minmax_normalize`."""

    mins: np.ndarray
    maxs: np.ndarray

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(np.asarray(d["mins"], dtype=float), np.asarray(d["maxs"], dtype=float))


@dataclass(frozen=True, eq=False)
class Dataset:
    values: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    normalization: Normalization | None = None
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if values.ndim != 2:
            raise DataError(f"values must be 2-D, got shape {values.shape}")
        if labels.shape[0] != values.shape[0]:
            raise DataError(
                f"{labels.shape[0]} labels for {values.shape[0]} samples"
            )
        if not np.all(np.isin(labels, (0, 1))):
            raise LabelError("labels must be 0 or 1")
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            r, c = bad[0]
            raise NonFiniteError(f"non-finite value at ({r},{c})")
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != values.shape[1]:
            raise DataError(
                f"{len(names)} feature names for {values.shape[1]} features"
            )
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def subset(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            self.values[rows],
            self.labels[rows],
            self.feature_names,
            self.normalization,
            dict(self.provenance),
        )

    def with_values(self, values: np.ndarray, **provenance) -> "Dataset":
        prov = dict(self.provenance)
        prov.update(provenance)
        return Dataset(values, self.labels, self.feature_names, self.normalization, prov)


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    seed: int
    train_rows: np.ndarray
    test_rows: np.ndarray


def _default_names(n: int) -> list[str]:
    return [f"f{i}" for i in range(n)]


def load_csv(
    path: str | Path,
    label_column: str = LABEL_COLUMN,
    positive_label: str | None = None,
) -> Dataset:
    """Read a header-first CSV with one row per sample.

    Labels may be numeric 0/1 or any two distinct strings. With two string
    classes, ``positive_label`` names the class mapped to 1; without it the
    lexicographically larger class becomes 1.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise MissingColumnError(f"{path}: no label column {label_column!r}")
        li = header.index(label_column)
        feat_cols = [j for j in range(len(header)) if j != li]
        raw_labels: list[str] = []
        rows: list[list[float]] = []
        for r, rec in enumerate(reader):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(
                    f"{path}: row {r} has {len(rec)} fields, expected {len(header)}"
                )
            raw_labels.append(rec[li].strip())
            row = []
            for c, j in enumerate(feat_cols):
                cell = rec[j].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericError(
                        f"non-numeric value {cell!r} at ({r},{c})"
                    ) from None
                if not math.isfinite(v):
                    raise NonFiniteError(f"non-finite value at ({r},{c})")
                row.append(v)
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")
    labels = _map_labels(raw_labels, positive_label)
    values = np.asarray(rows, dtype=float)
    names = [header[j] for j in feat_cols]
    return Dataset(values, labels, names, provenance={"source": str(path)})


def _map_labels(raw: list[str], positive_label: str | None) -> np.ndarray:
    classes = sorted(set(raw))
    if len(classes) > 2:
        raise LabelError(f"more than two label classes: {classes[:5]}")
    if positive_label is not None:
        if positive_label not in classes:
            raise LabelError(f"positive label {positive_label!r} not present")
        return np.array([1 if v == positive_label else 0 for v in raw])
    try:
        nums = {c: float(c) for c in classes}
    except ValueError:
        nums = None
    if nums is not None:
        if not set(nums.values()) <= {0.0, 1.0}:
            raise LabelError(f"numeric labels must be 0/1, got {classes}")
        return np.array([int(nums[v]) for v in raw])
    return np.array([classes.index(v) for v in raw])


def save_csv(d: Dataset, path: str | Path, label_column: str = LABEL_COLUMN) -> Path:
    """Write ``d`` as CSV plus a ``.meta.json`` sidecar carrying the
    normalization record and provenance."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(d.feature_names) + [label_column])
        for row, lab in zip(d.values, d.labels):
            w.writerow([FLOAT_FORMAT % v for v in row] + [str(int(lab))])
    meta = {
        "format": "tabattack.dataset",
        "version": 1,
        "n_samples": d.n_samples,
        "n_features": d.n_features,
        "label_column": label_column,
        "normalization": d.normalization.to_dict() if d.normalization else None,
        "provenance": d.provenance,
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def read_dataset(path: str | Path, label_column: str = LABEL_COLUMN) -> Dataset:
    """Load a CSV written by :func:`save_csv`, restoring its sidecar if present."""
    d = load_csv(path, label_column)
    side = sidecar_path(path)
    if not side.is_file():
        return d
    meta = json.loads(side.read_text())
    norm = meta.get("normalization")
    return Dataset(
        d.values,
        d.labels,
        d.feature_names,
        Normalization.from_dict(norm) if norm else None,
        meta.get("provenance", {}),
    )


def minmax_normalize(d: Dataset) -> Dataset:
    """Scale every column affinely onto [-1, 1]; constant columns go to 0."""
    if d.n_samples == 0:
        raise DataError("cannot normalize an empty dataset")
    mins = d.values.min(axis=0)
    maxs = d.values.max(axis=0)
    span = maxs - mins
    flat = span == 0
    safe = np.where(flat, 1.0, span)
    out = 2.0 * (d.values - mins) / safe - 1.0
    out[:, flat] = 0.0
    # guard the endpoints against rounding
    np.clip(out, -1.0, 1.0, out=out)
    return Dataset(out, d.labels, d.feature_names, Normalization(mins, maxs), dict(d.provenance))


def denormalize(d: Dataset) -> Dataset:
    if d.normalization is None:
        raise DataError("dataset carries no normalization record")
    mins, maxs = d.normalization.mins, d.normalization.maxs
    out = (d.values + 1.0) / 2.0 * (maxs - mins) + mins
    return Dataset(out, d.labels, d.feature_names, None, dict(d.provenance))


def split(d: Dataset, train_ratio: float = 0.67, seed: int = 42) -> SplitPair:
    """Plain (unstratified) shuffled split."""
    if not 0.0 < train_ratio < 1.0:
        raise DataError(f"train_ratio must be in (0, 1), got {train_ratio}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(d.n_samples)
    n_train = int(round(train_ratio * d.n_samples))
    tr, te = np.sort(order[:n_train]), np.sort(order[n_train:])
    return SplitPair(d.subset(tr), d.subset(te), seed, tr, te)


def synth_two_class(
    n_samples: int,
    n_features: int,
    overlap: float,
    seed: int,
    separation: float = 8.0,
    informative_fraction: float = 0.2,
) -> Dataset:
    """Two unit-variance Gaussian clouds differing only on informative features.

    ``separation`` is the Mahalanobis distance between the class means at
    ``overlap=0``; it is spread evenly over the informative features, so the
    per-feature mean gap is ``separation * (1 - overlap) / sqrt(n_informative)``
    and the Bayes accuracy is ``Phi(separation * (1 - overlap) / 2)`` no matter
    how many features there are.
    """
    if n_samples < 2 or n_features < 2:
        raise DataError("synth_two_class needs n_samples >= 2 and n_features >= 2")
    if not 0.0 <= overlap <= 1.0:
        raise DataError(f"overlap must be in [0, 1], got {overlap}")
    if not 0.0 < informative_fraction <= 1.0:
        raise DataError("informative_fraction must be in (0, 1]")
    rng = np.random.default_rng(seed)
    n_inf = max(1, int(round(informative_fraction * n_features)))
    informative = np.sort(rng.choice(n_features, n_inf, replace=False))
    labels = np.arange(n_samples) % 2
    rng.shuffle(labels)
    values = rng.standard_normal((n_samples, n_features))
    gap = per_feature_gap(separation, overlap, n_inf)
    shift = np.where(labels[:, None] == 1, gap / 2.0, -gap / 2.0)
    values[:, informative] += shift
    prov = {
        "generator": "synth_two_class",
        "seed": int(seed),
        "overlap": float(overlap),
        "separation": float(separation),
        "informative": informative.tolist(),
        "per_feature_gap": float(gap),
    }
    return Dataset(values, labels, _default_names(n_features), provenance=prov)


def per_feature_gap(separation: float, overlap: float, n_informative: int) -> float:
    return separation * (1.0 - overlap) / math.sqrt(n_informative)
