"""Versioned ``.npz`` model files.

Layout: ``format_version``, ``kind`` and ``n_features`` scalars followed by the
model's own arrays (forest node arrays or MLP layer weights).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import FormatVersionError
from .blackbox import BlackBoxModel
from .forest import ForestModel
from .mlp import MlpModel

FORMAT_VERSION = 1


def save_model(m: BlackBoxModel, path: str | Path) -> Path:
    if not isinstance(m, (ForestModel, MlpModel)):
        raise TypeError(f"cannot persist model of type {type(m).__name__}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        np.savez(
            fh,
            format_version=np.array(FORMAT_VERSION),
            kind=np.array(m.kind),
            n_features=np.array(m.n_features),
            **m.arrays(),
        )
    return path


def load_model(path: str | Path) -> BlackBoxModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"]) if "format_version" in z else None
        if version != FORMAT_VERSION:
            raise FormatVersionError(
                f"{path}: model format version {version}, expected {FORMAT_VERSION}"
            )
        kind = str(z["kind"])
        if kind == "forest":
            return ForestModel(
                int(z["n_features"]),
                z["roots"], z["left"], z["right"], z["feature"], z["threshold"], z["vote"],
            )
        if kind == "mlp":
            n = int(z["n_layers"])
            return MlpModel([(z[f"W{i}"], z[f"b{i}"]) for i in range(n)])
    raise FormatVersionError(f"{path}: unknown model kind {kind!r}")
