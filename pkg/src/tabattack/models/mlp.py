"""Small fully-connected classifier: tanh hidden layers, sigmoid output,
binary cross-entropy, hand-written backprop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..errors import TrainingDivergedError
from .blackbox import BlackBoxModel
from .forest import _require_two_classes

Params = list[tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class MlpConfig:
    hidden_widths: tuple[int, ...] = (32,)
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 32
    seed: int = 42
    # "adam" or "sgd"
    optimizer: str = "adam"

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def init_params(widths: list[int], rng: np.random.Generator) -> Params:
    """Glorot-uniform weights, zero biases; ``widths`` includes input and output."""
    params = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        params.append((rng.uniform(-lim, lim, (fan_in, fan_out)), np.zeros(fan_out)))
    return params


def _logits(params: Params, X: np.ndarray):
    acts = [X]
    h = X
    for W, b in params[:-1]:
        h = np.tanh(h @ W + b)
        acts.append(h)
    W, b = params[-1]
    return (h @ W + b)[:, 0], acts


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def mlp_forward(params: Params, X: np.ndarray) -> np.ndarray:
    z, _ = _logits(params, X)
    return _sigmoid(z)


def mlp_loss_and_grads(params: Params, X: np.ndarray, y: np.ndarray):
    """Mean BCE over the batch and its gradient for every (W, b)."""
    z, acts = _logits(params, X)
    n = X.shape[0]
    # softplus(z) - y*z == -[y log p + (1-y) log(1-p)]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    delta = ((_sigmoid(z) - y) / n)[:, None]
    grads: Params = [None] * len(params)
    for li in range(len(params) - 1, -1, -1):
        W, _ = params[li]
        a = acts[li]
        grads[li] = (a.T @ delta, delta.sum(axis=0))
        if li:
            delta = (delta @ W.T) * (1.0 - a * a)
    return loss, grads


class MlpModel(BlackBoxModel):
    kind = "mlp"

    def __init__(self, params: Params, loss_curve: list[float] | None = None):
        super().__init__(params[0][0].shape[0])
        self.params = [(np.asarray(W, float), np.asarray(b, float)) for W, b in params]
        self.loss_curve = list(loss_curve or [])

    def _proba(self, rows):
        return mlp_forward(self.params, rows)

    def arrays(self) -> dict[str, np.ndarray]:
        out = {"n_layers": np.array(len(self.params))}
        for i, (W, b) in enumerate(self.params):
            out[f"W{i}"] = W
            out[f"b{i}"] = b
        return out


def train_mlp(train: Dataset, cfg: MlpConfig = MlpConfig()) -> MlpModel:
    _require_two_classes(train)
    rng = np.random.default_rng(cfg.seed)
    widths = [train.n_features, *cfg.hidden_widths, 1]
    params = init_params(widths, rng)
    X, y = train.values, train.labels.astype(float)
    n = X.shape[0]
    bs = max(1, min(cfg.batch_size, n))

    m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    b1, b2, eps = 0.9, 0.999, 1e-8
    step = 0
    curve = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            loss, grads = mlp_loss_and_grads(params, X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"MLP loss became non-finite at epoch {epoch}")
            total += loss * idx.size
            step += 1
            new = []
            for li, ((W, b), (gW, gb)) in enumerate(zip(params, grads)):
                if cfg.optimizer == "sgd":
                    new.append((W - cfg.learning_rate * gW, b - cfg.learning_rate * gb))
                    continue
                mW, mb = m[li]
                vW, vb = v[li]
                mW, mb = b1 * mW + (1 - b1) * gW, b1 * mb + (1 - b1) * gb
                vW, vb = b2 * vW + (1 - b2) * gW**2, b2 * vb + (1 - b2) * gb**2
                m[li], v[li] = (mW, mb), (vW, vb)
                c1, c2 = 1 - b1**step, 1 - b2**step
                new.append((
                    W - cfg.learning_rate * (mW / c1) / (np.sqrt(vW / c2) + eps),
                    b - cfg.learning_rate * (mb / c1) / (np.sqrt(vb / c2) + eps),
                ))
            params = new
        curve.append(total / n)
        if not np.isfinite(curve[-1]):
            raise TrainingDivergedError(f"MLP loss became non-finite at epoch {epoch}")
    return MlpModel(params, curve)
