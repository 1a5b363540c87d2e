"""Variational autoencoder for synthesising poisoned samples.

A tanh MLP encoder/decoder trained on reconstruction error plus the
closed-form KL divergence to N(0, I). Poisoned samples are decoded from a
point on the straight latent path between a source and a target encoding.
All gradients are written out by hand.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .attack import interpolate
from .data import Dataset
from .errors import DataError, FormatVersionError, ShapeError, TrainingDivergedError
from .models.mlp import init_params
from .spectral import ssim

FORMAT_VERSION = 1
FULL_WIDTHS = (2100, 1600, 1200, 800, 512)
FULL_LATENT = 500
MIN_WIDTH = 8


@dataclass(frozen=True)
class VaeParams:
    input_dim: int
    latent_dim: int = FULL_LATENT
    widths: tuple[int, ...] = FULL_WIDTHS
    epochs: int = 200
    learning_rate: float = 0.005
    batch_size: int = 64
    seed: int = 0
    desk_scale: bool = True
    # "sum": squared error norm per sample; "mean": averaged over features
    reconstruction: str = "sum"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.latent_dim < 1 or self.input_dim < 1:
            raise ValueError("dimensions must be >= 1")
        if self.reconstruction not in ("mean", "sum"):
            raise ValueError(f"unknown reconstruction {self.reconstruction!r}")

    def architecture(self) -> tuple[list[int], int]:
        """(encoder hidden widths, latent width) after optional shrinking."""
        widths, latent = list(self.widths), self.latent_dim
        if self.desk_scale and widths and self.input_dim < widths[0]:
            f = self.input_dim / widths[0]
            widths = [max(MIN_WIDTH, int(w * f)) for w in widths]
            latent = max(MIN_WIDTH, int(latent * f))
        return widths, latent


@dataclass(frozen=True, eq=False)
class LatentCode:
    mu: np.ndarray
    log_var: np.ndarray
    z: np.ndarray
    eps: np.ndarray


@dataclass(frozen=True)
class GenQuality:
    mse: float
    ssim: float
    cosine: float
    ttg_seconds: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Vae:
    """Weights in order: encoder hidden layers, mu head, log-variance head,
    decoder hidden layers, decoder output layer."""

    params: VaeParams
    weights: list[tuple[np.ndarray, np.ndarray]]
    n_hidden: int
    loss_curve: list[float] = field(default_factory=list)
    mse_curve: list[float] = field(default_factory=list)
    kld_curve: list[float] = field(default_factory=list)

    @property
    def latent_dim(self) -> int:
        return self.weights[self.n_hidden][0].shape[1]

    @property
    def input_dim(self) -> int:
        return self.weights[0][0].shape[0]


def vae_loss(x, x_hat, mu, log_var, reconstruction: str = "sum"):
    """(total, reconstruction term, KL term) for one sample or a batch mean.

    KL term: ``-0.5 * sum(1 + log_var - mu**2 - exp(log_var))`` per sample.
    """
    arrs = [np.asarray(v, dtype=float) for v in (x, x_hat, mu, log_var)]
    x, x_hat, mu, log_var = [a.reshape(1, -1) if a.ndim == 1 else a for a in arrs]
    if x.shape != x_hat.shape or mu.shape != log_var.shape or x.shape[0] != mu.shape[0]:
        raise ShapeError("vae_loss shape disagreement")
    if not all(np.all(np.isfinite(a)) for a in (x, x_hat, mu, log_var)):
        raise DataError("vae_loss inputs must be finite")
    sq = (x - x_hat) ** 2
    rec = sq.mean(axis=1) if reconstruction == "mean" else sq.sum(axis=1)
    kld = -0.5 * np.sum(1.0 + log_var - mu**2 - np.exp(log_var), axis=1)
    rec_m, kld_m = float(rec.mean()), float(kld.mean())
    return rec_m + kld_m, rec_m, kld_m


def init_vae(params: VaeParams) -> Vae:
    rng = np.random.default_rng(params.seed)
    widths, latent = params.architecture()
    enc = init_params([params.input_dim, *widths], rng) if widths else []
    last = widths[-1] if widths else params.input_dim
    mu_head = init_params([last, latent], rng)
    lv_head = init_params([last, latent], rng)
    dec = init_params([latent, *reversed(widths), params.input_dim], rng)
    return Vae(params, enc + mu_head + lv_head + dec, len(widths))


def _encode(w, n_hidden, X):
    acts = [X]
    h = X
    for W, b in w[:n_hidden]:
        h = np.tanh(h @ W + b)
        acts.append(h)
    Wm, bm = w[n_hidden]
    Wv, bv = w[n_hidden + 1]
    return h @ Wm + bm, h @ Wv + bv, acts


def _decode(w, n_hidden, Z):
    acts = [Z]
    g = Z
    for W, b in w[n_hidden + 2:]:
        g = np.tanh(g @ W + b)
        acts.append(g)
    return g, acts


def loss_and_grads(vae: Vae, X: np.ndarray, eps: np.ndarray):
    """Batch-mean loss and exact gradients with the noise ``eps`` held fixed.

    Returns ``(total, rec, kld, grads)``.
    """
    w, nh = vae.weights, vae.n_hidden
    B, D = X.shape
    mu, lv, enc_acts = _encode(w, nh, X)
    std = np.exp(0.5 * lv)
    Z = mu + std * eps
    X_hat, dec_acts = _decode(w, nh, Z)
    total, rec, kld = vae_loss(X, X_hat, mu, lv, vae.params.reconstruction)

    grads: list = [None] * len(w)
    scale = 2.0 / (B * D) if vae.params.reconstruction == "mean" else 2.0 / B
    # every decoder layer (output included) ends in tanh
    delta = scale * (X_hat - X) * (1.0 - X_hat**2)
    dec_layers = list(range(nh + 2, len(w)))
    for j in range(len(dec_layers) - 1, -1, -1):
        li = dec_layers[j]
        a = dec_acts[j]
        grads[li] = (a.T @ delta, delta.sum(axis=0))
        delta = delta @ w[li][0].T
        if j:
            delta = delta * (1.0 - a * a)
    dZ = delta
    d_mu = dZ + mu / B
    d_lv = dZ * eps * 0.5 * std + 0.5 * (np.exp(lv) - 1.0) / B

    h = enc_acts[-1]
    grads[nh] = (h.T @ d_mu, d_mu.sum(axis=0))
    grads[nh + 1] = (h.T @ d_lv, d_lv.sum(axis=0))
    delta = d_mu @ w[nh][0].T + d_lv @ w[nh + 1][0].T
    for li in range(nh - 1, -1, -1):
        out = enc_acts[li + 1]
        delta = delta * (1.0 - out * out)
        grads[li] = (enc_acts[li].T @ delta, delta.sum(axis=0))
        delta = delta @ w[li][0].T
    return total, rec, kld, grads


def train_vae(train: Dataset | np.ndarray, params: VaeParams) -> Vae:
    """Plain mini-batch gradient descent with reparameterised sampling."""
    X = np.asarray(getattr(train, "values", train), dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError("VAE training data must be a non-empty matrix")
    if X.shape[1] != params.input_dim:
        raise ShapeError(f"VAE input_dim {params.input_dim}, data width {X.shape[1]}")
    if X.min() < -1.0 or X.max() > 1.0:
        raise DataError("VAE expects data normalized to [-1, 1]")
    vae = init_vae(params)
    rng = np.random.default_rng(params.seed + 1)
    n = X.shape[0]
    bs = max(1, min(params.batch_size, n))
    lr = params.learning_rate
    for epoch in range(params.epochs):
        order = rng.permutation(n)
        tot = rec_s = kld_s = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            eps = rng.standard_normal((idx.size, vae.latent_dim))
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    total, rec, kld, grads = loss_and_grads(vae, X[idx], eps)
            except DataError:
                total = float("nan")
            if not np.isfinite(total):
                raise TrainingDivergedError(f"VAE loss became non-finite at epoch {epoch}")
            vae.weights = [(W - lr * gW, b - lr * gb) for (W, b), (gW, gb) in zip(vae.weights, grads)]
            tot += total * idx.size
            rec_s += rec * idx.size
            kld_s += kld * idx.size
        vae.loss_curve.append(tot / n)
        vae.mse_curve.append(rec_s / n)
        vae.kld_curve.append(kld_s / n)
    return vae


def encode(vae: Vae, x, seed: int = 0) -> LatentCode:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != vae.input_dim:
        raise ShapeError(f"VAE input width {vae.input_dim}, got {x.shape[0]}")
    mu, lv, _ = _encode(vae.weights, vae.n_hidden, x[None, :])
    mu, lv = mu[0], lv[0]
    eps = np.random.default_rng(seed).standard_normal(mu.shape[0])
    return LatentCode(mu, lv, mu + np.exp(0.5 * lv) * eps, eps)


def decode(vae: Vae, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    out, _ = _decode(vae.weights, vae.n_hidden, z.reshape(-1, vae.latent_dim))
    return out[0] if single else out


def generate_poisoned(
    vae: Vae,
    source,
    target,
    n: int = 100,
    position: int | None = None,
    sample_z: bool = False,
    seed: int = 0,
) -> np.ndarray:
    """Decode the point at ``position`` (default ``n-1``) on the latent path
    from ``source`` to ``target``. Endpoints are the encoder means unless
    ``sample_z`` is set."""
    position = n - 1 if position is None else position
    if not 0 <= position < n:
        raise ValueError("position must lie in [0, n)")
    cs, ct = encode(vae, source, seed), encode(vae, target, seed + 1)
    zs, zt = (cs.z, ct.z) if sample_z else (cs.mu, ct.mu)
    path = interpolate(zs, zt, n)
    return decode(vae, path[position])


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 1.0 if na == nb else 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def score_generation(originals, generated, elapsed: float) -> GenQuality:
    """Mean per-sample MSE, SSIM (each row as a one-row image) and cosine."""
    o = np.asarray(originals, dtype=float)
    g = np.asarray(generated, dtype=float)
    if o.shape != g.shape:
        raise ShapeError(f"shape mismatch: {o.shape} vs {g.shape}")
    if o.ndim == 1:
        o, g = o[None, :], g[None, :]
    n = o.shape[0]
    if n == 0:
        return GenQuality(0.0, 1.0, 1.0, float(elapsed), 0)
    mse = float(np.mean((o - g) ** 2))
    s = float(np.mean([ssim(a[None, :], b[None, :]) for a, b in zip(o, g)]))
    c = float(np.mean([cosine(a, b) for a, b in zip(o, g)]))
    return GenQuality(mse, s, c, float(elapsed), n)


def generate_batch(vae: Vae, sources, targets, n_interp: int = 100, position=None):
    """Generate one poisoned vector per (source, target) pair; returns
    ``(batch, elapsed_seconds)``."""
    t0 = time.perf_counter()
    out = [generate_poisoned(vae, s, t, n_interp, position) for s, t in zip(sources, targets)]
    batch = np.array(out).reshape(len(out), vae.input_dim)
    return batch, time.perf_counter() - t0


def save_vae(vae: Vae, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    widths, latent = vae.params.architecture()
    descriptor = {
        "format_version": FORMAT_VERSION,
        "params": asdict(vae.params),
        "encoder_widths": widths,
        "latent_dim": latent,
    }
    arrays = {}
    for i, (W, b) in enumerate(vae.weights):
        arrays[f"W{i}"] = W
        arrays[f"b{i}"] = b
    with path.open("wb") as fh:
        np.savez(
            fh,
            format_version=np.array(FORMAT_VERSION),
            descriptor=np.array(json.dumps(descriptor, sort_keys=True)),
            n_layers=np.array(len(vae.weights)),
            n_hidden=np.array(vae.n_hidden),
            **arrays,
        )
    return path


def load_vae(path: str | Path) -> Vae:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"VAE file not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"]) if "format_version" in z else None
        if version != FORMAT_VERSION:
            raise FormatVersionError(f"{path}: VAE format version {version}, expected {FORMAT_VERSION}")
        desc = json.loads(str(z["descriptor"]))
        params = VaeParams(**desc["params"])
        weights = [(z[f"W{i}"], z[f"b{i}"]) for i in range(int(z["n_layers"]))]
        return Vae(params, weights, int(z["n_hidden"]))
