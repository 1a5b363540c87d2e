"""Spectral tamper detection: log power spectra of data matrices compared
with SSIM, on the whole matrix and on the FP / FN row subsets."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

from .errors import DataError, ShapeError
from .models.outcomes import OutcomePartition

WINDOW = 11
SIGMA = 1.5
K1, K2 = 0.01, 0.03
DEFAULT_SSIM_THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class PowerSpectrum:
    values: np.ndarray  # log(1 + |X|^2), zero frequency at the centre
    source_shape: tuple[int, int]
    mode: str = "2d"


@dataclass(frozen=True)
class SpectralReport:
    ssim_dataset: float
    ssim_fp: float | None
    ssim_fn: float | None
    threshold: float = DEFAULT_SSIM_THRESHOLD
    mode: str = "2d"
    n_fp: int = 0
    n_fn: int = 0

    @staticmethod
    def _verdict(score, threshold):
        if score is None:
            return None
        return "tampering suspected" if score < threshold else "no evidence"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["compression"] = "log1p(power)"
        d["verdict_dataset"] = self._verdict(self.ssim_dataset, self.threshold)
        d["verdict_fp"] = self._verdict(self.ssim_fp, self.threshold)
        d["verdict_fn"] = self._verdict(self.ssim_fn, self.threshold)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _as_matrix(d) -> np.ndarray:
    x = getattr(d, "values", d)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.size == 0:
        raise DataError("power spectrum needs a non-empty 2-D matrix")
    return x


def raw_power(d, mode: str = "2d") -> np.ndarray:
    """|FFT|^2 without compression or shifting."""
    x = _as_matrix(d)
    if mode == "2d":
        return np.abs(np.fft.fft2(x)) ** 2
    if mode == "1d":
        # rows concatenated into one long signal, folded back to the source shape
        return (np.abs(np.fft.fft(x.reshape(-1))) ** 2).reshape(x.shape)
    raise ValueError(f"unknown spectrum mode {mode!r}")


def power_spectrum(d, mode: str = "2d") -> PowerSpectrum:
    x = _as_matrix(d)
    p = raw_power(x, mode)
    if mode == "2d":
        p = np.fft.fftshift(p)
    else:
        p = np.fft.fftshift(p.reshape(-1)).reshape(x.shape)
    return PowerSpectrum(np.log1p(p), x.shape, mode)


def _gauss(size: int) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-(r**2) / (2 * SIGMA**2))
    return w / w.sum()


def _window_size(n: int) -> int:
    w = min(WINDOW, n)
    return w if w % 2 else w - 1


def _filter(img: np.ndarray, sizes) -> np.ndarray:
    out = img
    for axis, size in enumerate(sizes):
        out = correlate1d(out, _gauss(size), axis=axis, mode="reflect")
    return out


def ssim(a, b, data_range: float | None = None) -> float:
    """Mean local SSIM with a Gaussian window (11 taps, sigma 1.5).

    The window shrinks along any axis shorter than 11 (so a single row is
    compared with a 1-D window). Statistics are taken only where the window
    fits entirely inside the image.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a, b = a.reshape(1, -1), b.reshape(1, -1)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise DataError("ssim of empty matrices")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DataError("ssim inputs must be finite")
    L = data_range
    if L is None:
        L = max(a.max(), b.max()) - min(a.min(), b.min())
    if L == 0:
        if np.array_equal(a, b):
            return 1.0
        raise DataError("zero dynamic range with unequal inputs")
    # SSIM is unchanged when both inputs and L are scaled together; working at
    # L = 1 keeps c1, c2 from underflowing on tiny ranges
    a, b = a / L, b / L
    c1, c2 = K1**2, K2**2
    sizes = [_window_size(n) for n in a.shape]

    mu_a, mu_b = _filter(a, sizes), _filter(b, sizes)
    saa = _filter(a * a, sizes) - mu_a * mu_a
    sbb = _filter(b * b, sizes) - mu_b * mu_b
    sab = _filter(a * b, sizes) - mu_a * mu_b
    s = ((2 * mu_a * mu_b + c1) * (2 * sab + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (saa + sbb + c2)
    )
    crop = tuple(slice((w - 1) // 2, n - (w - 1) // 2) for w, n in zip(sizes, a.shape))
    return float(np.clip(s[crop].mean(), -1.0, 1.0))


def _subset_ssim(orig, att, rows, mode):
    if len(rows) == 0:
        return None
    return ssim(power_spectrum(orig[rows], mode).values, power_spectrum(att[rows], mode).values)


def detect(
    original,
    attacked,
    partition: OutcomePartition,
    threshold: float = DEFAULT_SSIM_THRESHOLD,
    mode: str = "2d",
) -> SpectralReport:
    """SSIM between spectra of ``original`` and ``attacked``.

    ``partition`` is the outcome partition of the *attacked* data; its FP
    and FN row sets pick the same rows out of both matrices.
    """
    orig = _as_matrix(original)
    att = _as_matrix(attacked)
    if orig.shape != att.shape:
        raise ShapeError(f"shape mismatch: {orig.shape} vs {att.shape}")
    return SpectralReport(
        ssim_dataset=ssim(power_spectrum(orig, mode).values, power_spectrum(att, mode).values),
        ssim_fp=_subset_ssim(orig, att, partition.fp, mode),
        ssim_fn=_subset_ssim(orig, att, partition.fn, mode),
        threshold=threshold,
        mode=mode,
        n_fp=len(partition.fp),
        n_fn=len(partition.fn),
    )


def spectrum_csv(ps: PowerSpectrum, path: str | Path) -> Path:
    path = Path(path)
    np.savetxt(path, ps.values, delimiter=",", fmt="%.10g")
    return path


def write_pgm(img, path: str | Path) -> Path:
    """8-bit binary PGM, linearly stretched to the image's own range."""
    img = np.asarray(img, dtype=float)
    lo, hi = img.min(), img.max()
    scaled = np.zeros_like(img) if hi == lo else (img - lo) / (hi - lo)
    data = np.round(scaled * 255).astype(np.uint8)
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())
    return path
