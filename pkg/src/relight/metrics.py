"""Masked pixel-similarity metrics: PSNR and single-scale SSIM."""

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ContractError
from .image import ImageF, Mask

PSNR_CAP_DB = 99.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def _check_pair(a: ImageF, b: ImageF, m: Mask):
    if a.data.shape != b.data.shape:
        raise ContractError(f"image shapes differ: {a.data.shape} vs {b.data.shape}")
    m.require_match(a)
    if m.nonzero_count() == 0:
        raise ContractError("mask has no nonzero pixel")


def psnr_masked(a: ImageF, b: ImageF, m: Mask) -> float:
    """Mask-weighted PSNR in dB with peak 1.0, capped at 99 dB."""
    _check_pair(a, b, m)
    w = m.data.astype(np.float64)
    diff2 = ((a.data.astype(np.float64) - b.data.astype(np.float64)) ** 2).mean(axis=-1)
    mse = float((w * diff2).sum() / w.sum())
    if mse < 1e-12:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(1.0 / mse))


def _gaussian_kernel(n=_SSIM_WINDOW, sigma=_SSIM_SIGMA):
    x = np.arange(n, dtype=np.float64) - (n - 1) / 2.0
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _window_mean(x, kernel):
    y = correlate1d(x, kernel, axis=0, mode="reflect")
    return correlate1d(y, kernel, axis=1, mode="reflect")


def ssim_masked(a: ImageF, b: ImageF, m: Mask) -> float:
    """Single-scale SSIM averaged over pixels whose window overlaps the mask.

    11-tap Gaussian window (sigma 1.5), k1=0.01, k2=0.03, dynamic range
    1.0, reflect boundary. Multichannel images average the per-channel
    scores.
    """
    _check_pair(a, b, m)
    kernel = _gaussian_kernel()
    c1 = _SSIM_K1 ** 2
    c2 = _SSIM_K2 ** 2
    coverage = _window_mean(m.data.astype(np.float64), kernel)
    include = coverage > 1e-12
    if not include.any():
        raise ContractError("mask has no nonzero pixel")
    scores = []
    for c in range(a.channels):
        x = a.data[..., c].astype(np.float64)
        y = b.data[..., c].astype(np.float64)
        mu_x = _window_mean(x, kernel)
        mu_y = _window_mean(y, kernel)
        var_x = _window_mean(x * x, kernel) - mu_x * mu_x
        var_y = _window_mean(y * y, kernel) - mu_y * mu_y
        cov = _window_mean(x * y, kernel) - mu_x * mu_y
        ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
            (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2))
        scores.append(ssim_map[include].mean())
    return float(np.mean(scores))
