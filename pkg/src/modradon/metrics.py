"""Image quality and noise measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.ndimage import gaussian_filter

from .forward import snr_db

__all__ = ["QualityReport", "ssim", "display_ssim", "snr_db", "spectral_floor_db",
           "radial_frequency"]


@dataclass
class QualityReport:
    """One row of the quality table; ``ssim`` is the clipped (display) score."""

    ssim: float
    ssim_raw: float
    snr_db: float
    noise_floor_db: float

    def as_row(self) -> dict:
        return asdict(self)


def ssim(a: np.ndarray, b: np.ndarray, sigma: float = 1.5, k1: float = 0.01,
         k2: float = 0.03, data_range: float | None = None) -> float:
    """Mean structural similarity of ``b`` against the reference ``a``.

    Local statistics use an 11 x 11 Gaussian window (``sigma`` 1.5) and the
    population covariance; a border of half the window width is excluded
    from the mean. The dynamic range defaults to ``a.max() - a.min()``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    L = float(a.max() - a.min()) if data_range is None else data_range
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2

    def filt(z):
        return gaussian_filter(z, sigma, mode="reflect", truncate=3.5)

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a**2
    var_b = filt(b * b) - mu_b**2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    pad = int(3.5 * sigma + 0.5)
    smap = num / den
    return float(smap[pad:-pad, pad:-pad].mean())


def display_ssim(reference: np.ndarray, image: np.ndarray) -> float:
    """SSIM after clipping ``image`` to the value range of ``reference``.

    Reconstructions are compared as displayed images; undershoot below the
    background and overshoot above the peak density are cut off.
    """
    reference = np.asarray(reference, dtype=float)
    return ssim(reference, np.clip(image, reference.min(), reference.max()))


def radial_frequency(shape) -> np.ndarray:
    """Radius of each 2-D DFT bin relative to the Nyquist frequency."""
    fy = np.fft.fftfreq(shape[0])[:, None] * 2
    fx = np.fft.fftfreq(shape[1])[None, :] * 2
    return np.hypot(fx, fy)


def spectrum_db(img: np.ndarray) -> np.ndarray:
    """DFT magnitude in dB, ``-inf`` where the magnitude vanishes."""
    mag = np.abs(np.fft.fft2(np.asarray(img, dtype=float)))
    with np.errstate(divide="ignore"):
        return 20 * np.log10(mag)


def spectral_floor_db(img: np.ndarray, band_radius: float = 0.5) -> float:
    """Median DFT magnitude (dB) over bins beyond ``band_radius`` times Nyquist."""
    if not 0 < band_radius < 1:
        raise ValueError("band_radius must lie in (0, 1)")
    img = np.asarray(img, dtype=float)
    if not np.any(img):
        return -math.inf
    sel = radial_frequency(img.shape) > band_radius
    return float(np.median(spectrum_db(img)[sel]))
