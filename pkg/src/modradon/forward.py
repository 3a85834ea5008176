"""Measurement model: ideal low-pass pre-filter, modulo folding, noise, quantization."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .geometry import ScanGeometry
from .phantoms import Phantom


@dataclass
class Sinogram:
    """Unfolded projections, one row per angle.

    ``source`` optionally evaluates the continuous projections ``p(t, phi)``;
    the pre-filter uses it to resample rows on a finer grid.
    """

    data: np.ndarray
    geometry: ScanGeometry
    kind: str = "raw"
    source: Callable | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        g = self.geometry
        if self.data.shape != (g.M, g.N + 1):
            raise ValueError(f"sinogram shape {self.data.shape} does not match "
                             f"geometry ({g.M}, {g.N + 1})")
        if self.kind not in ("raw", "filtered"):
            raise ValueError(f"unknown sinogram kind {self.kind!r}")


@dataclass
class ModuloSinogram:
    """Folded projections with entries in ``[-lam, lam)``."""

    data: np.ndarray
    geometry: ScanGeometry
    lam: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        g = self.geometry
        if self.data.shape != (g.M, g.N + 1):
            raise ValueError("folded data does not match geometry")


@dataclass(frozen=True)
class NoiseSpec:
    """Noise levels of the simulated acquisition.

    ``uniform`` is the absolute bound of post-fold uniform noise,
    ``gaussian_rel`` scales the per-angle mean of the unfolded projection to a
    pre-fold standard deviation, and ``shot_amplitude``/``shot_max`` add up to
    ``shot_max`` outliers per angle drawn from ``[-A, A]`` after folding.
    """

    uniform: float = 0.0
    gaussian_rel: float = 0.0
    shot_amplitude: float = 0.0
    shot_max: int = 0
    seed: int = 0
    shot_refold: bool = False

    def __post_init__(self):
        if min(self.uniform, self.gaussian_rel, self.shot_amplitude, self.shot_max) < 0:
            raise ValueError("noise magnitudes must be nonnegative")

    @property
    def is_zero(self) -> bool:
        return not (self.uniform or self.gaussian_rel or (self.shot_amplitude and self.shot_max))


def from_phantom(p: Phantom, g: ScanGeometry) -> Sinogram:
    """Raw sinogram of an analytic phantom, carrying the phantom as resampling source."""
    t = g.radial_positions
    return Sinogram(p.radon(t[None, :], g.angles[:, None]), g, "raw", source=p.radon)


def lowpass_rows(rows: np.ndarray, step: float, Omega: float) -> np.ndarray:
    """Zero every DFT bin of each row whose angular frequency exceeds ``Omega``."""
    L = rows.shape[-1]
    freq = 2 * np.pi * np.fft.rfftfreq(L, d=step)
    spec = np.fft.rfft(rows, axis=-1)
    spec[..., freq > Omega] = 0.0
    return np.fft.irfft(spec, n=L, axis=-1)


def prefilter(raw: Sinogram, Q: int = 8, pad: int = 2) -> Sinogram:
    """Apply the ideal low-pass filter ``1_[-Omega, Omega]`` to every projection.

    Rows are resampled ``Q`` times denser over ``[-(K+pad)T, (K'+pad)T]`` from
    ``raw.source`` when available, filtered in the DFT domain and decimated
    back onto the scan grid. Without a source the rows are zero-extended by
    ``pad`` samples and filtered on the native grid.
    """
    if raw.kind != "raw":
        raise ValueError("prefilter expects a raw sinogram")
    if Q < 1:
        raise ValueError("Q must be >= 1")
    g = raw.geometry
    if raw.source is not None:
        j = np.arange(-(g.K + pad) * Q, (g.K_prime + pad) * Q + 1)
        t = j * (g.T / Q)
        fine = raw.source(t[None, :], g.angles[:, None])
        filt = lowpass_rows(fine, g.T / Q, g.Omega)
        data = filt[:, pad * Q:(pad + g.N) * Q + 1:Q]
    else:
        ext = np.pad(raw.data, ((0, 0), (pad, pad)))
        data = lowpass_rows(ext, g.T, g.Omega)[:, pad:pad + g.N + 1]
    return Sinogram(data, g, "filtered", source=None)


def normalize(s: Sinogram) -> tuple[Sinogram, float]:
    """Scale a sinogram to peak value 1; returns the sinogram and the factor used."""
    peak = float(np.max(np.abs(s.data)))
    if peak == 0:
        return s, 1.0
    return replace(s, data=s.data / peak), 1.0 / peak


def modulo(x, lam: float):
    """Centered modulo ``x - 2 lam floor((x + lam) / (2 lam))``, values in ``[-lam, lam)``."""
    x = np.asarray(x, dtype=float)
    out = x - 2 * lam * np.floor((x + lam) / (2 * lam))
    # round-off can land one ulp outside [-lam, lam); such values sit on the boundary
    out = np.where(out >= lam, out - 2 * lam, out)
    out = np.where(out < -lam, out + 2 * lam, out)
    out = np.where(out >= lam, -lam, out)
    # values already in range pass through untouched, which makes folding idempotent
    return np.where((x >= -lam) & (x < lam), x, out)


def fold(s: Sinogram | np.ndarray, lam: float):
    if not lam > 0:
        raise ValueError("modulo threshold must be positive")
    if isinstance(s, Sinogram):
        return ModuloSinogram(modulo(s.data, lam), s.geometry, lam)
    return modulo(s, lam)


def _row_rng(seed: int, m: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream, m])))


_GAUSS, _UNIFORM, _SHOT = 1, 2, 3


def gaussian_noise(clean: np.ndarray, rel: float, seed: int) -> np.ndarray:
    """Per-angle white Gaussian noise with std ``rel * mean(row)``."""
    out = np.empty_like(clean)
    for m, row in enumerate(clean):
        sigma = rel * abs(row.mean())
        out[m] = _row_rng(seed, m, _GAUSS).normal(0.0, 1.0, row.size) * sigma
    return out


def uniform_noise(shape, level: float, seed: int) -> np.ndarray:
    out = np.empty(shape)
    for m in range(shape[0]):
        out[m] = _row_rng(seed, m, _UNIFORM).uniform(-level, level, shape[1])
    return out


def shot_noise(shape, amplitude: float, max_count: int, seed: int) -> np.ndarray:
    """Sparse outliers: per row, a uniform count in ``0..max_count`` at distinct positions."""
    out = np.zeros(shape)
    for m in range(shape[0]):
        rng = _row_rng(seed, m, _SHOT)
        count = int(rng.integers(0, max_count + 1))
        pos = rng.choice(shape[1], size=min(count, shape[1]), replace=False)
        out[m, pos] = rng.uniform(-amplitude, amplitude, pos.size)
    return out


def snr_db(clean: np.ndarray, noisy: np.ndarray) -> float:
    """``20 log10(||clean|| / ||noisy - clean||)``; ``inf`` for identical inputs."""
    clean = np.asarray(clean, float)
    err = np.linalg.norm(np.asarray(noisy, float) - clean)
    if err == 0:
        return math.inf
    sig = np.linalg.norm(clean)
    if sig == 0:
        return -math.inf
    return 20 * math.log10(sig / err)


def add_noise(x: Sinogram | ModuloSinogram, spec: NoiseSpec):
    """Return a noisy copy of ``x`` and the realized SNR in dB.

    Gaussian noise acts on unfolded data only, uniform and shot noise on
    folded data only; anything else raises ``ValueError``.
    """
    if isinstance(x, ModuloSinogram):
        if spec.gaussian_rel:
            raise ValueError("Gaussian noise is applied before folding")
        noisy = x.data.copy()
        if spec.uniform:
            noisy += uniform_noise(noisy.shape, spec.uniform, spec.seed)
        if spec.shot_amplitude and spec.shot_max:
            noisy += shot_noise(noisy.shape, spec.shot_amplitude, spec.shot_max, spec.seed)
            if spec.shot_refold:
                noisy = modulo(noisy, x.lam)
        out = replace(x, data=noisy)
    else:
        if spec.uniform or (spec.shot_amplitude and spec.shot_max):
            raise ValueError("uniform and shot noise are applied after folding")
        noisy = x.data.copy()
        if spec.gaussian_rel:
            noisy += gaussian_noise(x.data, spec.gaussian_rel, spec.seed)
        out = replace(x, data=noisy)
    return out, snr_db(x.data, out.data)


def quantize(x, bits: float, lo: float, hi: float):
    """Uniform mid-rise quantizer with ``round(2**bits)`` levels over ``[lo, hi]``.

    Values are clipped to the range and mapped to the center of their cell.
    Accepts arrays or (modulo) sinograms.
    """
    if not bits > 0 or not hi > lo:
        raise ValueError("need bits > 0 and a nonempty range")
    if isinstance(x, (Sinogram, ModuloSinogram)):
        return replace(x, data=quantize(x.data, bits, lo, hi))
    x = np.asarray(x, dtype=float)
    levels = max(int(round(2.0 ** bits)), 1)
    step = (hi - lo) / levels
    idx = np.clip(np.floor((np.clip(x, lo, hi) - lo) / step), 0, levels - 1)
    return lo + (idx + 0.5) * step


def estimate_rho(s: Sinogram | np.ndarray, lam: float, g: ScanGeometry | None = None) -> float:
    """Smallest radius outside of which every sample satisfies ``|p| < lam``."""
    if isinstance(s, Sinogram):
        data, g = s.data, s.geometry
    else:
        data = np.atleast_2d(np.asarray(s, float))
    if g is None:
        raise ValueError("geometry required for raw arrays")
    t = np.abs(g.radial_positions)
    hit = np.any(np.abs(data) >= lam, axis=0)
    return float(t[hit].max()) if hit.any() else 0.0
