"""Discrete filtered back projection with linear interpolation."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.signal import fftconvolve

from ..forward import Sinogram
from ..geometry import ScanGeometry
from ..phantoms import pixel_centers
from .filters import FilterWindow, filter_kernel, window


def filtered_projections(data: np.ndarray, g: ScanGeometry, w: FilterWindow):
    """Convolve each row with ``F_Omega`` on the grid ``iT`` covering ``|t| <= sqrt(2) + T``.

    Returns ``(h, i_lo)`` where ``h[:, j]`` is the filtered projection at
    ``t = (i_lo + j) T``.
    """
    reach = math.sqrt(2) + g.T
    i_lo = math.floor(-reach / g.T)
    i_hi = math.ceil(reach / g.T)
    offsets = np.arange(i_lo - g.K_prime, i_hi + g.K + 1)
    kern = filter_kernel(w, g.Omega, g.T, offsets)
    full = fftconvolve(data, kern[None, :], axes=1)
    h = g.T * full[:, g.N:g.N + (i_hi - i_lo) + 1]
    return h, i_lo


def _backproject(h, i_lo, T, angles, x, y):
    img = np.zeros((y.shape[0], x.shape[1]))
    last = h.shape[1] - 1
    for row, phi in zip(h, angles):
        pos = (x * math.cos(phi) + y * math.sin(phi)) / T - i_lo
        i0 = np.clip(np.floor(pos).astype(np.intp), 0, last - 1)
        frac = pos - i0
        img += row[i0] + frac * (row[i0 + 1] - row[i0])
    return img


def backproject(h: np.ndarray, i_lo: int, g: ScanGeometry, R: int, workers: int = 1,
                block: int = 16):
    """Average the filtered projections over all angles at every pixel center.

    Angles are processed in fixed blocks of ``block``; each block yields a
    partial image and the partial images are summed in block order, so the
    result is bitwise the same for any number of workers.
    """
    x, y = pixel_centers(R)
    angles = g.angles
    blocks = [np.arange(i, min(i + block, g.M)) for i in range(0, g.M, block)]

    def part(b):
        return _backproject(h[b], i_lo, g.T, angles[b], x, y)

    if workers <= 1:
        parts = map(part, blocks)
    else:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(part, blocks))
    img = np.zeros((R, R))
    for p in parts:
        img += p
    return img / (2 * g.M)


def fbp(p: Sinogram, w: FilterWindow | str = "cosine", R: int = 512, workers: int = 1):
    """Reconstruct an ``R x R`` image over ``[-1, 1]^2`` from filtered projections."""
    if p.kind != "filtered":
        raise ValueError("FBP expects a pre-filtered sinogram")
    h, i_lo = filtered_projections(p.data, p.geometry, window(w))
    return backproject(h, i_lo, p.geometry, R, workers)
