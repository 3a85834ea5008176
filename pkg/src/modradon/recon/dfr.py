"""Direct Fourier reconstruction from reduced DFTs of the projections.

Each projection's centered DFT samples the 2-D Fourier transform of the
image on a ray of the polar grid. The image is the weighted polar-grid
Fourier sum

    f(x) = d^2 T / (8 pi M) sum_{m=-M}^{M-1} sum_{n=-K}^{K-1}
           nu_n W(d n / Omega) p_m[n] exp(i d n x . theta_m),   d = pi / (K T),

with ``nu_0 = 1/12`` and ``nu_n = |n|``. Angles ``m < 0`` reuse the data of
``m + M`` with reversed frequency, which doubles the real part of the
``m >= 0`` half. Both evaluators below compute that sum, one exactly and one
through a gridded inverse FFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import i0

from ..geometry import ScanGeometry
from ..unfold import checkerboard
from .filters import FilterWindow, window


@dataclass
class PolarCoefficients:
    """Nonzero terms of the polar Fourier sum: frequencies and complex weights."""

    freqs: np.ndarray   # shape (P, 2), angular frequency vectors
    coeffs: np.ndarray  # shape (P,)


def polar_coefficients(p_tilde: np.ndarray, g: ScanGeometry, w: FilterWindow | str = "cosine") -> PolarCoefficients:
    """Weight the reduced DFTs (``M x N``) into the terms of the polar sum.

    Only ``m >= 0`` is kept and the weights are doubled; the image is the real
    part of the resulting sum.
    """
    w = window(w)
    p_tilde = np.asarray(p_tilde, dtype=complex)
    if g.K_prime != g.K:
        raise ValueError("direct Fourier reconstruction needs K' = K")
    if p_tilde.shape != (g.M, g.N):
        raise ValueError(f"reduced DFTs must have shape ({g.M}, {g.N})")
    K, N = g.K, g.N
    d = math.pi / (K * g.T)
    n = np.arange(-K, K)
    weight = np.abs(n).astype(float)
    weight[K] = 1 / 12
    weight *= w(d * n / g.Omega)
    keep = weight != 0
    n, weight = n[keep], weight[keep]
    pc = checkerboard(p_tilde)[:, n % N]
    scale = 2 * d**2 * g.T / (8 * math.pi * g.M)
    coeffs = (scale * weight[None, :] * pc).reshape(-1)
    ang = g.angles
    fx = (d * np.cos(ang)[:, None] * n[None, :]).reshape(-1)
    fy = (d * np.sin(ang)[:, None] * n[None, :]).reshape(-1)
    return PolarCoefficients(np.stack([fx, fy], axis=1), coeffs)


def _image_axes(R: int):
    # pixel centers, x to the right; rows run from y = +1 down to y = -1
    c = -1 + (2 * np.arange(R) + 1) / R
    return c, c[::-1]


def ndft_reconstruct(p_tilde: np.ndarray, g: ScanGeometry, w: FilterWindow | str = "cosine",
                     R: int = 512) -> np.ndarray:
    """Evaluate the polar Fourier sum exactly at every pixel center.

    Uses one separable matrix product per angle; cost ``O(M K R^2)``.
    """
    if R < 2:
        raise ValueError("R must be at least 2")
    pc = polar_coefficients(p_tilde, g, w)
    x, y = _image_axes(R)
    per = pc.coeffs.size // g.M
    img = np.zeros((R, R), dtype=complex)
    for m in range(g.M):
        sl = slice(m * per, (m + 1) * per)
        fx, fy, c = pc.freqs[sl, 0], pc.freqs[sl, 1], pc.coeffs[sl]
        ey = np.exp(1j * np.outer(y, fy)) * c[None, :]
        ex = np.exp(1j * np.outer(fx, x))
        img += ey @ ex
    return img.real


def ndft_reference(p_tilde_full: np.ndarray, g: ScanGeometry, w: FilterWindow | str, x, y) -> np.ndarray:
    """Literal double sum over all ``2M`` angles at the points ``(x, y)``.

    ``p_tilde_full`` holds reduced DFTs for the angles ``m = -M .. M-1`` in
    that order. Slow; intended as an independent check.
    """
    w = window(w)
    K, N, M = g.K, g.N, g.M
    d = math.pi / (K * g.T)
    n = np.arange(-K, K)
    nu = np.where(n == 0, 1 / 12, np.abs(n).astype(float))
    W = w(d * n / g.Omega)
    x = np.asarray(x, float).ravel()
    y = np.asarray(y, float).ravel()
    out = np.zeros(x.size, dtype=complex)
    for idx, m in enumerate(range(-M, M)):
        phi = m * math.pi / M
        pc = checkerboard(p_tilde_full[idx])[n % N]
        arg = d * np.outer(x * math.cos(phi) + y * math.sin(phi), n)
        out += np.exp(1j * arg) @ (nu * W * pc)
    return (d**2 * g.T / (8 * math.pi * M)) * out


def _kb_params(sigma: float, m: int):
    if not 1.25 <= sigma <= 2.0:
        raise ValueError("oversampling factor must lie in [1.25, 2]")
    if m < 2:
        raise ValueError("kernel half-width must be at least 2")
    return math.pi * m * (2 - 1 / sigma)


def _kb(s, m: int, beta: float):
    s = np.asarray(s, float)
    arg = np.clip(1 - (s / m) ** 2, 0, None)
    return np.where(np.abs(s) <= m, i0(beta * np.sqrt(arg)), 0.0)


def _kb_hat(xi, m: int, beta: float):
    """Continuous Fourier transform of :func:`_kb` at frequency ``xi`` (cycles per cell)."""
    a = 2 * np.pi * m * np.asarray(xi, float)
    z = np.sqrt(np.asarray(beta**2 - a**2, dtype=complex))
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.where(np.abs(z) > 1e-12, np.sinh(z) / z, 1.0)
    return (2 * m * val).real


def nfft_adjoint(freqs: np.ndarray, coeffs: np.ndarray, R: int, sigma: float = 2.0, m: int = 4) -> np.ndarray:
    """Sum ``sum_j c_j exp(i w_j . x)`` over the ``R x R`` pixel centers.

    Kaiser-Bessel gridding: the coefficients are spread onto a ``sigma R``
    oversampled grid, transformed by one inverse FFT and divided by the
    kernel's Fourier transform. Returns a complex array indexed ``[y, x]``
    with ascending ``y``.
    """
    beta = _kb_params(sigma, m)
    G = 2 * math.ceil(sigma * R / 2)
    # x_a = (2/R)(a + shift), a = -(R//2) .. R - 1 - R//2: cycles per index are u = w / (pi R)
    shift = R // 2 - (R - 1) / 2
    u = np.asarray(freqs, float) / (math.pi * R)
    c = np.asarray(coeffs, complex) * np.exp(2j * np.pi * shift * (u[:, 0] + u[:, 1]))
    u = u - np.floor(u + 0.5)
    gpos = u * G
    base = np.floor(gpos).astype(np.intp) - m + 1
    offs = np.arange(2 * m)
    ix = base[:, 0:1] + offs[None, :]
    iy = base[:, 1:2] + offs[None, :]
    wx = _kb(ix - gpos[:, 0:1], m, beta)
    wy = _kb(iy - gpos[:, 1:2], m, beta)
    vals = (c[:, None, None] * wy[:, :, None] * wx[:, None, :]).reshape(-1)
    flat = ((iy % G)[:, :, None] * G + (ix % G)[:, None, :]).reshape(-1)
    grid = (np.bincount(flat, vals.real, G * G) + 1j * np.bincount(flat, vals.imag, G * G))
    field = np.fft.ifft2(grid.reshape(G, G)) * (G * G)
    a = np.arange(R) - R // 2
    crop = field[np.ix_(a % G, a % G)]
    corr = _kb_hat(a / G, m, beta)
    return crop / (corr[:, None] * corr[None, :])


def nfft_reconstruct(p_tilde: np.ndarray, g: ScanGeometry, w: FilterWindow | str = "cosine",
                     R: int = 512, sigma: float = 2.0, m: int = 4) -> np.ndarray:
    """Approximate :func:`ndft_reconstruct` in ``O(M K + R^2 log R)`` operations."""
    if R < 2:
        raise ValueError("R must be at least 2")
    pc = polar_coefficients(p_tilde, g, w)
    img = nfft_adjoint(pc.freqs, pc.coeffs, R, sigma, m)
    return img.real[::-1]
