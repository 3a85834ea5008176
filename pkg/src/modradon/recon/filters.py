"""Low-pass windows and the band-limited ramp kernel used by both reconstructors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def _cosine(s):
    return np.cos(np.pi * s / 2)


def _ram_lak(s):
    return np.ones_like(s)


_WINDOWS = {"cosine": _cosine, "ram-lak": _ram_lak}


@dataclass(frozen=True)
class FilterWindow:
    """Even window ``W`` on ``[-1, 1]``, zero outside.

    ``tag`` is ``"cosine"``, ``"ram-lak"`` or ``"custom"``; a custom window is
    given either as a callable on ``[0, 1]`` or as a table of samples on an
    equispaced grid of ``[0, 1]`` (linearly interpolated).
    """

    tag: str = "cosine"
    func: Callable | None = field(default=None, compare=False)
    table: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.tag not in _WINDOWS and self.tag != "custom":
            raise ValueError(f"unknown window {self.tag!r}")
        if self.tag == "custom" and self.func is None and self.table is None:
            raise ValueError("custom window needs func or table")

    def __call__(self, s):
        s = np.abs(np.asarray(s, dtype=float))
        if self.tag in _WINDOWS:
            w = _WINDOWS[self.tag](s)
        elif self.func is not None:
            w = np.asarray(self.func(np.minimum(s, 1.0)), dtype=float)
        else:
            tab = np.asarray(self.table, dtype=float)
            w = np.interp(s, np.linspace(0, 1, tab.size), tab)
        return np.where(s <= 1.0, w, 0.0)


def window(tag_or_window) -> FilterWindow:
    if isinstance(tag_or_window, FilterWindow):
        return tag_or_window
    return FilterWindow(str(tag_or_window))


def ramp_kernel(w: FilterWindow, Omega: float, t, nodes: int | None = None) -> np.ndarray:
    """Evaluate ``F_Omega(t)``, the inverse Fourier transform of ``|S| W(S/Omega)``.

    ``F_Omega(t) = Omega^2/pi * int_0^1 u W(u) cos(Omega t u) du``, integrated
    with Gauss-Legendre; the default node count resolves every oscillation
    over the requested ``t`` range.
    """
    t = np.asarray(t, dtype=float)
    if nodes is None:
        span = float(np.max(np.abs(t))) if t.size else 0.0
        nodes = int(Omega * span / 2) + 256
    x, wts = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (x + 1)
    wts = 0.5 * wts * u * w(u)
    flat = t.reshape(-1)
    out = np.empty(flat.size)
    # blocks keep the cos table small for long kernels
    for i in range(0, flat.size, 4096):
        blk = flat[i:i + 4096]
        out[i:i + 4096] = np.cos(Omega * np.outer(blk, u)) @ wts
    return (Omega**2 / np.pi) * out.reshape(t.shape)


def filter_kernel(w: FilterWindow, Omega: float, T: float, support) -> np.ndarray:
    """Kernel table ``F_Omega(i T)`` for the integer offsets in ``support``."""
    return ramp_kernel(w, Omega, np.asarray(support, dtype=float) * T)
