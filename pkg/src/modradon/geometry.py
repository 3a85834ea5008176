"""Parallel-beam sampling geometry and the sampling conditions it must satisfy.

All lengths are dimensionless detector units, normalized so that the object
is supported in the unit disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# relative slack for inequalities evaluated in floating point
_RTOL = 1e-9


def _ceil(x: float) -> int:
    """Ceiling that ignores round-off just above an integer."""
    return math.ceil(x - _RTOL * max(1.0, abs(x)))


@dataclass(frozen=True)
class ScanGeometry:
    """Radial and angular sampling grid of a parallel-beam scan.

    Parameters
    ----------
    K : int
        Number of radial samples left of the origin.
    K_prime : int
        Number of radial samples right of the origin.
    M : int
        Number of angles over ``[0, pi)``.
    T : float
        Radial step.
    Omega : float
        Bandwidth of the pre-filtered projections.
    """

    K: int
    K_prime: int
    M: int
    T: float
    Omega: float

    def __post_init__(self):
        if self.K < 1 or self.K_prime < 1 or self.M < 1:
            raise ValueError("K, K_prime and M must be positive")
        if not self.T > 0 or not self.Omega > 0:
            raise ValueError("T and Omega must be positive")

    @classmethod
    def symmetric(cls, K: int, M: int, T: float | None = None,
                  Omega: float | None = None) -> "ScanGeometry":
        """Geometry with ``K' = K``; defaults to ``T = 1/K`` and ``Omega = M``."""
        return cls(K=K, K_prime=K, M=M, T=1.0 / K if T is None else T,
                   Omega=float(M) if Omega is None else Omega)

    @property
    def N(self) -> int:
        return self.K + self.K_prime

    @property
    def omega0(self) -> float:
        return 2 * math.pi / ((self.N + 1) * self.T)

    @property
    def N_Omega(self) -> int:
        """Number of DFT bins inside ``[-Omega, Omega]``."""
        return math.ceil(self.Omega / self.omega0)

    @property
    def omega_u(self) -> float:
        """Angular step ``2*pi/N`` of the N-point DFT of forward differences."""
        return 2 * math.pi / self.N

    @property
    def n_measurements(self) -> int:
        """Number of out-of-band DFT bins, ``N - 2*N_Omega - 1``."""
        return self.N - 2 * self.N_Omega - 1

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.M) * (math.pi / self.M)

    @property
    def radial_positions(self) -> np.ndarray:
        return (np.arange(self.N + 1) - self.K) * self.T

    def in_band(self) -> np.ndarray:
        """Sorted DFT indices ``{0..N_Omega} u {N-N_Omega..N-1}``."""
        N, NO = self.N, self.N_Omega
        return np.concatenate([np.arange(0, NO + 1), np.arange(N - NO, N)])

    def out_of_band(self) -> np.ndarray:
        return np.arange(self.N_Omega + 1, self.N - self.N_Omega)


@dataclass(frozen=True)
class FoldSpec:
    """Modulo threshold and lambda-exceedance radius."""

    lam: float
    rho: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("modulo threshold must be positive")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")


@dataclass(frozen=True)
class Violation:
    """A sampling condition that does not hold."""

    condition: str
    actual: float
    required: float
    note: str = field(default="", compare=False)

    def __str__(self):
        return f"{self.condition}: actual {self.actual:g}, required {self.required:g}"


def validate_geometry(g: ScanGeometry) -> list[Violation]:
    """Check the optimal sampling conditions and the recovery invariants.

    Returns an empty list when ``T <= pi/Omega``, ``K' = K >= 1/T`` and
    ``M >= Omega`` hold together with the structural requirements of the
    unfolding algorithms (strict Nyquist, ``K' >= K >= N_Omega + 1`` and a
    nonempty out-of-band measurement set). Otherwise one :class:`Violation`
    per failed condition, so that deliberately undersampled experiments can
    still proceed.
    """
    out = []
    nyq = math.pi / g.Omega
    if g.T >= nyq * (1 + _RTOL):
        out.append(Violation("T <= pi/Omega", g.T, nyq))
    elif g.T >= nyq * (1 - _RTOL):
        out.append(Violation("T < pi/Omega (strict)", g.T, nyq))
    if g.K_prime != g.K:
        out.append(Violation("K' = K", g.K_prime, g.K))
    if g.K < (1 / g.T) * (1 - _RTOL):
        out.append(Violation("K >= 1/T", g.K, 1 / g.T))
    if g.M < g.Omega * (1 - _RTOL):
        out.append(Violation("M >= Omega", g.M, g.Omega))
    if g.K_prime < g.K:
        out.append(Violation("K' >= K", g.K_prime, g.K))
    if g.K < g.N_Omega + 1:
        out.append(Violation("K >= N_Omega + 1", g.K, g.N_Omega + 1))
    if g.n_measurements < 1:
        out.append(Violation("N - 2 N_Omega - 1 >= 1", g.n_measurements, 1))
    return out


def oversampling_factor(g: ScanGeometry) -> float:
    """Nyquist step ``pi/Omega`` divided by the radial step ``T``."""
    return math.pi / (g.Omega * g.T)


def min_asymmetric_samples(rho: float, T: float, Omega: float, K: int) -> int:
    """Smallest ``K'`` for which exact recovery from folded samples is guaranteed.

    Evaluates ``K' >= (pi*rho/T + (K+1)*Omega*T) / (pi - Omega*T)`` and never
    returns less than ``K``.

    Raises
    ------
    ValueError
        If ``T >= pi/Omega`` or ``K < rho/T``.
    """
    if Omega * T >= math.pi:
        raise ValueError(f"T={T:g} violates T < pi/Omega={math.pi / Omega:g}")
    if K < rho / T * (1 - _RTOL):
        raise ValueError(f"K={K} violates K >= rho/T={rho / T:g}")
    bound = (math.pi * rho / T + (K + 1) * Omega * T) / (math.pi - Omega * T)
    return max(_ceil(bound), K)
