"""Recovery of unfolded projections from modulo samples in the DFT domain.

The forward differences of a folded band-limited projection differ from the
true differences by a sparse train of spikes. Outside the signal band the
DFT of the folded differences consists of the spike spectrum alone, which
orthogonal matching pursuit fits on a Vandermonde dictionary. None of the
routines here needs the modulo threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .geometry import ScanGeometry


class RecoveryError(RuntimeError):
    """Raised when a projection cannot be unfolded under the stated assumptions."""


def forward_difference(x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] < 2:
        raise ValueError("need at least two samples")
    return np.diff(x, axis=-1)


def anti_difference(d, x0=0.0) -> np.ndarray:
    """Cumulative sum starting at ``x0``: the inverse of :func:`forward_difference`."""
    d = np.asarray(d)
    out = np.empty(d.shape[:-1] + (d.shape[-1] + 1,), dtype=np.result_type(d, x0))
    out[..., 0] = x0
    np.cumsum(d, axis=-1, out=out[..., 1:])
    out[..., 1:] += np.asarray(x0)[..., None] if np.ndim(x0) else x0
    return out


@dataclass
class SpikeTrain:
    """Sparse spike train ``sum_l c_l delta[k - l]`` on the difference grid.

    ``converged`` is False when OMP hit its iteration cap before the
    residual correlation dropped to the threshold.
    """

    indices: np.ndarray
    coeffs: np.ndarray
    converged: bool = True
    iterations: int = 0
    residual: float = 0.0

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.intp)
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if len(set(self.indices.tolist())) != self.indices.size:
            raise ValueError("spike indices must be distinct")

    def __len__(self):
        return self.indices.size

    @classmethod
    def empty(cls) -> "SpikeTrain":
        return cls(np.zeros(0, np.intp), np.zeros(0, complex))

    def dense(self, length: int) -> np.ndarray:
        """Spike vector of the given length; index ``length`` wraps onto 0."""
        out = np.zeros(length, dtype=complex)
        np.add.at(out, self.indices % length, self.coeffs)
        return out

    def snapped(self, lam: float) -> "SpikeTrain":
        """Real parts rounded to the lattice ``2 lam Z``; zero spikes dropped."""
        c = 2 * lam * np.round(self.coeffs.real / (2 * lam))
        keep = c != 0
        return SpikeTrain(self.indices[keep], c[keep], self.converged,
                          self.iterations, self.residual)


@dataclass
class MeasurementSystem:
    """Out-of-band spike spectrum ``s`` and the dictionary ``V`` that generates it.

    ``rows`` holds the DFT bins ``N_Omega+1 .. N-N_Omega-1``; ``columns`` the
    admissible spike positions; ``diff_spectrum`` the full DFT of the folded
    forward differences. With an anchor row, ``s`` and ``V`` carry one extra
    trailing equation ``w * sum(c) = 0``.
    """

    s: np.ndarray
    rows: np.ndarray
    columns: np.ndarray
    diff_spectrum: np.ndarray
    geometry: ScanGeometry = field(repr=False)
    anchor_weight: float = 0.0

    def column(self, j: int) -> np.ndarray:
        """Atom ``j`` of the dictionary, generated on demand."""
        col = np.exp(-2j * np.pi / self.geometry.N * self.rows * self.columns[j])
        if self.anchor_weight:
            col = np.append(col, self.anchor_weight)
        return col

    @property
    def V(self) -> np.ndarray:
        """Dense dictionary, one row per measurement."""
        V = vandermonde(self.rows, self.columns, self.geometry.N)
        if self.anchor_weight:
            V = np.vstack([V, np.full((1, self.columns.size), self.anchor_weight)])
        return V

    @property
    def shape(self) -> tuple[int, int]:
        return self.s.size, self.columns.size

    def correlate(self, r: np.ndarray) -> np.ndarray:
        """``V^* r`` through one inverse FFT instead of a dense product."""
        N = self.geometry.N
        full = np.zeros(N, dtype=complex)
        full[self.rows] = r[:self.rows.size]
        out = N * np.fft.ifft(full)[self.columns % N]
        if self.anchor_weight:
            out += self.anchor_weight * r[-1]
        return out


def vandermonde(rows, columns, N: int) -> np.ndarray:
    return np.exp(-2j * np.pi / N * np.outer(rows, columns))


def build_measurement_system(p_fold, g: ScanGeometry, restrict: bool = False,
                             anchor: float = 0.0) -> MeasurementSystem:
    """Set up the sparse fitting problem for one folded projection.

    With ``restrict`` only spike positions ``0 .. N - 2(N_Omega - 1)`` are
    admissible. A positive ``anchor`` appends the equation ``sum(c) = 0``,
    weighted by ``anchor * sqrt(J)``: when the first and last samples are
    both fold-free the spikes cancel, which pins the coefficients under noise.
    """
    p_fold = np.asarray(p_fold, dtype=float)
    if p_fold.shape != (g.N + 1,):
        raise ValueError(f"projection must have {g.N + 1} samples")
    if g.n_measurements < 1:
        raise ValueError("no out-of-band bins: N - 2 N_Omega - 1 < 1")
    spec = np.fft.fft(forward_difference(p_fold))
    rows = g.out_of_band()
    last = g.N - 2 * (g.N_Omega - 1) if restrict else g.N
    columns = np.arange(0, min(last, g.N) + 1)
    if anchor < 0:
        raise ValueError("anchor weight must be nonnegative")
    s = -spec[rows]
    if anchor:
        s = np.append(s, 0.0)
    return MeasurementSystem(s, rows, columns, spec, g, anchor * math.sqrt(rows.size))


def default_epsilon(sys: MeasurementSystem, rel: float = 1e-3) -> float:
    """Scale-free threshold ``rel * ||V^* s||_inf``."""
    return rel * float(np.max(np.abs(sys.correlate(sys.s)), initial=0.0))


def noise_epsilon(sys: MeasurementSystem, kappa: float = 2.0) -> float:
    """Threshold at ``kappa`` times the correlation level expected from noise alone.

    The noise level is the median absolute deviation of the high-passed
    folded differences; sparse spikes barely move it. For white noise the
    largest correlation with ``N + 1`` unit-modulus atoms is about
    ``N sigma sqrt(ln(N + 1))``.
    """
    N = sys.geometry.N
    full = np.zeros(N, dtype=complex)
    full[sys.rows] = sys.s[:sys.rows.size]
    y = np.fft.ifft(full).real
    sigma = 1.4826 * float(np.median(np.abs(y - np.median(y))))
    return kappa * N * sigma * math.sqrt(math.log(N + 1))


def omp(sys: MeasurementSystem, eps: float | None = None, max_iter: int | None = None) -> SpikeTrain:
    """Orthogonal matching pursuit with an incrementally updated QR factorization.

    Iterates while ``||V^*(s - V c)||_inf > eps``: select the column of
    largest correlation with the residual, extend the support and re-fit
    ``s`` by least squares on the support. The iteration count is capped at
    the number of measurements.
    """
    s = sys.s
    J, L = sys.shape
    if eps is None:
        eps = default_epsilon(sys)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if max_iter is None:
        max_iter = J
    max_iter = min(max_iter, J, L)

    # orthonormal basis stored row-wise, grown by doubling
    cap = min(max_iter, 32)
    Q = np.zeros((cap, J), dtype=complex)
    Rm = np.zeros((cap, cap), dtype=complex)
    z = np.zeros(cap, dtype=complex)
    support: list[int] = []
    allowed = np.ones(L, dtype=bool)
    r = s.astype(complex)
    corr = np.abs(sys.correlate(r))
    i = 0
    while corr.max(initial=0.0) > eps and i < max_iter:
        j = int(np.argmax(np.where(allowed, corr, -1.0)))
        if not allowed[j]:
            break
        allowed[j] = False
        v = sys.column(j)
        # two passes of classical Gram-Schmidt keep Q orthonormal
        Qi = Q[:i]
        h = Qi.conj() @ v
        w = v - h @ Qi
        h2 = Qi.conj() @ w
        w -= h2 @ Qi
        h += h2
        nrm = np.linalg.norm(w)
        if nrm <= 1e-10 * np.linalg.norm(v):
            # column already in the span of the support
            continue
        if i == cap:
            cap = min(2 * cap, max_iter)
            Q = np.concatenate([Q, np.zeros((cap - i, J), complex)])
            Rm = np.pad(Rm, ((0, cap - i), (0, cap - i)))
            z = np.pad(z, (0, cap - i))
        Q[i] = w / nrm
        Rm[:i, i] = h
        Rm[i, i] = nrm
        z[i] = Q[i].conj() @ r
        r = r - Q[i] * z[i]
        support.append(j)
        i += 1
        corr = np.abs(sys.correlate(r))
    resid = float(corr.max(initial=0.0))
    if i == 0:
        return SpikeTrain(np.zeros(0, np.intp), np.zeros(0, complex), resid <= eps, 0, resid)
    c = solve_triangular(Rm[:i, :i], z[:i])
    idx = sys.columns[np.array(support)]
    order = np.argsort(idx)
    return SpikeTrain(idx[order], c[order], resid <= eps, i, resid)


def synthesize_residual_spectrum(sp: SpikeTrain, g: ScanGeometry) -> np.ndarray:
    """``sum_l c_l exp(-2 pi i n l / N)`` for ``n = 0 .. N-1``."""
    return np.fft.fft(sp.dense(g.N))


@dataclass
class Unfolded:
    """Per-projection recovery result: recovered difference spectrum and spikes."""

    diff_spectrum: np.ndarray
    spikes: SpikeTrain


def _check_boundary(g: ScanGeometry, rho: float | None):
    if rho is not None and not g.K * g.T > rho:
        raise RecoveryError(
            f"first sample at t={-g.K * g.T:g} lies inside the exceedance radius rho={rho:g}")


def recover_differences(p_fold, g: ScanGeometry, eps: float | None = None,
                        restrict: bool | None = None, rho: float | None = None,
                        eps_rule: str = "relative", band_limit: bool = True,
                        anchor: float = 0.0, kappa: float = 2.0,
                        max_iter: int | None = None, rel_eps: float = 1e-3) -> Unfolded:
    """Steps shared by the spatial and spectral paths: fit spikes, complete the spectrum.

    ``eps_rule`` picks the threshold when ``eps`` is None: ``"relative"``
    (:func:`default_epsilon` with ``rel_eps``) or ``"noise"`` (:func:`noise_epsilon` with
    ``kappa``). With ``band_limit`` the recovered spectrum is set to zero
    outside the band. ``anchor`` is passed to :func:`build_measurement_system`
    and ``max_iter`` to :func:`omp`.
    """
    _check_boundary(g, rho)
    if restrict is None:
        restrict = rho is not None
    sys = build_measurement_system(p_fold, g, restrict, anchor)
    if eps is None:
        if eps_rule == "noise":
            eps = noise_epsilon(sys, kappa)
        elif eps_rule == "relative":
            eps = default_epsilon(sys, rel_eps)
        else:
            raise ValueError(f"unknown threshold rule {eps_rule!r}")
    sp = omp(sys, eps, max_iter)
    spec = sys.diff_spectrum + synthesize_residual_spectrum(sp, g)
    if band_limit:
        spec[sys.rows] = 0.0
    return Unfolded(spec, sp)


def _real_ifft(spec: np.ndarray) -> np.ndarray:
    d = np.fft.ifft(spec)
    nrm = np.linalg.norm(d)
    if nrm and np.linalg.norm(d.imag) > 1e-8 * nrm:
        raise RecoveryError("recovered differences are not real")
    return d.real


def unfold_spatial(p_fold, g: ScanGeometry, eps: float | None = None, **kw) -> np.ndarray:
    """Recover the ``N + 1`` unfolded samples of one projection.

    The first sample is assumed fold-free and anchors the anti-difference.
    Keyword arguments are passed on to :func:`recover_differences`.
    """
    p_fold = np.asarray(p_fold, dtype=float)
    u = recover_differences(p_fold, g, eps, **kw)
    return anti_difference(_real_ifft(u.diff_spectrum), p_fold[0])


def ddp_transfer(diff_spectrum, first: float, last: float, g: ScanGeometry,
                 dc: float | None = None) -> np.ndarray:
    """Reduced DFT of a signal from the DFT of its forward differences.

    Inverts ``D[n] = (e^{i w n} - 1) z~[n] - e^{i w n}(z[0] - z[N])`` for
    ``n >= 1``. The ``n = 0`` bin is not determined by the differences and
    must be supplied as ``dc`` (mean-value sum); it is NaN otherwise.
    """
    D = np.asarray(diff_spectrum, dtype=complex)
    N = D.size
    e = np.exp(2j * np.pi * np.arange(1, N) / N)
    out = np.empty(N, dtype=complex)
    out[1:] = (D[1:] + e * (first - last)) / (e - 1)
    out[0] = np.nan if dc is None else dc
    return out


def mean_value_dc(p_fold, sp: SpikeTrain) -> float:
    """``sum_{k<N} (sum_{l<k} c_l + p_fold[k])``, the zero bin of the reduced DFT."""
    p_fold = np.asarray(p_fold, dtype=float)
    N = p_fold.size - 1
    # spike l contributes to every k > l, i.e. N - 1 - l samples below N
    counts = np.clip(N - 1 - sp.indices, 0, None)
    return float(np.sum(p_fold[:N]) + np.sum(sp.coeffs.real * counts))


def unfold_spectral(p_fold, g: ScanGeometry, eps: float | None = None, **kw) -> np.ndarray:
    """Reduced DFT of the unfolded projection, computed without leaving the DFT domain.

    First and last samples are taken as fold-free.
    """
    p_fold = np.asarray(p_fold, dtype=float)
    u = recover_differences(p_fold, g, eps, **kw)
    dc = mean_value_dc(p_fold, u.spikes)
    return ddp_transfer(u.diff_spectrum, p_fold[0], p_fold[-1], g, dc)


def reduced_dft(x) -> np.ndarray:
    """N-point DFT of the first N of N + 1 samples."""
    x = np.asarray(x)
    return np.fft.fft(x[..., :-1], axis=-1)


def checkerboard(p_tilde) -> np.ndarray:
    """``(-1)^n p~[n]``: the DFT centered on the origin sample when ``K' = K``."""
    p_tilde = np.asarray(p_tilde)
    sign = np.where(np.arange(p_tilde.shape[-1]) % 2, -1.0, 1.0)
    return p_tilde * sign


@dataclass
class SinogramUnfold:
    """Row-wise recovery result.

    ``data`` is ``M x (N+1)`` unfolded samples for the spatial path or
    ``M x N`` reduced DFTs for the spectral path.
    """

    data: np.ndarray
    spikes: list[SpikeTrain]

    @property
    def converged(self) -> np.ndarray:
        return np.array([sp.converged for sp in self.spikes])


def _map_rows(fn, rows, workers: int):
    if workers <= 1:
        return [fn(r) for r in rows]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, rows))


def unfold_sinogram(folded, g: ScanGeometry, path: str = "spatial", workers: int = 1,
                    eps: float | None = None, **kw) -> SinogramUnfold:
    """Unfold every row of an ``M x (N+1)`` array of folded projections.

    ``path`` is ``"spatial"`` (unfolded samples) or ``"spectral"`` (reduced
    DFTs). Rows are independent, so ``workers`` threads give identical
    results to a serial run.
    """
    folded = np.asarray(getattr(folded, "data", folded), dtype=float)
    if folded.shape != (g.M, g.N + 1):
        raise ValueError("folded data does not match geometry")
    if path not in ("spatial", "spectral"):
        raise ValueError(f"unknown path {path!r}")

    def one(row):
        u = recover_differences(row, g, eps, **kw)
        if path == "spatial":
            out = anti_difference(_real_ifft(u.diff_spectrum), row[0])
        else:
            out = ddp_transfer(u.diff_spectrum, row[0], row[-1], g, mean_value_dc(row, u.spikes))
        return out, u.spikes

    res = _map_rows(one, folded, workers)
    return SinogramUnfold(np.array([r[0] for r in res]), [r[1] for r in res])
