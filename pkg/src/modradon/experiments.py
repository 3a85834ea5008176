"""Named experiment configurations and an end-to-end runner."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import forward as fw
from .geometry import ScanGeometry
from .metrics import display_ssim
from .phantoms import Phantom, bulls_eye, render, shepp_logan
from .recon.dfr import ndft_reconstruct, nfft_reconstruct
from .recon.fbp import fbp
from .unfold import reduced_dft, unfold_sinogram

BACKENDS = ("omp-fbp", "omp-nfft", "fbp", "nfft", "ndft")


@dataclass(frozen=True)
class UnfoldOptions:
    """Threshold policy for OMP.

    ``eps`` (absolute) wins when given; otherwise ``rule`` is ``"noise"``
    (``kappa`` times the estimated noise correlation) or ``"relative"``
    (``rel_eps`` times ``||V^* s||_inf``).
    """

    eps: float | None = None
    rule: str = "noise"
    kappa: float = 2.0
    rel_eps: float = 1e-3
    anchor: float = 5.0
    restrict: bool = False
    max_iter: int | None = None

    def kwargs(self) -> dict:
        kw = dict(eps_rule=self.rule, kappa=self.kappa, anchor=self.anchor, restrict=self.restrict,
                  max_iter=self.max_iter, rel_eps=self.rel_eps)
        if self.eps is not None:
            kw["eps"] = self.eps
        return kw


@dataclass(frozen=True)
class ExperimentConfig:
    phantom: str = "shepp_logan"
    K: int = 171
    M: int = 180
    T: float | None = None
    Omega: float | None = None
    lam: float = 0.175
    noise: fw.NoiseSpec = field(default_factory=fw.NoiseSpec)
    unfold: UnfoldOptions = field(default_factory=UnfoldOptions)
    window: str = "cosine"
    R: int = 512
    Q: int = 8

    @property
    def geometry(self) -> ScanGeometry:
        return ScanGeometry.symmetric(self.K, self.M, self.T, self.Omega)


def make_phantom(name: str) -> Phantom:
    if name == "shepp_logan":
        return shepp_logan()
    if name == "shepp_logan_original":
        return shepp_logan("original")
    if name == "bulls_eye":
        return bulls_eye()
    raise ValueError(f"unknown phantom {name!r}")


PRESETS: dict[str, ExperimentConfig] = {
    "fig2ad": ExperimentConfig(K=171, lam=0.175, noise=fw.NoiseSpec(uniform=0.01 * 0.175)),
    "fig2eg": ExperimentConfig(K=85, lam=0.175, noise=fw.NoiseSpec(uniform=0.01 * 0.175)),
    "fig2hj": ExperimentConfig(K=100, lam=0.175,
                               noise=fw.NoiseSpec(uniform=0.025 * 0.175, gaussian_rel=0.025)),
    "fig2km": ExperimentConfig(K=712, lam=0.175,
                               noise=fw.NoiseSpec(uniform=0.1 * 0.175, gaussian_rel=0.08)),
    "fig2np": ExperimentConfig(K=821, lam=0.025,
                               noise=fw.NoiseSpec(uniform=0.1 * 0.025, shot_amplitude=0.2, shot_max=30)),
    "walnut": ExperimentConfig(phantom="file", K=1128, M=600, lam=0.05,
                               noise=fw.NoiseSpec(uniform=0.05 * 0.05)),
    "bullseye": ExperimentConfig(phantom="bulls_eye", K=256, M=180, lam=0.05),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(cfg, **overrides)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    snr_db: float
    ssim: dict[str, float]
    images: dict[str, np.ndarray]
    timings: dict[str, float]
    converged: float  # fraction of rows where OMP met its threshold


def simulate(cfg: ExperimentConfig, phantom: Phantom | None = None):
    """Clean filtered sinogram, noisy folded data and the realized SNR in dB.

    The SNR compares the noisy folded data with the noiseless folded data.
    """
    g = cfg.geometry
    ph = make_phantom(cfg.phantom) if phantom is None else phantom
    clean = fw.prefilter(fw.from_phantom(ph, g), Q=cfg.Q)
    pre_noise = fw.NoiseSpec(gaussian_rel=cfg.noise.gaussian_rel, seed=cfg.noise.seed)
    post_noise = replace(cfg.noise, gaussian_rel=0.0)
    noisy_pre, _ = fw.add_noise(clean, pre_noise)
    folded, _ = fw.add_noise(fw.fold(noisy_pre, cfg.lam), post_noise)
    snr = fw.snr_db(fw.fold(clean.data, cfg.lam), folded.data)
    return clean, folded, snr


def reconstruct(folded: fw.ModuloSinogram | fw.Sinogram, backend: str, cfg: ExperimentConfig,
                workers: int = 1):
    """Run one backend; returns ``(image, timings, unfold_result_or_None)``."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    g = folded.geometry
    times = {"unfold": 0.0}
    u = None
    t0 = time.perf_counter()
    if backend == "omp-fbp":
        u = unfold_sinogram(folded.data, g, "spatial", workers, **cfg.unfold.kwargs())
        data = fw.Sinogram(u.data, g, "filtered")
    elif backend == "omp-nfft":
        u = unfold_sinogram(folded.data, g, "spectral", workers, **cfg.unfold.kwargs())
        data = u.data
    elif backend == "fbp":
        data = folded if isinstance(folded, fw.Sinogram) else fw.Sinogram(folded.data, g, "filtered")
    else:
        data = reduced_dft(folded.data)
    t1 = time.perf_counter()
    if backend in ("omp-fbp", "fbp"):
        img = fbp(data, cfg.window, cfg.R, workers)
    elif backend == "ndft":
        img = ndft_reconstruct(data, g, cfg.window, cfg.R)
    else:
        img = nfft_reconstruct(data, g, cfg.window, cfg.R)
    t2 = time.perf_counter()
    if u is not None:
        times["unfold"] = t1 - t0
    times["backend"] = t2 - t1
    return img, times, u


def run_experiment(cfg: ExperimentConfig, backends=("omp-fbp", "omp-nfft"), workers: int = 1,
                   phantom: Phantom | None = None) -> ExperimentResult:
    ph = make_phantom(cfg.phantom) if phantom is None else phantom
    _, folded, snr = simulate(cfg, ph)
    ref = render(ph, cfg.R)
    scores, images, timings, conv = {}, {}, {}, []
    for b in backends:
        img, t, u = reconstruct(folded, b, cfg, workers)
        images[b] = img
        scores[b] = display_ssim(ref, img)
        for k, v in t.items():
            timings[f"{b}:{k}"] = v
        if u is not None:
            conv.append(u.converged.mean())
    return ExperimentResult(cfg, snr, scores, images, timings,
                            float(np.mean(conv)) if conv else 1.0)


@dataclass
class QuantizationResult:
    floor_direct_db: float
    floor_folded_db: float
    range_ratio: float
    max_error_direct: float
    max_error_folded: float

    @property
    def floor_gain_db(self) -> float:
        return self.floor_direct_db - self.floor_folded_db


def projection_floor_db(data: np.ndarray, g: ScanGeometry) -> float:
    """Median DFT magnitude (dB) of the rows over the out-of-band bins."""
    spec = np.fft.fft(np.asarray(data)[:, :-1], axis=1)[:, g.out_of_band()]
    return float(np.median(20 * np.log10(np.abs(spec))))


def quantization_study(bits: float = 6.4, compression: float = 10.0, K: int = 256, M: int = 30,
                       unfold: UnfoldOptions = UnfoldOptions(), phantom: Phantom | None = None
                       ) -> QuantizationResult:
    """Compare conventional and modulo acquisition at the same bit budget.

    The filtered projections are scaled to peak 1. The direct path quantizes
    them over their full range; the modulo path folds them with
    ``lam = range / (2 compression)``, quantizes over ``[-lam, lam)`` and
    unfolds without discarding the out-of-band part. The noise floors are
    the out-of-band spectra of the two recovered sinograms.
    """
    ph = bulls_eye() if phantom is None else phantom
    g = ScanGeometry.symmetric(K, M)
    s = fw.prefilter(fw.from_phantom(ph, g)).data
    s = s / s.max()
    lo, hi = float(s.min()), 1.0
    lam = (hi - lo) / (2 * compression)
    direct = fw.quantize(s, bits, lo, hi)
    folded = fw.quantize(fw.modulo(s, lam), bits, -lam, lam)
    u = unfold_sinogram(folded, g, "spatial", band_limit=False, **unfold.kwargs())
    return QuantizationResult(projection_floor_db(direct, g), projection_floor_db(u.data, g),
                              (hi - lo) / (2 * lam), float(np.abs(direct - s).max()),
                              float(np.abs(u.data - s).max()))


def timing_trend(K: int = 171, M: int = 180, sizes=(1024, 2048), repeats: int = 1):
    """Backend-only wall time of FBP and NFFT at each image size (best of ``repeats``)."""
    g = ScanGeometry.symmetric(K, M)
    s = fw.prefilter(fw.from_phantom(shepp_logan(), g))
    pt = reduced_dft(s.data)
    out = {}
    for R in sizes:
        tf = tn = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            fbp(s, "cosine", R)
            t1 = time.perf_counter()
            nfft_reconstruct(pt, g, "cosine", R)
            t2 = time.perf_counter()
            tf, tn = min(tf, t1 - t0), min(tn, t2 - t1)
        out[R] = {"fbp": tf, "nfft": tn}
    return out
