"""Command-line front end.

Every subcommand reads an optional flat ``key = value`` config file
(``--config``) and ``--set key=value`` overrides on top of a preset or the
defaults. Exit codes: 0 success, 2 configuration error, 3 unfolding did not
converge, 4 file error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import forward as fw
from . import io
from .experiments import (PRESETS, ExperimentConfig, make_phantom, quantization_study,
                          reconstruct, run_experiment)
from .geometry import ScanGeometry, validate_geometry
from .metrics import QualityReport, display_ssim, spectral_floor_db, ssim
from .phantoms import render

log = logging.getLogger("modradon")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class NotConverged(RuntimeError):
    pass


_NOISE_KEYS = {f.name for f in dataclasses.fields(fw.NoiseSpec)}
_UNFOLD_KEYS = {"eps", "eps_rule", "kappa", "rel_eps", "anchor", "restrict", "max_iter"}
_TOP_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"noise", "unfold"}
_INTS = {"K", "M", "R", "Q", "shot_max", "seed", "max_iter"}
_BOOLS = {"shot_refold", "restrict"}


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def _convert(key: str, value: str):
    if value.lower() in ("none", ""):
        return None
    if key in _BOOLS:
        if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"{key}: expected a boolean, got {value!r}")
        return value.lower() in ("true", "1", "yes")
    if key in _INTS:
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
    if key in ("phantom", "window", "eps_rule"):
        return value
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def build_config(base: ExperimentConfig, settings: dict[str, str]) -> ExperimentConfig:
    """Apply string settings to a config; unknown keys raise :class:`ConfigError`."""
    top, noise, unfold = {}, {}, {}
    for k, v in settings.items():
        key = "rule" if k == "eps_rule" else k
        if k in _NOISE_KEYS:
            noise[k] = _convert(k, v)
        elif k in _UNFOLD_KEYS:
            unfold[key] = _convert(k, v)
        elif k in _TOP_KEYS:
            top[k] = _convert(k, v)
        else:
            raise ConfigError(f"unknown config key {k!r}")
    try:
        cfg = dataclasses.replace(
            base, noise=dataclasses.replace(base.noise, **noise),
            unfold=dataclasses.replace(base.unfold, **unfold), **top)
        if cfg.unfold.rule not in ("noise", "relative"):
            raise ValueError(f"eps_rule must be 'noise' or 'relative', not {cfg.unfold.rule!r}")
        if cfg.lam <= 0:
            raise ValueError("lam must be positive")
        if cfg.R < 2:
            raise ValueError("R must be at least 2")
        cfg.geometry  # validates K, M, T, Omega
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(args) -> ExperimentConfig:
    base = ExperimentConfig()
    if getattr(args, "preset_base", None):
        if args.preset_base not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset_base!r}")
        base = PRESETS[args.preset_base]
    settings = {}
    if args.config:
        try:
            settings.update(parse_config_text(Path(args.config).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        settings[k.strip()] = v.strip()
    return build_config(base, settings)


def _write_sinogram(path: Path, data, g: ScanGeometry, lam: float = 0.0):
    if path.suffix.lower() == ".csv":
        io.write_csv(path, data)
    else:
        io.write_mrts(path, data, g, lam)


def _read_input(path: str, cfg: ExperimentConfig) -> io.SinogramFile:
    g = cfg.geometry if path.lower().endswith(".csv") else None
    return io.read_sinogram(path, g, 0.0)


def cmd_simulate(args, cfg: ExperimentConfig) -> int:
    g = cfg.geometry
    ph = make_phantom(cfg.phantom)
    s = fw.prefilter(fw.from_phantom(ph, g), Q=cfg.Q)
    for v in validate_geometry(g):
        log.warning("geometry: %s", v.note or v.condition)
    _write_sinogram(Path(args.out), s.data, g)
    print(f"wrote {args.out}: {g.M} x {g.N + 1} filtered samples")
    return EXIT_OK


def cmd_fold(args, cfg: ExperimentConfig) -> int:
    f = _read_input(args.input, cfg)
    lam = args.lam if args.lam is not None else cfg.lam
    if not lam > 0:
        raise ConfigError("lam must be positive")
    if f.folded:
        raise ConfigError("input is already folded")
    _write_sinogram(Path(args.out), fw.modulo(f.data, lam), f.geometry, lam)
    print(f"wrote {args.out}: folded with lam={lam:g}")
    return EXIT_OK


def cmd_noise(args, cfg: ExperimentConfig) -> int:
    f = _read_input(args.input, cfg)
    spec = cfg.noise
    try:
        if f.folded:
            x = fw.ModuloSinogram(f.data, f.geometry, f.lam)
        else:
            x = fw.Sinogram(f.data, f.geometry, "filtered")
        noisy, snr = fw.add_noise(x, spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _write_sinogram(Path(args.out), noisy.data, f.geometry, f.lam)
    print(f"wrote {args.out}: seed={spec.seed} realized SNR {snr:.2f} dB")
    return EXIT_OK


def _emit_image(outdir: Path, name: str, img: np.ndarray):
    io.write_pgm(outdir / f"{name}.pgm", img)
    io.write_csv(outdir / f"{name}.csv", img)
    spec = np.fft.fftshift(20 * np.log10(np.maximum(np.abs(np.fft.fft2(img)), 1e-300)))
    io.write_csv(outdir / f"{name}_spectrum_db.csv", spec)


def cmd_reconstruct(args, cfg: ExperimentConfig) -> int:
    f = _read_input(args.input, cfg)
    backend = args.backend
    g = f.geometry
    if backend in ("omp-nfft", "nfft", "ndft") and g.K_prime != g.K:
        raise ConfigError(f"backend {backend} needs K' = K")
    if backend.startswith("omp") and not f.folded:
        log.info("input carries lam = 0; unfolding anyway")
    cfg = dataclasses.replace(cfg, K=g.K, M=g.M, T=g.T, Omega=g.Omega)
    data = fw.Sinogram(f.data, g, "filtered")
    img, times, u = reconstruct(data, backend, cfg, args.threads)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _emit_image(outdir, backend, img)
    if u is not None:
        io.write_spikes_csv(outdir / f"{backend}_spikes.csv", u.spikes)
    q = QualityReport(float("nan"), float("nan"), float("nan"), spectral_floor_db(img))
    if cfg.phantom in ("shepp_logan", "shepp_logan_original", "bulls_eye") and not args.no_reference:
        ref = render(make_phantom(cfg.phantom), cfg.R)
        q = dataclasses.replace(q, ssim=display_ssim(ref, img), ssim_raw=ssim(ref, img))
    row = {"backend": backend, **q.as_row(), "t_unfold": times["unfold"], "t_backend": times["backend"]}
    io.write_table(outdir / "quality.csv", [row], append=True)
    print(f"{backend}: ssim={q.ssim:.4f} (raw {q.ssim_raw:.4f}) unfold {times['unfold']:.3f}s "
          f"backend {times['backend']:.3f}s")
    if u is not None and not u.converged.all():
        bad = np.flatnonzero(~u.converged)
        for m in bad[:10]:
            sp = u.spikes[m]
            log.error("angle %d: OMP stopped after %d iterations, residual %.3g", m, sp.iterations, sp.residual)
        if bad.size > 10:
            log.error("... and %d more angles", bad.size - 10)
        if not args.best_effort:
            raise NotConverged(f"{bad.size} of {g.M} angles did not converge")
    return EXIT_OK


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_sweep(args, cfg: ExperimentConfig) -> int:
    values = _float_list(args.values)
    backends = args.backends.split(",")
    rows = []
    for v in values:
        for seed in range(args.seeds):
            c = build_config(cfg, {args.param: repr(v), "seed": str(cfg.noise.seed + seed)})
            try:
                r = run_experiment(c, backends, args.threads)
                scores, snr = r.ssim, r.snr_db
            except Exception as exc:  # recorded per cell, not fatal
                log.error("%s=%g seed %d failed: %s", args.param, v, seed, exc)
                scores, snr = {b: float("nan") for b in backends}, float("nan")
            rows.append({args.param: v, "seed": c.noise.seed, "snr_db": snr,
                         **{f"ssim_{b}": scores[b] for b in backends}})
    io.write_table(args.out, rows)
    for v in values:
        sel = [r for r in rows if r[args.param] == v]
        means = {b: np.nanmean([r[f"ssim_{b}"] for r in sel]) for b in backends}
        print(f"{args.param}={v:g} " + " ".join(f"{b}={m:.4f}" for b, m in means.items()))
    return EXIT_OK


def cmd_bench(args, cfg: ExperimentConfig) -> int:
    sizes = [int(s) for s in _float_list(args.sizes)]
    if args.repeats < 1:
        raise ConfigError("repeats must be >= 1")
    from .experiments import simulate
    _, folded, _ = simulate(cfg)
    rows = []
    for R in sizes:
        c = dataclasses.replace(cfg, R=R)
        for b in args.backends.split(","):
            samples = {"unfold": [], "backend": [], "total": []}
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                _, t, _ = reconstruct(folded, b, c, args.threads)
                samples["total"].append(time.perf_counter() - t0)
                samples["unfold"].append(t["unfold"])
                samples["backend"].append(t["backend"])
            med = {k: statistics.median(v) for k, v in samples.items()}
            rows.append({"R": R, "backend": b, **med})
            print(f"R={R:5d} {b:9s} total {med['total']:.3f}s (unfold {med['unfold']:.3f}s, "
                  f"backend {med['backend']:.3f}s)")
    if args.out:
        io.write_table(args.out, rows)
    return EXIT_OK


def cmd_preset(args, cfg: ExperimentConfig) -> int:
    name = args.name
    outdir = Path(args.outdir) if args.outdir else None
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
    if name == "bullseye":
        q = quantization_study()
        print(f"bullseye: direct floor {q.floor_direct_db:.1f} dB, modulo floor {q.floor_folded_db:.1f} dB, "
              f"gain {q.floor_gain_db:.1f} dB at {q.range_ratio:g}x range compression")
        r = run_experiment(cfg, ("fbp", "omp-fbp"), args.threads)
    elif name == "walnut":
        if not args.input:
            raise ConfigError("the walnut preset needs --input with a parallel-beam sinogram")
        return cmd_reconstruct(argparse.Namespace(
            input=args.input, backend="omp-fbp", outdir=args.outdir or "walnut_out", threads=args.threads,
            best_effort=args.best_effort, no_reference=True),
            dataclasses.replace(cfg, phantom="file"))
    else:
        r = run_experiment(cfg, ("omp-fbp", "omp-nfft"), args.threads)
    print(f"{name}: SNR {r.snr_db:.2f} dB, converged rows {100 * r.converged:.1f}%")
    rows = []
    for b, s in r.ssim.items():
        print(f"  {b:9s} SSIM {s:.4f}  unfold {r.timings[f'{b}:unfold']:.2f}s  "
              f"backend {r.timings[f'{b}:backend']:.2f}s")
        rows.append({"preset": name, "backend": b, "ssim": s, "snr_db": r.snr_db,
                     "t_unfold": r.timings[f"{b}:unfold"], "t_backend": r.timings[f"{b}:backend"]})
        if outdir:
            _emit_image(outdir, b, r.images[b])
    if outdir:
        io.write_table(outdir / "quality.csv", rows)
    if r.converged < 1.0 and not args.best_effort:
        raise NotConverged("some angles did not converge")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    common.add_argument("--preset-base", help="start from a named preset instead of the defaults")
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("--best-effort", action="store_true", help="exit 0 even if some angles did not converge")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="modradon", description="Modulo Radon transform toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="filtered sinogram of a phantom")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fold", parents=[common], help="apply the centered modulo")
    s.add_argument("input")
    s.add_argument("--out", required=True)
    s.add_argument("--lam", type=float)
    s.set_defaults(func=cmd_fold)

    s = sub.add_parser("noise", parents=[common], help="add noise (Gaussian before, uniform/shot after folding)")
    s.add_argument("input")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_noise)

    s = sub.add_parser("reconstruct", parents=[common], help="reconstruct an image from a sinogram file")
    s.add_argument("input")
    s.add_argument("--backend", default="omp-fbp", choices=["omp-fbp", "omp-nfft", "fbp", "nfft", "ndft"])
    s.add_argument("--outdir", default="recon_out")
    s.add_argument("--no-reference", action="store_true", help="skip SSIM against the configured phantom")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("sweep", parents=[common], help="SSIM over a grid of one parameter")
    s.add_argument("--param", required=True, help="config key to sweep, e.g. lam or uniform")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--seeds", type=int, default=1)
    s.add_argument("--backends", default="omp-fbp,omp-nfft")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("bench", parents=[common], help="median stage timings over image sizes")
    s.add_argument("--sizes", default="512,1024,2048")
    s.add_argument("--repeats", type=int, default=5)
    s.add_argument("--backends", default="omp-fbp,omp-nfft")
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("preset", parents=[common], help="run a named reference experiment")
    s.add_argument("name", choices=sorted(PRESETS))
    s.add_argument("--outdir")
    s.add_argument("--input", help="sinogram file (walnut)")
    s.set_defaults(func=cmd_preset)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.command == "preset" and not args.preset_base:
        args.preset_base = args.name
    try:
        cfg = load_config(args)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
