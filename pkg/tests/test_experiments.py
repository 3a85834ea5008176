import numpy as np
import pytest

from modradon import experiments as ex


def test_presets_cover_the_reference_runs():
    assert {"fig2ad", "fig2eg", "fig2hj", "fig2km", "fig2np", "walnut", "bullseye"} <= set(ex.PRESETS)
    cfg = ex.preset("fig2np", R=128)
    assert cfg.R == 128 and cfg.lam == 0.025 and cfg.noise.shot_max == 30
    with pytest.raises(ValueError):
        ex.preset("fig3")


def test_unknown_phantom_and_backend():
    with pytest.raises(ValueError):
        ex.make_phantom("file")
    cfg = ex.ExperimentConfig(K=32, M=32, R=32)
    _, folded, _ = ex.simulate(cfg)
    with pytest.raises(ValueError):
        ex.reconstruct(folded, "art", cfg)


def test_simulation_is_reproducible():
    cfg = ex.preset("fig2hj", K=48, M=24)
    a = ex.simulate(cfg)
    b = ex.simulate(cfg)
    assert np.array_equal(a[1].data, b[1].data)
    assert a[2] == b[2]


def test_noiseless_small_run_beats_folded_fbp():
    cfg = ex.ExperimentConfig(K=64, M=64, R=64)
    r = ex.run_experiment(cfg, ("omp-fbp", "fbp"))
    assert r.converged == 1.0
    assert r.ssim["omp-fbp"] > r.ssim["fbp"] + 0.2
    assert set(r.timings) == {"omp-fbp:unfold", "omp-fbp:backend", "fbp:unfold", "fbp:backend"}


def test_unfold_options_kwargs():
    kw = ex.UnfoldOptions(eps=0.5).kwargs()
    assert kw["eps"] == 0.5
    assert "eps" not in ex.UnfoldOptions(rule="relative").kwargs()


def test_quantization_study_small():
    q = ex.quantization_study(K=128, M=8)
    assert q.range_ratio == pytest.approx(10)
    assert q.floor_gain_db > 0
    assert q.max_error_folded < q.max_error_direct


def test_timing_trend_keys():
    t = ex.timing_trend(K=32, M=16, sizes=(32, 64))
    assert set(t) == {32, 64} and set(t[32]) == {"fbp", "nfft"}
