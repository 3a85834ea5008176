import inspect

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from modradon import unfold as uf
from modradon.forward import modulo
from modradon.geometry import ScanGeometry
from signals import bounded_geometry, folding_projection

seeds = st.integers(0, 2**32 - 1)


def brute_dft(x):
    x = np.asarray(x)
    n = x.size
    k = np.arange(n)
    return np.array([np.sum(x * np.exp(-2j * np.pi * m * k / n)) for m in range(n)])


def folded_case(seed, K=128):
    g = bounded_geometry(K=K, Omega=100.0 * K / 128)
    p, lam = folding_projection(g, np.random.default_rng(seed))
    return g, p, lam, modulo(p, lam)


@given(arrays(float, st.integers(2, 50), elements=st.floats(-1e3, 1e3)))
def test_anti_difference_inverts_forward_difference(x):
    assert np.allclose(uf.anti_difference(uf.forward_difference(x), x[0]), x, atol=1e-9)


def test_forward_difference_needs_two_samples():
    with pytest.raises(ValueError):
        uf.forward_difference([1.0])
    assert np.array_equal(uf.forward_difference(np.full(5, 3.0)), np.zeros(4))


def test_ddp_worked_example():
    z = np.array([1.0, 2.0, 4.0])
    D = brute_dft(np.diff(z))
    assert np.allclose(D, [3, -1])
    zt = uf.ddp_transfer(D, z[0], z[-1], ScanGeometry.symmetric(1, 1), dc=3.0)
    assert np.allclose(zt, brute_dft(z[:-1]))


@given(arrays(float, st.integers(3, 64), elements=st.floats(-1e3, 1e3)))
def test_ddp_identity_against_brute_force(z):
    N = z.size - 1
    w = 2 * np.pi / N
    n = np.arange(N)
    lhs = brute_dft(np.diff(z))
    rhs = (np.exp(1j * w * n) - 1) * brute_dft(z[:-1]) - np.exp(1j * w * n) * (z[0] - z[-1])
    scale = max(np.linalg.norm(z), 1.0)
    assert np.abs(lhs - rhs).max() / scale < 1e-10


@given(arrays(float, st.integers(3, 64), elements=st.floats(-10, 10)))
def test_ddp_transfer_round_trip(z):
    N = z.size - 1
    zt = uf.ddp_transfer(np.fft.fft(np.diff(z)), z[0], z[-1], ScanGeometry.symmetric(1, 1),
                         dc=z[:-1].sum())
    assert np.allclose(zt, np.fft.fft(z[:-1]), atol=1e-9)
    assert np.isnan(uf.ddp_transfer(np.ones(N), 0, 0, None)[0])


def test_spike_train_basics():
    with pytest.raises(ValueError):
        uf.SpikeTrain([1, 1], [1.0, 2.0])
    sp = uf.SpikeTrain([0, 3, 4], [1.0, 2.0, 0.5])
    assert len(sp) == 3
    assert np.allclose(sp.dense(4), [1.5, 0, 0, 2])
    snapped = uf.SpikeTrain([1, 2], [0.21 + 0.01j, 0.04]).snapped(0.1)
    assert snapped.indices.tolist() == [1]
    assert snapped.coeffs[0] == pytest.approx(0.2)
    assert len(uf.SpikeTrain.empty()) == 0


@given(seeds)
@settings(max_examples=20)
def test_measurement_system_structure(seed):
    g, p, lam, pf = folded_case(seed, K=48)
    sys = uf.build_measurement_system(pf, g)
    assert np.array_equal(sys.rows, np.arange(g.N_Omega + 1, g.N - g.N_Omega))
    assert np.allclose(np.abs(sys.V), 1.0)
    assert np.allclose(sys.V[:, 5], sys.column(5))
    # noiseless: s is generated exactly by the wrap spikes
    spikes = np.append(np.diff(p - pf), 0.0)
    assert np.allclose(sys.V @ spikes, sys.s, atol=1e-9 * np.abs(sys.s).max())
    r = np.random.default_rng(seed).normal(size=sys.s.size) + 1j
    assert np.allclose(sys.correlate(r), sys.V.conj().T @ r)


def test_anchor_row_and_restriction():
    g, p, lam, pf = folded_case(3, K=48)
    sys = uf.build_measurement_system(pf, g, restrict=True, anchor=2.0)
    assert sys.shape == (g.n_measurements + 1, g.N - 2 * (g.N_Omega - 1) + 1)
    assert sys.s[-1] == 0
    assert np.allclose(sys.V[-1], 2.0 * np.sqrt(g.n_measurements))
    r = np.arange(sys.s.size) * (1 + 0.5j)
    assert np.allclose(sys.correlate(r), sys.V.conj().T @ r)
    with pytest.raises(ValueError):
        uf.build_measurement_system(pf, g, anchor=-1)
    with pytest.raises(ValueError):
        uf.build_measurement_system(pf[:-1], g)


def test_omp_recovers_sparse_combination():
    g = ScanGeometry.symmetric(64, 1, Omega=20.0)
    sys = uf.build_measurement_system(np.zeros(g.N + 1), g)
    true = {10: 1.0, 40: -2.0, 41: 0.5, 100: 3.0}
    sys.s = sys.V[:, list(true)] @ np.array(list(true.values()), dtype=complex)
    sp = uf.omp(sys, eps=1e-9)
    assert sp.indices.tolist() == sorted(true)
    assert np.allclose(sp.coeffs, [true[i] for i in sorted(true)])
    assert sp.converged


def test_omp_iteration_cap_reports_non_convergence():
    g = ScanGeometry.symmetric(64, 1, Omega=20.0)
    sys = uf.build_measurement_system(np.zeros(g.N + 1), g)
    sys.s = sys.V[:, [5, 60, 90]].sum(axis=1)
    sp = uf.omp(sys, eps=1e-9, max_iter=2)
    assert not sp.converged
    assert sp.iterations == 2
    with pytest.raises(ValueError):
        uf.omp(sys, eps=-1.0)


def test_omp_on_zero_data_returns_empty():
    g = ScanGeometry.symmetric(32, 1, Omega=10.0)
    sp = uf.omp(uf.build_measurement_system(np.zeros(g.N + 1), g))
    assert len(sp) == 0 and sp.converged


@given(seeds)
@settings(max_examples=30)
def test_spatial_unfolding_is_exact_without_noise(seed):
    g, p, lam, pf = folded_case(seed)
    out = uf.unfold_spatial(pf, g)
    assert np.abs(out - p).max() / np.abs(p).max() < 1e-8


@given(seeds)
@settings(max_examples=30)
def test_spectral_path_matches_spatial_path(seed):
    g, p, lam, pf = folded_case(seed)
    spec = uf.unfold_spectral(pf, g)
    ref = uf.reduced_dft(uf.unfold_spatial(pf, g))
    assert np.abs(spec - ref).max() / np.abs(ref).max() < 1e-8


@given(seeds, st.floats(1e-3, 1e3))
@settings(max_examples=20)
def test_unfolding_is_scale_equivariant(seed, a):
    # no threshold enters the recovery, so scaling the data scales the result
    g, p, lam, pf = folded_case(seed, K=64)
    assert np.allclose(uf.unfold_spatial(a * pf, g), a * p, rtol=0, atol=1e-8 * a * np.abs(p).max())


@pytest.mark.parametrize("rule", ["relative", "noise"])
def test_threshold_rules_and_restriction_stay_exact(rule):
    g, p, lam, pf = folded_case(11)
    for restrict in (False, True):
        out = uf.unfold_spatial(pf, g, restrict=restrict, eps_rule=rule, anchor=3.0)
        assert np.abs(out - p).max() / np.abs(p).max() < 1e-8


def test_unknown_threshold_rule():
    g, p, lam, pf = folded_case(0, K=48)
    with pytest.raises(ValueError):
        uf.unfold_spatial(pf, g, eps_rule="median")


def test_boundary_check_rejects_wide_exceedance():
    g, p, lam, pf = folded_case(0, K=48)
    with pytest.raises(uf.RecoveryError):
        uf.unfold_spatial(pf, g, rho=g.K * g.T)
    uf.unfold_spatial(pf, g, rho=0.5)


def test_recovery_api_takes_no_modulo_threshold():
    for fn in (uf.unfold_spatial, uf.unfold_spectral, uf.recover_differences, uf.unfold_sinogram,
               uf.build_measurement_system, uf.omp):
        names = set(inspect.signature(fn).parameters)
        assert not names & {"lam", "lambda_", "lmbda", "threshold"}


def test_noise_epsilon_tracks_noise_level():
    g, p, lam, pf = folded_case(2)
    rng = np.random.default_rng(0)
    sys = uf.build_measurement_system(pf, g)
    # without noise the threshold stays far below the correlation of a single wrap
    assert uf.noise_epsilon(sys) < 0.1 * 2 * lam * g.n_measurements
    eps = []
    for sigma in (0.02, 0.2):
        noisy = pf + rng.normal(0, sigma * lam, pf.size)
        eps.append(uf.noise_epsilon(uf.build_measurement_system(noisy, g)))
    assert 5 < eps[1] / eps[0] < 20


def test_sinogram_unfold_threads_match_serial():
    g0, _, _, _ = folded_case(0, K=64)
    g = ScanGeometry(g0.K, g0.K_prime, 6, g0.T, g0.Omega)
    rows, lams = zip(*(folding_projection(g, np.random.default_rng(s)) for s in range(6)))
    lam = min(lams)
    folded = modulo(np.array(rows), lam)
    for path in ("spatial", "spectral"):
        a = uf.unfold_sinogram(folded, g, path, workers=1)
        b = uf.unfold_sinogram(folded, g, path, workers=3)
        assert np.array_equal(a.data, b.data)
        assert a.converged.all()
    with pytest.raises(ValueError):
        uf.unfold_sinogram(folded, g, "sideways")
    with pytest.raises(ValueError):
        uf.unfold_sinogram(folded[:, 1:], g)


def test_mean_value_dc_matches_sum():
    g, p, lam, pf = folded_case(5)
    u = uf.recover_differences(pf, g)
    assert uf.mean_value_dc(pf, u.spikes) == pytest.approx(p[:-1].sum(), rel=1e-10)


def test_checkerboard_and_reduced_dft():
    x = np.arange(5.0)
    assert np.allclose(uf.reduced_dft(x), brute_dft(x[:-1]))
    assert np.allclose(uf.checkerboard(np.ones(4)), [1, -1, 1, -1])
