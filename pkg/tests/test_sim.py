import dataclasses
import json

import numpy as np
import pytest
from scipy.linalg import toeplitz

from rperp import _kernels
from rperp.design import (design_causal_transform, design_feedback_transform,
                          design_noise_shaper, relative_rms)
from rperp.quantizer import make_lattice
from rperp.sim import (SimConfig, SimulationDivergence, crosscorr_with_neff, estimate_psd,
                       estimate_rate, family_bound, generate_stationary, run_feedback_quantizer,
                       run_parallel_bank, run_transform_coder)
from rperp.spectra import ArModel, PsdGrid, ar_autocovariance, ar_to_psd

from oracles import dithered_scalar_entropy


@pytest.fixture(scope="module")
def shaper():
    return design_noise_shaper(ar_to_psd(ArModel((0.9,), 1.0), 8192), 0.5, 1.0, fir_len=128)


@pytest.fixture(scope="module")
def white_shaper():
    return design_noise_shaper(PsdGrid.constant(1.0, 4096), 0.5, 1.0, fir_len=32)


@pytest.fixture(scope="module")
def K8():
    return toeplitz(ar_autocovariance(ArModel((0.9,), 1.0), 8))


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n_samples=100)
    with pytest.raises(ValueError):
        SimConfig(inverse="magic")


# -- estimators

def test_psd_white():
    x = np.random.default_rng(1).standard_normal(1_000_000)
    S = estimate_psd(x, 256)
    assert relative_rms(S.values, np.ones(256)) < 0.05


def test_psd_ar1():
    model = ArModel((0.9,), 1.0)
    x = generate_stationary(model, 1_000_000, np.random.default_rng(2))
    assert relative_rms(estimate_psd(x, 256).values, ar_to_psd(model, 256).values) < 0.05


def test_psd_constant_is_dc_spike():
    S = estimate_psd(np.full(100_000, 2.0), 256)
    dc = np.argmin(np.abs(S.omegas))
    assert S.values[dc] > 1e3 * np.delete(S.values, [dc - 1, dc, dc + 1]).max()


def test_psd_needs_samples():
    with pytest.raises(ValueError):
        estimate_psd(np.zeros(1000), 256)


def test_rate_deterministic_indices():
    nu = np.random.default_rng(3).uniform(-0.5, 0.5, 200_000)
    r, se = estimate_rate(np.zeros(200_000, dtype=int), nu)
    assert r == 0.0 and se == 0.0


def test_rate_huge_step():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(200_000)
    step = 1e4
    nu = rng.uniform(-step / 2, step / 2, len(x))
    idx = np.floor((x + nu) / step + 0.5).astype(int)
    r, _ = estimate_rate(idx, nu)
    assert r < 1e-2


def test_rate_matches_gaussian_oracle():
    rng = np.random.default_rng(5)
    n = 1_000_000
    x = rng.standard_normal(n)
    nu = rng.uniform(-0.5, 0.5, n)
    idx = np.floor(x + nu + 0.5).astype(int)
    r, se = estimate_rate(idx, nu)
    exact = dithered_scalar_entropy(1.0, 1.0)
    assert abs(r - exact) <= 2 * se


def test_rate_widens_bins_with_warning():
    rng = np.random.default_rng(6)
    idx = rng.integers(0, 5000, 100_000)
    with pytest.warns(UserWarning, match="widening"):
        estimate_rate(idx, rng.uniform(-0.5, 0.5, 100_000))


def test_rate_needs_samples():
    with pytest.raises(ValueError):
        estimate_rate(np.zeros(1000, dtype=int), np.zeros(1000))


def test_crosscorr_neff_white_and_colored():
    rng = np.random.default_rng(7)
    x = rng.standard_normal(200_000)
    z = rng.standard_normal(200_000)
    _, n_eff = crosscorr_with_neff(x, z)
    assert n_eff == pytest.approx(200_000, rel=0.05)
    xc = generate_stationary(ArModel((0.9,), 1.0), 200_000, rng)
    zc = generate_stationary(ArModel((0.9,), 1.0), 200_000, rng)
    _, n_eff_c = crosscorr_with_neff(xc, zc)
    # Bartlett: tau = (1 + a^2) / (1 - a^2) for two AR(1) with the same pole
    assert 200_000 / n_eff_c == pytest.approx(1.81 / 0.19, rel=0.15)


def test_family_bound_single_test():
    assert family_bound(1, 1e6) == pytest.approx(3e-3, rel=1e-9)
    assert family_bound(64, 1e6) > family_bound(1, 1e6)


# -- transform coders

@pytest.mark.parametrize("kind", ["transform", "feedback"])
def test_transform_coder_awgn_contract(kind, K8):
    design = (design_causal_transform if kind == "transform" else design_feedback_transform)(K8, 0.5)
    rep = run_transform_coder(design, SimConfig(n_samples=400_000, seed=11))
    assert abs(rep.empirical_D - 0.5) <= 3 * rep.empirical_D_se
    assert rep.crosscorr_max < rep.crosscorr_bound


def test_feedback_transform_channel_outputs_uncorrelated(K8):
    rep = run_transform_coder(design_feedback_transform(K8, 0.5), SimConfig(n_samples=400_000, seed=12))
    assert rep.diagnostics["K_U_offdiag_max_corr"] < rep.diagnostics["K_U_offdiag_bound"]
    assert abs(rep.rate_loss) <= 3 * rep.rate_loss_se


def test_degenerate_transform_is_plain_test_channel():
    # K_X = I, D = 1: K_Z* = I, T = I, so Y = X + W exactly
    design = design_causal_transform(np.eye(4), 1.0, 1.0)
    rep = run_transform_coder(design, SimConfig(n_samples=400_000, seed=13))
    assert abs(rep.empirical_D - 1.0) <= 3 * rep.empirical_D_se
    assert rep.rate_perp == pytest.approx(0.5, abs=0.01)


@pytest.mark.parametrize("kind", ["transform", "feedback"])
def test_transform_wire_reconstruction(kind, K8):
    design = (design_causal_transform if kind == "transform" else design_feedback_transform)(K8, 0.5)
    rep = run_transform_coder(design, SimConfig(channel="wire", n_samples=40_000))
    assert rep.diagnostics["max_abs_reconstruction_error"] < 1e-10


def test_transform_dimension_mismatch(K8):
    with pytest.raises(ValueError):
        run_transform_coder(design_feedback_transform(K8, 0.5), SimConfig(source=np.eye(3)))


def test_transform_kernel_matches_numpy(rng):
    F = np.tril(rng.standard_normal((5, 5)), -1)
    u = rng.standard_normal((50, 5))
    d = rng.uniform(-0.25, 0.25, (50, 5))
    v, w, p = _kernels.feedback_transform_loop(0.5, u, F, d)
    for b in range(50):
        wb = np.zeros(5)
        for k in range(5):
            vk = u[b, k] - F[k, :k] @ wb[:k]
            pk = np.floor((vk + d[b, k]) / 0.5 + 0.5) * 0.5
            wb[k] = pk - d[b, k] - vk
            assert v[b, k] == pytest.approx(vk) and p[b, k] == pk
        np.testing.assert_allclose(w[b], wb)


# -- feedback quantisers

def test_noise_shaper_awgn_contract(shaper):
    rep = run_feedback_quantizer(shaper, SimConfig(n_samples=1_000_000, seed=21))
    assert rep.diagnostics["S_Z_rms"] < 0.05
    assert abs(rep.diagnostics["gaussian_channel_rate"] - shaper.point.rate) < 2e-2
    assert abs(rep.empirical_D - 0.5) <= 3 * rep.empirical_D_se
    assert rep.crosscorr_max < rep.crosscorr_bound
    assert rep.diagnostics["distortion_psd_ratio"] == pytest.approx(1.0, abs=0.03)


def test_white_loop_degenerates(white_shaper):
    # flat source: F = 0 and A = a0, so Z = W / a0
    run_cfg = SimConfig(n_samples=100_000, seed=22)
    from rperp.sim import _run_loops
    run = _run_loops(white_shaper, run_cfg, 1, None)
    np.testing.assert_allclose(run["Z"] * white_shaper.a[0], run["W"], atol=1e-10)


@pytest.mark.parametrize("inverse", ["recursive", "fir"])
def test_noise_shaper_wire_reconstruction(shaper, inverse):
    rep = run_feedback_quantizer(shaper, SimConfig(channel="wire", n_samples=50_000, inverse=inverse))
    tol = 1e-10 if inverse == "recursive" else 1e-3
    assert rep.diagnostics["max_abs_reconstruction_error"] < tol


def test_bank_wire_reconstruction(shaper):
    cfg = SimConfig(channel="wire", n_samples=20_000)
    assert run_feedback_quantizer(shaper, cfg).diagnostics["max_abs_reconstruction_error"] < 1e-10


def test_bank_of_one_equals_scalar_loop(white_shaper):
    cfg = SimConfig(channel="Z1", n_samples=100_000, seed=23)
    a = run_feedback_quantizer(white_shaper, cfg)
    b = run_parallel_bank(white_shaper, make_lattice("Z1"), cfg)
    assert a.to_dict() == b.to_dict()


def test_bank_dimension_mismatch(white_shaper):
    with pytest.raises(ValueError):
        run_parallel_bank(white_shaper, make_lattice("D4"), SimConfig(n_samples=10_000, n_parallel=2))


def test_zn_bank_is_independent_scalar_loops(rng):
    f = np.r_[0.0, 0.4, -0.2]
    ax = rng.standard_normal((500, 2))
    d = rng.uniform(-0.5, 0.5, (500, 2))
    v2, w2, p2 = _kernels.feedback_bank_loop(_kernels.ZN, 1.0, ax, f, d)
    for i in range(2):
        v1, w1, p1 = _kernels.feedback_bank_loop(_kernels.ZN, 1.0, ax[:, i:i + 1].copy(), f,
                                                 d[:, i:i + 1].copy())
        np.testing.assert_array_equal(v2[:, i], v1[:, 0])
        np.testing.assert_array_equal(p2[:, i], p1[:, 0])


def test_bank_same_realization_same_outputs(rng):
    f = np.r_[0.0, 0.5]
    x = rng.standard_normal(300)
    nu = rng.uniform(-0.5, 0.5, 300)
    v, w, p = _kernels.feedback_bank_loop(_kernels.ZN, 1.0, np.column_stack([x] * 4), f,
                                          np.column_stack([nu] * 4))
    for i in range(1, 4):
        np.testing.assert_array_equal(p[:, i], p[:, 0])


def test_quantised_noise_shaper_conserves_distortion(shaper):
    rep = run_feedback_quantizer(shaper, SimConfig(channel="Z1", n_samples=400_000, seed=24))
    assert rep.diagnostics["distortion_psd_ratio"] == pytest.approx(1.0, abs=0.03)
    assert rep.crosscorr_max < rep.crosscorr_bound
    # V = A x - f * w is close to Gaussian with variance sigma_u2 - sigma_w2; the
    # fed-back uniform errors make it only approximately so, hence 0.01 bits
    step = np.sqrt(12 * shaper.sigma_w2)
    oracle = dithered_scalar_entropy(np.sqrt(shaper.sigma_u2 - shaper.sigma_w2) / step, 1.0)
    assert rep.empirical_rate == pytest.approx(oracle, abs=0.01)


def test_divergence_detected(shaper):
    bad = dataclasses.replace(shaper, a=np.r_[1.0, -2.0, np.zeros(126)])
    with pytest.raises(SimulationDivergence):
        run_feedback_quantizer(bad, SimConfig(n_samples=20_000, seed=25))


def test_report_is_json_serialisable(white_shaper):
    rep = run_feedback_quantizer(white_shaper, SimConfig(channel="wire", n_samples=20_000))
    d = rep.to_dict()
    assert d["empirical_rate"] is None
    json.dumps(d)


def test_burn_in_floor(shaper):
    with pytest.raises(ValueError, match="burn_in"):
        run_feedback_quantizer(shaper, SimConfig(n_samples=20_000, burn_in=10))
