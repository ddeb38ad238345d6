import numpy as np
import pytest

from curvecast.errors import InvalidInputError, UnreliableEstimateError
from curvecast.predictor import predict, segment
from curvecast.splines import SplineFunction, basis_matrix, gram_matrix
from curvecast.synth import (
    SyntheticSpec,
    callcenter_panel,
    discrete_blup_oracle,
    mc_conditional,
    random_spec,
    sample_curves,
    sample_latent,
    w_orthonormal,
)


def test_w_orthonormal(rng, cubic_space):
    a = w_orthonormal(rng.standard_normal((cubic_space.dim, 3)), cubic_space)
    assert np.allclose(a.T @ gram_matrix(cubic_space) @ a, np.eye(3), atol=1e-12)


def test_degenerate_spec_gives_mean():
    spec = random_spec(0, 8, 2, 1)
    # variances must stay positive, so take the limit numerically
    flat = SyntheticSpec(spec.space, spec.mu, spec.A, np.array([1e-300, 1e-300]), spec.B, np.array([1e-300]))
    coefs, _ = sample_curves(flat, 5, seed=1)
    assert np.allclose(coefs, np.tile(spec.mu, (5, 1)), rtol=1e-14, atol=1e-140)


def test_sample_mean_within_clt_bound():
    spec = random_spec(1, 9, 2, 2)
    m = 50_000
    coefs, _ = sample_curves(spec, m, seed=2)
    cov = spec.model().covariance(noisy=True)
    se = np.sqrt(np.diag(cov) / m)
    assert np.all(np.abs(coefs.mean(axis=0) - spec.mu) <= 4 * se)


def test_sample_covariance_close():
    spec = random_spec(1, 9, 2, 2)
    coefs, _ = sample_curves(spec, 50_000, seed=3)
    want = spec.model().covariance(noisy=True)
    emp = np.cov(coefs, rowvar=False)
    assert np.linalg.norm(emp - want) <= 0.05 * np.linalg.norm(want)


def test_sampling_is_seeded():
    spec = random_spec(2, 8, 2, 1)
    a, _ = sample_curves(spec, 100, seed=7)
    b, _ = sample_curves(spec, 100, seed=7)
    c, _ = sample_curves(spec, 100, seed=8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sample_latent_rejects_empty():
    with pytest.raises(InvalidInputError):
        sample_latent(random_spec(0, 8, 1, 0), 0)


def test_panel_from_times():
    spec = random_spec(3, 8, 2, 1, level=10.0, obs_noise_sd=0.1)
    t = np.linspace(0, 1, 13)
    coefs, panel = sample_curves(spec, 4, t, seed=1)
    assert len(panel) == 4
    assert np.array_equal(panel.times, t)
    exact = coefs @ basis_matrix(spec.space, t).T
    assert 0 < np.abs(panel.values - exact).max() < 1.0


def test_negative_noise_rejected():
    spec = random_spec(0, 8, 1, 0)
    with pytest.raises(InvalidInputError):
        SyntheticSpec(spec.space, spec.mu, spec.A, spec.L_diag, spec.B, spec.Sigma_diag, -1.0)


# --- discrete oracle ---------------------------------------------------------------


def test_oracle_at_mean():
    spec = random_spec(4, 10, 2, 2)
    seg = segment(spec.model(), 0.45)
    assert np.allclose(discrete_blup_oracle(spec, 0.45, seg.mu1), seg.mu2, atol=1e-12)


def test_oracle_rank_one_scalar_form():
    spec = random_spec(5, 9, 1, 0)
    seg = segment(spec.model(), 0.5)
    a1, a2 = seg.A1[:, 0], seg.A2[:, 0]
    dev = np.random.default_rng(0).standard_normal(a1.size)
    # R21 R11^+ = a2 a1' / |a1|^2 for a rank-one covariance
    want = seg.mu2 + a2 * (a1 @ dev) / (a1 @ a1)
    assert np.allclose(discrete_blup_oracle(spec, 0.5, seg.mu1 + dev), want, atol=1e-10)


def test_oracle_matches_predict():
    for seed in range(10):
        spec = random_spec(seed, 12, 2, 2)
        seg = segment(spec.model(), 0.4)
        y1 = seg.mu1 + np.random.default_rng(seed).standard_normal(seg.mu1.size)
        got = predict(seg, SplineFunction(seg.left_space, y1)).mean.coefficients
        assert np.max(np.abs(got - discrete_blup_oracle(spec, 0.4, y1))) <= 1e-8


# --- Monte Carlo conditional law ------------------------------------------------------


def _in_model_y1(spec, cut, seed):
    h, eps = sample_latent(spec, 1, seed)
    seg = segment(spec.model(), cut)
    y = spec.mu + spec.A @ h[0] + spec.B @ eps[0]
    return seg, seg.R1 @ y


def test_mc_single_factor_recovery():
    spec = random_spec(6, 9, 1, 0)
    seg, y1 = _in_model_y1(spec, 0.5, 3)
    mc = mc_conditional(spec, 0.5, y1, n=20_000, seed=1)
    exact = predict(seg, SplineFunction(seg.left_space, y1)).mean(mc.times)
    assert np.all(np.abs(mc.mean - exact) <= 3 * mc.mean_se + 1e-9)


def test_mc_at_mean(small_spec):
    seg = segment(small_spec.model(), 0.25)
    mc = mc_conditional(small_spec, 0.25, seg.mu1, n=40_000, seed=2)
    want = SplineFunction(seg.right_space, seg.mu2)(mc.times)
    assert np.all(np.abs(mc.mean - want) <= 3 * mc.mean_se)


def test_mc_variance_matches_g_form(small_spec):
    seg = segment(small_spec.model(), 0.25)
    mc = mc_conditional(small_spec, 0.25, seg.mu1, n=100_000, seed=3)
    pred = predict(seg, SplineFunction(seg.left_space, seg.mu1))
    want = pred.variance(mc.times)
    assert np.all(np.abs(mc.variance - want) <= 3 * mc.variance_se + 1e-9)


def test_mc_error_shrinks_with_n(small_spec):
    seg, y1 = _in_model_y1(small_spec, 0.25, 5)
    exact = predict(seg, SplineFunction(seg.left_space, y1)).mean
    small = mc_conditional(small_spec, 0.25, y1, n=10_000, seed=4)
    big = mc_conditional(small_spec, 0.25, y1, n=100_000, seed=4)
    assert big.mean_se.mean() < small.mean_se.mean()
    err_small = np.abs(small.mean - exact(small.times)).mean()
    err_big = np.abs(big.mean - exact(big.times)).mean()
    assert err_big < err_small + 2 * small.mean_se.mean()


def test_mc_nadaraya_watson_runs(small_spec):
    seg = segment(small_spec.model(), 0.25)
    mc = mc_conditional(small_spec, 0.25, seg.mu1, n=20_000, seed=5, method="nw")
    want = SplineFunction(seg.right_space, seg.mu2)(mc.times)
    assert np.all(np.abs(mc.mean - want) <= 4 * mc.mean_se)


def test_mc_is_seeded(small_spec):
    seg = segment(small_spec.model(), 0.25)
    a = mc_conditional(small_spec, 0.25, seg.mu1, n=10_000, seed=6)
    b = mc_conditional(small_spec, 0.25, seg.mu1, n=10_000, seed=6)
    assert np.array_equal(a.mean, b.mean)


def test_mc_requires_large_n(small_spec):
    with pytest.raises(InvalidInputError):
        mc_conditional(small_spec, 0.25, np.zeros(5), n=500)


def test_mc_low_ess(small_spec):
    seg = segment(small_spec.model(), 0.25)
    far = seg.mu1 + 50.0
    with pytest.raises(UnreliableEstimateError):
        mc_conditional(small_spec, 0.25, far, n=10_000, bandwidth=0.05, seed=1)


def test_mc_unknown_method(small_spec):
    seg = segment(small_spec.model(), 0.25)
    with pytest.raises(InvalidInputError):
        mc_conditional(small_spec, 0.25, seg.mu1, n=10_000, method="knn")


# --- call-centre panel --------------------------------------------------------------


def test_callcenter_panel_shape():
    panel = callcenter_panel(12, seed=1)
    assert len(panel) == 12
    assert panel.interval_minutes == 5
    assert panel.labels[0] == "07:00" and panel.labels[-1] == "21:05"
    assert all(d.date.weekday() < 5 for d in panel.days)
    assert np.all(panel.values >= 0)
    assert np.all(panel.values == np.round(panel.values))


def test_callcenter_panel_seeded():
    a = callcenter_panel(5, seed=3).values
    assert np.array_equal(a, callcenter_panel(5, seed=3).values)
    assert not np.array_equal(a, callcenter_panel(5, seed=4).values)
