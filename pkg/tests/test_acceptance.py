"""Acceptance criteria AC1 to AC9.

Every test records a PASS or FAIL line through ``conftest.record``; the lines
are printed in the terminal summary. Tolerances are the stated ones.
"""

import os
import time

import numpy as np
import pytest

from conftest import record
from curvecast.bands import build_grid, critical_values, cv_bands, LagrangeEnvelope
from curvecast.data import ingest_csv
from curvecast.estimation import CurveSample, fit_coefficients
from curvecast.forecasting import ForecastConfig, Forecaster
from curvecast.harness import ProtocolConfig, compare
from curvecast.linalg import pinv
from curvecast.predictor import (
    concatenate,
    predict,
    pseudo_op_check,
    ridge_gain,
    ridge_gain_direct,
    segment,
)
from curvecast.splines import SplineFunction, basis_matrix
from curvecast.synth import (
    callcenter_panel,
    discrete_blup_oracle,
    mc_conditional,
    random_spec,
    sample_curves,
    sample_latent,
)

pytestmark = pytest.mark.acceptance


def random_cut(rng, space):
    """A cut inside the domain, at least a fifth of a span away from every break."""
    br = space.breaks
    span = br[1] - br[0]
    while True:
        cut = rng.uniform(br[0] + 0.2 * span, br[-1] - 0.2 * span)
        if np.min(np.abs(br - cut)) >= 0.2 * span:
            return float(cut)


def in_model_draw(spec, seg, seed, noisy=True):
    h, eps = sample_latent(spec, 1, seed)
    x = spec.mu + spec.A @ h[0]
    y = x + spec.B @ eps[0] if noisy else x
    return seg.R1 @ y, x


def test_ac1_oracle_equivalence():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for i in range(50):
        n = int(rng.integers(8, 21))
        p = int(rng.integers(1, 5))
        q = int(rng.integers(0, 4))
        spec = random_spec(1000 + i, n, p, q)
        seg = segment(spec.model(), random_cut(rng, spec.space))
        y1, _ = in_model_draw(spec, seg, i)
        got = predict(seg, SplineFunction(seg.left_space, y1)).mean.coefficients
        want = discrete_blup_oracle(spec, seg.cut, y1)
        worst = max(worst, float(np.max(np.abs(got - want))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 10
    record("AC1 oracle equivalence", ok, f"max|diff|={worst:.2e} (<=1e-8), {elapsed:.1f}s (<10s)")
    assert ok


def test_ac2_gaussian_conditional_mean():
    start = time.perf_counter()
    worst = 0.0
    for i in range(5):
        spec = random_spec(2000 + i, 10, 3, 4)
        cut = 0.25
        seg = segment(spec.model(), cut)
        # the conditional law is non-degenerate only when p + q exceeds N1
        assert spec.A.shape[1] + spec.B.shape[1] > seg.left_space.dim
        y1, _ = in_model_draw(spec, seg, 100 + i)
        mc = mc_conditional(spec, cut, y1, n=100_000, seed=200 + i)
        exact = predict(seg, SplineFunction(seg.left_space, y1)).mean(mc.times)
        worst = max(worst, float(np.max(np.abs(mc.mean - exact) / mc.mean_se)))
    elapsed = time.perf_counter() - start
    ok = worst <= 3.0 and elapsed < 120
    record("AC2 Gaussian conditional mean", ok,
           f"max |MC - BLUP| = {worst:.2f} SE (<=3) over 5x10 points, {elapsed:.1f}s (<120s)")
    assert ok


def test_ac3_pseudoinverse_identities():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n, m = int(rng.integers(3, 15)), int(rng.integers(3, 15))
        r = int(rng.integers(1, min(n, m)))
        t = rng.standard_normal((n, r)) @ rng.standard_normal((r, m))
        lw = np.diag(rng.uniform(0.1, 10.0, n))
        tt = pinv(t.T @ t).values
        res = [
            np.linalg.norm(t.T @ t @ tt @ t.T - t.T) / np.linalg.norm(t),
            np.linalg.norm(t.T @ lw @ t @ pinv(t.T @ lw @ t).values @ t.T - t.T) / np.linalg.norm(t),
            np.linalg.norm(tt - t.T @ np.linalg.matrix_power(pinv(t @ t.T).values, 2) @ t)
            / np.linalg.norm(tt),
        ]
        worst = max(worst, *res)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5
    record("AC3 pseudoinverse identities", ok, f"max relative residual {worst:.2e} (<=1e-9), {elapsed:.2f}s")
    assert ok


def test_ac4_range_identity_on_model_draws():
    rng = np.random.default_rng(4)
    worst = 0.0
    for i in range(100):
        spec = random_spec(4000 + i, int(rng.integers(8, 16)), int(rng.integers(1, 4)),
                           int(rng.integers(0, 3)))
        seg = segment(spec.model(), random_cut(rng, spec.space))
        y1, _ = in_model_draw(spec, seg, i)
        dev = y1 - seg.mu1
        r = pseudo_op_check(seg, SplineFunction(seg.left_space, y1)) / np.linalg.norm(dev)
        worst = max(worst, r)
    ok = worst <= 1e-8
    record("AC4 G11 G11^+ (Y1 - mu1) = Y1 - mu1", ok, f"max relative residual {worst:.2e} (<=1e-8)")
    assert ok


def test_ac5_smooth_concatenation():
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(20):
        spec = random_spec(5000 + i, int(rng.integers(8, 14)), int(rng.integers(1, 4)), 0)
        seg = segment(spec.model(), random_cut(rng, spec.space))
        y1, _ = in_model_draw(spec, seg, i, noisy=False)
        x1 = SplineFunction(seg.left_space, y1)
        joined = concatenate(seg, x1, predict(seg, x1))
        assert joined.jumps.size == spec.space.order - 1
        worst = max(worst, float(joined.jumps.max()))
    ok = worst < 1e-8
    record("AC5 smooth concatenation", ok, f"max jump over orders 0..k-2 = {worst:.2e} (<1e-8)")
    assert ok


def test_ac6_unbiased_and_optimal():
    spec = random_spec(6, 10, 3, 4)
    seg = segment(spec.model(), 0.25)
    m = 20_000
    h, eps = sample_latent(spec, m, 66)
    x2 = (spec.mu + h @ spec.A.T) @ seg.R2.T
    y1 = (spec.mu + h @ spec.A.T + eps @ spec.B.T) @ seg.R1.T
    gain = seg.gain
    pred = seg.mu2 + (y1 - seg.mu1) @ gain.T
    se = pred.std(axis=0, ddof=1) / np.sqrt(m)
    bias_z = float(np.max(np.abs(pred.mean(axis=0) - seg.mu2) / se))

    loss_blup = np.sum((x2 - pred) ** 2, axis=1)
    rng = np.random.default_rng(60)
    worst = -np.inf
    scale = np.abs(gain).max()
    # perturbation sizes from 0.1% to 5% of the largest gain entry
    for size in np.geomspace(1e-3, 5e-2, 20):
        mgain = gain + size * scale * rng.standard_normal(gain.shape)
        alt = seg.mu2 + (y1 - seg.mu1) @ mgain.T
        diff = np.sum((x2 - alt) ** 2, axis=1) - loss_blup
        # how far the perturbed predictor beats the BLUP, in MC standard errors
        worst = max(worst, float(-diff.mean() / (diff.std(ddof=1) / np.sqrt(m))))
    ok = bias_z <= 4.0 and worst <= 1.0
    record("AC6 unbiasedness and optimality", ok,
           f"max |mean - mu2| = {bias_z:.2f} SE (<=4); best perturbation gain {worst:.2f} SE (<=1)")
    assert ok


def test_ac7_band_coverage():
    # the level keeps sampled values clear of the clip at zero
    spec = random_spec(3, 10, 3, 4, level=30.0)
    cut = 0.25
    model = spec.model()
    seg = segment(model, cut)
    assert spec.A.shape[1] + spec.B.shape[1] > seg.left_space.dim
    n_fresh = 2000
    h, eps = sample_latent(spec, n_fresh, 99)
    x = spec.mu + h @ spec.A.T
    y = x + eps @ spec.B.T

    # global band on the known model against the noise-free continuation
    tt = np.linspace(cut, 1.0, 301)
    b2 = basis_matrix(seg.right_space, tt)
    pred0 = predict(seg, SplineFunction(seg.left_space, seg.mu1))
    grid = build_grid(seg.right_space)
    z_global, _ = critical_values(pred0, grid, 0.05, 100_000, seed=1)
    halfwidth = z_global * LagrangeEnvelope(grid, pred0.sd(grid.points))(tt)
    centers = (seg.mu2 + (y @ seg.R1.T - seg.mu1) @ seg.gain.T) @ b2.T
    truth = (x @ seg.R2.T) @ b2.T
    global_cov = float(np.mean(np.all(np.abs(truth - centers) <= halfwidth, axis=1)))

    # cv-local band from 1000 training days, scored against the observed continuation
    times = np.linspace(0.0, 1.0, 61)
    _, train = sample_curves(spec, 1000, times, seed=5)
    samples = [d.sample for d in train.days]
    cfg = ForecastConfig(method="blup", p=3, q=4, n_spans=spec.space.breaks.size - 1)
    cvb = cv_bands(samples, spec.space, cfg, cut, K=10, delta=0.05, target="observations")
    fc = Forecaster.fit_coefficients(fit_coefficients(samples, spec.space), spec.space, cfg)
    obs = y @ basis_matrix(spec.space, times).T
    keep = times >= cut
    inside = np.zeros(int(keep.sum()))
    for i in range(n_fresh):
        s = CurveSample(times, obs[i])
        band = cvb.band(fc.forecast(s, cut), "cv_local")
        t = times[keep]
        inside += (band.lower(t) <= obs[i, keep]) & (obs[i, keep] <= band.upper(t))
    pointwise = inside / n_fresh
    local_cov = float(pointwise.min())

    ok = global_cov >= 0.94 and 0.92 <= local_cov <= 0.99
    record("AC7 band coverage", ok,
           f"global simultaneous {global_cov:.4f} (>=0.94); cv-local realized {local_cov:.4f} "
           f"(in [0.92, 0.99]; mean pointwise {pointwise.mean():.4f})")
    assert ok


# RMSE summaries reported for the external call-centre dataset, checked within 5%
REFERENCE_RMSE = {"10:00": {"median": 14.69, "mean": 16.83}, "12:00": {"mean": 16.15}}


def test_ac8_protocol_reproduction():
    panel = callcenter_panel(310, seed=1)
    start = time.perf_counter()
    reports = compare(panel, ProtocolConfig())
    elapsed = time.perf_counter() - start
    n_days = len(reports[0].days)
    (rb, sb), (re_, se_), (rl, sl) = (r.mean_se("rmse") for r in reports)
    wb, we, wl = (r.mean_se("width")[0] for r in reports)
    rmse_ok = rl <= re_ + sl and re_ <= rb + se_ and rl < rb
    width_ok = wb > we > wl
    detail = (f"{n_days} test days; RMSE baseline {rb:.2f} > 10:00 {re_:.2f} > 12:00 {rl:.2f}; "
              f"WIDTH {wb:.1f} > {we:.1f} > {wl:.1f}; {elapsed:.0f}s")

    external = os.environ.get("CURVECAST_REFERENCE_CSV")
    table_ok = True
    if external:
        real = ingest_csv(external)
        cfg = ProtocolConfig(window_days=20, select="cv", forecast=ForecastConfig(method="ridge"))
        got = {r.label.split("@")[-1]: r.summary("rmse") for r in compare(real, cfg, baseline=False)}
        for cut, stats_ in REFERENCE_RMSE.items():
            for key, want in stats_.items():
                table_ok &= abs(got[cut][key] - want) <= 0.05 * want
        detail += f"; external table check {'ok' if table_ok else 'off by more than 5%'}"
    else:
        detail += "; external table check skipped (no dataset)"
    ok = n_days >= 200 and rmse_ok and width_ok and table_ok
    record("AC8 protocol reproduction", ok, detail)
    assert ok


def test_ac9_ridge_routes():
    rng = np.random.default_rng(9)
    worst = 0.0
    for i in range(50):
        spec = random_spec(9000 + i, int(rng.integers(8, 21)), int(rng.integers(1, 5)), 0)
        seg = segment(spec.model(), random_cut(rng, spec.space))
        sigma2 = float(rng.uniform(0.01, 2.0))
        worst = max(worst, float(np.max(np.abs(ridge_gain(seg, sigma2) - ridge_gain_direct(seg, sigma2)))))
    ok = worst <= 1e-8
    record("AC9 ridge-route equivalence", ok, f"max|diff|={worst:.2e} (<=1e-8)")
    assert ok
