import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvecast.errors import InvalidMatrixError, InvalidVarianceError
from curvecast.linalg import (
    blup_gain,
    blup_gain_full_rank,
    blup_scores,
    default_rank_tol,
    penrose_residuals,
    pinv,
    psd_factor,
    sym_eig,
    sym_sqrt,
)


def low_rank(rng, n, m, r):
    return rng.standard_normal((n, r)) @ rng.standard_normal((r, m))


def test_pinv_identity():
    assert np.allclose(pinv(np.eye(4)).values, np.eye(4))


def test_pinv_diagonal_rule():
    g = pinv(np.diag([2.0, 0.0]))
    assert np.allclose(g.values, np.diag([0.5, 0.0]))
    assert g.source_rank == 1


def test_pinv_rank_deficient_penrose(rng):
    m = low_rank(rng, 8, 5, 3)
    g = pinv(m)
    assert g.source_rank == 3
    assert np.all(penrose_residuals(m, g.values) < 1e-9)


def test_pinv_rejects_nonfinite():
    with pytest.raises(InvalidMatrixError):
        pinv(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_pinv_zero_matrix():
    assert np.allclose(pinv(np.zeros((3, 2))).values, np.zeros((2, 3)))


def test_default_rank_tol():
    assert default_rank_tol((8, 5)) == 8 * np.finfo(float).eps


def test_blup_gain_orthonormal_columns(rng):
    q, _ = np.linalg.qr(rng.standard_normal((7, 3)))
    assert np.allclose(blup_gain(q, np.ones(3)), q @ q.T, atol=1e-12)


def test_blup_gain_rank_one_closed_form(rng):
    c = rng.standard_normal((6, 1))
    s = 2.5
    want = c @ c.T / (s * np.linalg.norm(c) ** 4)
    assert np.allclose(blup_gain(c, [s]), want, atol=1e-12)


def test_blup_gain_collinear_columns(rng):
    c = rng.standard_normal((6, 2))
    c = np.hstack([c, c[:, :1] * 2.0 - c[:, 1:] * 0.5])
    s = np.array([3.0, 1.0, 0.2])
    want = pinv(c @ np.diag(s) @ c.T).values
    assert np.max(np.abs(blup_gain(c, s) - want)) <= 1e-8


def test_blup_gain_rejects_nonpositive_variance(rng):
    with pytest.raises(InvalidVarianceError):
        blup_gain(rng.standard_normal((4, 2)), [1.0, 0.0])


def test_full_rank_shortcut_agrees_when_valid(rng):
    c = rng.standard_normal((8, 3))
    s = np.array([2.0, 1.0, 0.5])
    assert np.allclose(blup_gain_full_rank(c, s), blup_gain(c, s), atol=1e-10)


def test_full_rank_shortcut_fails_for_collinear(rng):
    # documents why the general route exists
    c = rng.standard_normal((6, 2))
    c = np.hstack([c, c[:, :1] + c[:, 1:]])
    s = np.array([3.0, 1.0, 0.2])
    want = pinv(c @ np.diag(s) @ c.T).values
    assert np.max(np.abs(blup_gain_full_rank(c, s) - want)) > 1e-3


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(3, 12), m=st.integers(1, 6))
def test_blup_gain_equals_direct_pinv(seed, n, m):
    rng = np.random.default_rng(seed)
    r = int(rng.integers(1, min(n, m) + 1))
    c = low_rank(rng, n, m, r)
    s = rng.uniform(0.1, 3.0, m)
    want = pinv(c @ np.diag(s) @ c.T).values
    got = blup_gain(c, s)
    assert np.max(np.abs(got - want)) <= 1e-8 * max(1.0, np.abs(want).max())


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000), n=st.integers(3, 12), m=st.integers(1, 6))
def test_blup_scores_equal_direct_product(seed, n, m):
    rng = np.random.default_rng(seed)
    r = int(rng.integers(1, min(n, m) + 1))
    c = low_rank(rng, n, m, r)
    s = rng.uniform(0.1, 3.0, m)
    want = np.diag(s) @ c.T @ pinv(c @ np.diag(s) @ c.T).values
    got = blup_scores(c, s)
    assert got.shape == (m, n)
    assert np.max(np.abs(got - want)) <= 1e-8 * max(1.0, np.abs(want).max())


def test_blup_scores_recover_exact_scores(rng):
    c = rng.standard_normal((7, 3))
    h = np.array([0.5, -1.0, 2.0])
    assert np.allclose(blup_scores(c, [1.0, 2.0, 3.0]) @ (c @ h), h, atol=1e-12)


def test_sym_eig_descending():
    vals, vecs = sym_eig(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(vals, [3, 2, 1])
    assert np.allclose(np.abs(vecs), np.eye(3)[:, [0, 2, 1]])


def test_sym_eig_rank_one(rng):
    v = rng.standard_normal(4)
    vals, _ = sym_eig(np.outer(v, v))
    assert vals[0] == pytest.approx(v @ v)
    assert np.allclose(vals[1:], 0.0, atol=1e-12)


def test_sym_eig_reconstruction(rng):
    x = rng.standard_normal((10, 10))
    m = x + x.T
    vals, vecs = sym_eig(m)
    assert np.linalg.norm(vecs @ np.diag(vals) @ vecs.T - m) < 1e-9


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(InvalidMatrixError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_sym_sqrt_roundtrip(rng):
    x = rng.standard_normal((5, 5))
    m = x @ x.T + np.eye(5)
    r = sym_sqrt(m)
    assert np.allclose(r @ r, m)
    assert np.allclose(sym_sqrt(m, inverse=True) @ r, np.eye(5))


def test_psd_factor_clips_negative_roundoff(rng):
    v = rng.standard_normal((5, 2))
    m = v @ v.T
    m[0, 0] -= 1e-14
    f = psd_factor(m)
    assert f.shape == (5, 2)
    assert np.allclose(f @ f.T, v @ v.T, atol=1e-10)


# The three identities below are the rank-deficient pseudoinverse facts that
# the predictor relies on; the acceptance suite runs them at scale.


def test_projection_identity(rng):
    t = low_rank(rng, 9, 6, 3)
    lhs = t.T @ t @ pinv(t.T @ t).values @ t.T
    assert np.linalg.norm(lhs - t.T) <= 1e-9 * np.linalg.norm(t)


def test_weighted_projection_identity(rng):
    t = low_rank(rng, 9, 6, 3)
    lw = np.diag(rng.uniform(0.2, 5.0, 9))
    lhs = t.T @ lw @ t @ pinv(t.T @ lw @ t).values @ t.T
    assert np.linalg.norm(lhs - t.T) <= 1e-9 * np.linalg.norm(t)


def test_squared_pinv_identity(rng):
    t = low_rank(rng, 9, 6, 3)
    lhs = pinv(t.T @ t).values
    rhs = t.T @ pinv(t @ t.T).values @ pinv(t @ t.T).values @ t
    assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(lhs)
