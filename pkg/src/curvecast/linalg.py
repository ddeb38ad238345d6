"""Dense symmetric eigendecomposition and SVD pseudoinverses.

The covariance matrices handled by the predictor are rank deficient by
construction, so every inverse in the package goes through :func:`pinv`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidMatrixError, InvalidVarianceError

_SYM_RTOL = 1e-12


@dataclass(frozen=True)
class Pseudoinverse:
    """Moore-Penrose pseudoinverse together with the numerical rank of its source."""

    values: np.ndarray
    source_rank: int


def _check_finite(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise InvalidMatrixError(f"{name} must be 2-d, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrixError(f"{name} has non-finite entries")
    return m


def default_rank_tol(shape: tuple[int, ...]) -> float:
    return max(shape) * np.finfo(float).eps


def pinv(m, rank_tol: float | None = None) -> Pseudoinverse:
    """SVD pseudoinverse; singular values below ``rank_tol * s_max`` count as zero."""
    m = _check_finite(m)
    if m.size == 0:
        return Pseudoinverse(np.zeros(m.shape[::-1]), 0)
    if rank_tol is None:
        rank_tol = default_rank_tol(m.shape)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    keep = s > rank_tol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    r = int(np.count_nonzero(keep))
    values = (vt[:r].T / s[:r]) @ u[:, :r].T
    return Pseudoinverse(values, r)


def penrose_residuals(m, g) -> np.ndarray:
    """Residual norms of the four Penrose conditions for candidate inverse ``g``."""
    m = np.asarray(m, dtype=float)
    g = np.asarray(g, dtype=float)
    mg = m @ g
    gm = g @ m
    return np.array(
        [
            np.linalg.norm(mg @ m - m),
            np.linalg.norm(gm @ g - g),
            np.linalg.norm(mg - mg.T),
            np.linalg.norm(gm - gm.T),
        ]
    )


def sym_eig(m, rtol: float = _SYM_RTOL):
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix."""
    m = _check_finite(m)
    if m.shape[0] != m.shape[1]:
        raise InvalidMatrixError(f"matrix must be square, got {m.shape}")
    scale = max(np.abs(m).max(), np.finfo(float).tiny)
    if np.abs(m - m.T).max() > rtol * scale:
        raise InvalidMatrixError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    return vals[::-1], vecs[:, ::-1]


def sym_sqrt(m, inverse: bool = False) -> np.ndarray:
    """Symmetric square root (or inverse square root) of a positive definite matrix."""
    vals, vecs = sym_eig(m)
    if vals[-1] <= 0:
        raise InvalidMatrixError("matrix is not positive definite")
    power = -0.5 if inverse else 0.5
    return (vecs * vals**power) @ vecs.T


def psd_factor(m, rtol: float = 1e-10) -> np.ndarray:
    """Factor ``F`` with ``F F' = m`` after clipping negative eigenvalues.

    Eigenvalues below ``rtol * lambda_max`` are dropped, so the returned factor
    has as many columns as the numerical rank.
    """
    m = _check_finite(m)
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    top = vals.max(initial=0.0)
    keep = vals > rtol * top if top > 0 else np.zeros_like(vals, dtype=bool)
    return vecs[:, keep] * np.sqrt(vals[keep])


def blup_gain(c, s_diag, rank_tol: float | None = None) -> np.ndarray:
    """``(C S C')^+`` through a ``(p+q) x (p+q)`` pseudoinverse.

    With ``T = S^{1/2} C'`` the identity ``(T'T)^+ = T' ((T T')^+)^2 T`` turns
    the ``N1 x N1`` pseudoinverse into one of size ``p + q``. The right-hand
    side is evaluated from the thin SVD ``T = U D V'`` as ``V D^-2 V'``, which
    is the same spectral identity without squaring the condition number.
    ``rank_tol`` applies to eigenvalues of ``C S C'`` relative to the largest,
    as in :func:`pinv`.
    """
    c = _check_finite(c, "C")
    s_diag = np.asarray(s_diag, dtype=float).ravel()
    if s_diag.size != c.shape[1]:
        raise InvalidMatrixError(f"S has {s_diag.size} entries for {c.shape[1]} columns of C")
    if np.any(~np.isfinite(s_diag)) or np.any(s_diag <= 0):
        raise InvalidVarianceError("variances in S must be strictly positive")
    if c.shape[1] == 0:
        return np.zeros((c.shape[0], c.shape[0]))
    if rank_tol is None:
        rank_tol = default_rank_tol(c.shape)
    t = np.sqrt(s_diag)[:, None] * c.T
    _, d, vt = np.linalg.svd(t, full_matrices=False)
    if d.size == 0 or d[0] == 0:
        return np.zeros((c.shape[0], c.shape[0]))
    keep = d**2 > rank_tol * d[0] ** 2
    v = vt[keep].T / d[keep]
    return v @ v.T


def blup_scores(c, s_diag, rank_tol: float | None = None) -> np.ndarray:
    """``S C' (C S C')^+``, the linear map from observed deviations to latent scores.

    From the thin SVD ``T = S^{1/2} C' = U D V'`` this is
    ``S^{1/2} U D^-1 V'``. Forming it directly costs the condition number of
    ``T`` once, where multiplying ``S C'`` by :func:`blup_gain` would pay it
    twice. Singular values are truncated exactly as in :func:`blup_gain`.
    """
    c = _check_finite(c, "C")
    s_diag = np.asarray(s_diag, dtype=float).ravel()
    if s_diag.size != c.shape[1]:
        raise InvalidMatrixError(f"S has {s_diag.size} entries for {c.shape[1]} columns of C")
    if np.any(~np.isfinite(s_diag)) or np.any(s_diag <= 0):
        raise InvalidVarianceError("variances in S must be strictly positive")
    if c.shape[1] == 0:
        return np.zeros((0, c.shape[0]))
    if rank_tol is None:
        rank_tol = default_rank_tol(c.shape)
    root = np.sqrt(s_diag)
    u, d, vt = np.linalg.svd(root[:, None] * c.T, full_matrices=False)
    if d.size == 0 or d[0] == 0:
        return np.zeros((c.shape[1], c.shape[0]))
    keep = d**2 > rank_tol * d[0] ** 2
    return (root[:, None] * u[:, keep] / d[keep]) @ vt[keep]


def blup_gain_full_rank(c, s_diag) -> np.ndarray:
    """``C (C'C)^+ S^{-1} (C'C)^+ C'``.

    Equals ``(C S C')^+`` only when ``C`` has full column rank; kept as a
    cross-check for that case. :func:`blup_gain` is exact in general.
    """
    c = _check_finite(c, "C")
    s_diag = np.asarray(s_diag, dtype=float).ravel()
    if np.any(s_diag <= 0):
        raise InvalidVarianceError("variances in S must be strictly positive")
    ctc_p = pinv(c.T @ c).values
    return c @ ctc_p @ np.diag(1.0 / s_diag) @ ctc_p @ c.T
