"""Estimating the factor model from historical curves.

Each curve is first smoothed by a least-squares regression spline; functional
PCA on the resulting coefficient vectors (in the L2 metric of the spline
space) then gives the mean, loadings and variances.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .errors import DegenerateModelError, InvalidInputError, UnderdeterminedFitError
from .linalg import sym_eig
from .splines import SplineFunction, SplineSpace, basis_matrix, gram_matrix

log = logging.getLogger(__name__)

_ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class CurveSample:
    """One discretely observed curve."""

    times: np.ndarray
    values: np.ndarray
    day_id: Hashable = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise InvalidInputError("times and values must be 1-d and of equal length")
        if np.any(np.diff(t) <= 0):
            raise InvalidInputError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def window(self, start: float = -np.inf, end: float = np.inf) -> "CurveSample":
        keep = (self.times >= start) & (self.times <= end)
        return CurveSample(self.times[keep], self.values[keep], self.day_id)


@dataclass(frozen=True)
class CurveModel:
    """Mean plus factor and noise loadings: ``Y = b' (mu + A h + B eps)``.

    ``h`` has covariance ``diag(L_diag)`` and ``eps`` covariance
    ``diag(Sigma_diag)``; both diagonals are descending and positive.
    ``sigma2`` is the iid coefficient noise variance used by the ridge
    predictor.
    """

    space: SplineSpace
    mu: np.ndarray
    A: np.ndarray
    L_diag: np.ndarray
    B: np.ndarray = None
    Sigma_diag: np.ndarray = None
    sigma2: float = 0.0
    check_orthonormal: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        n = self.space.dim
        mu = np.asarray(self.mu, dtype=float).ravel()
        a = np.asarray(self.A, dtype=float).reshape(n, -1)
        b = np.zeros((n, 0)) if self.B is None else np.asarray(self.B, dtype=float).reshape(n, -1)
        ld = np.asarray(self.L_diag, dtype=float).ravel()
        sd = np.zeros(0) if self.Sigma_diag is None else np.asarray(self.Sigma_diag, dtype=float).ravel()
        if mu.size != n:
            raise InvalidInputError(f"mu has {mu.size} entries, space dimension is {n}")
        if ld.size != a.shape[1] or sd.size != b.shape[1]:
            raise InvalidInputError("variance vectors must match loading column counts")
        if a.shape[1] + b.shape[1] > n:
            raise InvalidInputError("p + q exceeds the space dimension")
        for name, d in (("L_diag", ld), ("Sigma_diag", sd)):
            if np.any(d <= 0) or np.any(np.diff(d) > 0):
                raise InvalidInputError(f"{name} must be positive and descending")
        if self.sigma2 < 0:
            raise InvalidInputError("sigma2 must be nonnegative")
        for name, arr in (("mu", mu), ("A", a), ("B", b), ("L_diag", ld), ("Sigma_diag", sd)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.check_orthonormal:
            resid = self.orthonormality_residual()
            if resid > _ORTHO_TOL:
                raise InvalidInputError(f"[A|B] not W-orthonormal (residual {resid:.2e})")

    @property
    def p(self) -> int:
        return self.A.shape[1]

    @property
    def q(self) -> int:
        return self.B.shape[1]

    @property
    def loadings(self) -> np.ndarray:
        return np.hstack([self.A, self.B])

    def orthonormality_residual(self) -> float:
        c = self.loadings
        if c.shape[1] == 0:
            return 0.0
        w = gram_matrix(self.space)
        return float(np.abs(c.T @ w @ c - np.eye(c.shape[1])).max())

    def mean_function(self) -> SplineFunction:
        return SplineFunction(self.space, self.mu)

    def covariance(self, noisy: bool = True) -> np.ndarray:
        """Coefficient covariance ``A L A'`` (+ ``B Sigma B'`` when ``noisy``)."""
        g = (self.A * self.L_diag) @ self.A.T
        if noisy:
            g = g + (self.B * self.Sigma_diag) @ self.B.T
        return g


def fit_regression_spline(sample: CurveSample, space: SplineSpace) -> SplineFunction:
    """Least-squares spline fit of ``sample`` in ``space``."""
    design = basis_matrix(space, sample.times)
    if design.shape[0] < space.dim or np.linalg.matrix_rank(design) < space.dim:
        raise UnderdeterminedFitError(
            f"design matrix of {design.shape[0]} points has rank below {space.dim}; coarsen the knots"
        )
    coef, *_ = np.linalg.lstsq(design, sample.values, rcond=None)
    return SplineFunction(space, coef)


def fit_coefficients(samples: Sequence[CurveSample], space: SplineSpace) -> np.ndarray:
    """Stacked regression-spline coefficients, shape ``(m, N)``.

    Samples sharing one time grid are fitted with a single factorization.
    """
    if not samples:
        raise InvalidInputError("no samples to fit")
    t0 = samples[0].times
    if all(s.times.shape == t0.shape and np.array_equal(s.times, t0) for s in samples):
        design = basis_matrix(space, t0)
        if design.shape[0] < space.dim or np.linalg.matrix_rank(design) < space.dim:
            raise UnderdeterminedFitError(
                f"design matrix of {design.shape[0]} points has rank below {space.dim}"
            )
        values = np.column_stack([s.values for s in samples])
        coef, *_ = np.linalg.lstsq(design, values, rcond=None)
        return coef.T
    return np.vstack([fit_regression_spline(s, space).coefficients for s in samples])


def whitened_eigen(coeff_matrix, space: SplineSpace):
    """Eigen-decomposition of the coefficient covariance in the W metric.

    Returns ``(mean, eigenvalues, loadings)`` where ``loadings`` are
    W-orthonormal coefficient vectors ordered by descending eigenvalue.
    """
    x = np.asarray(coeff_matrix, dtype=float)
    if x.ndim != 2 or x.shape[1] != space.dim:
        raise InvalidInputError(f"coefficient matrix must be (m, {space.dim}), got {x.shape}")
    if x.shape[0] < 2:
        raise InvalidInputError("need at least two curves")
    mu = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, ddof=1).reshape(space.dim, space.dim)
    w = gram_matrix(space)
    wvals, wvecs = sym_eig(w)
    w_half = (wvecs * np.sqrt(wvals)) @ wvecs.T
    w_half_inv = (wvecs / np.sqrt(wvals)) @ wvecs.T
    m = w_half @ cov @ w_half
    vals, vecs = sym_eig(0.5 * (m + m.T))
    return mu, vals, w_half_inv @ vecs


def functional_pca(coeff_matrix, space: SplineSpace, p: int, q: int = 0) -> CurveModel:
    """Fit a :class:`CurveModel` by PCA of spline coefficients in the W metric.

    The leading ``p`` components form the factor loadings ``A``, the next
    ``q`` the noise loadings ``B``. ``sigma2`` is the iid coefficient
    variance left over: the trace of the sample covariance minus the fitted
    part, spread over the ``N - p - q`` unexplained directions.
    """
    x = np.asarray(coeff_matrix, dtype=float)
    if p < 1 or q < 0:
        raise InvalidInputError("need p >= 1 and q >= 0")
    if p + q > min(x.shape[0] - 1, space.dim):
        raise InvalidInputError(
            f"p + q = {p + q} exceeds min(m - 1, N) = {min(x.shape[0] - 1, space.dim)}"
        )
    mu, vals, vecs = whitened_eigen(x, space)
    top = vals[0]
    retained = vals[: p + q]
    # variation below roundoff of the coefficients themselves counts as none
    floor = (1e-12 * np.abs(x).max(initial=0.0)) ** 2
    if top <= floor or np.any(retained <= 1e-12 * top):
        raise DegenerateModelError(
            f"retained eigenvalues {retained.tolist()} are not all positive"
        )
    a, b = vecs[:, :p], vecs[:, p : p + q]
    fitted = (a * vals[:p]) @ a.T + (b * vals[p : p + q]) @ b.T
    free = space.dim - p - q
    cov = np.cov(x, rowvar=False, ddof=1).reshape(space.dim, space.dim)
    sigma2 = max(float(np.trace(cov - fitted)) / free, 0.0) if free > 0 else 0.0
    return CurveModel(
        space=space,
        mu=mu,
        A=a,
        L_diag=vals[:p],
        B=b,
        Sigma_diag=vals[p : p + q],
        sigma2=sigma2,
    )


def select_dimensions(eigenvalues, threshold: float = 0.9) -> tuple[int, int]:
    """Pick ``(p, q)`` from cumulative explained variance.

    ``p`` is the smallest count whose share reaches ``threshold``; ``q`` is the
    smallest further count reaching ``(1 + threshold) / 2``.
    """
    if not 0 < threshold < 1:
        raise InvalidInputError("threshold must lie in (0, 1)")
    vals = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    total = vals.sum()
    if total <= 0:
        raise InvalidInputError("need at least one positive eigenvalue")
    share = np.cumsum(vals) / total
    slack = 1e-12
    p = int(np.searchsorted(share, threshold - slack) + 1)
    pq = int(np.searchsorted(share, 0.5 * (1 + threshold) - slack) + 1)
    p = min(p, vals.size)
    pq = min(max(pq, p), vals.size)
    log.debug("selected p=%d, q=%d from %d eigenvalues", p, pq - p, vals.size)
    return p, pq - p


def estimate_model(
    samples: Sequence[CurveSample],
    space: SplineSpace,
    p: int | None = None,
    q: int | None = None,
    threshold: float = 0.9,
) -> CurveModel:
    """Regression-spline every sample, then run functional PCA.

    Missing ``p`` or ``q`` are chosen by :func:`select_dimensions` and capped so
    that ``p + q <= min(m - 1, N)``.
    """
    coefs = fit_coefficients(samples, space)
    cap = min(coefs.shape[0] - 1, space.dim)
    if p is None or q is None:
        _, vals, _ = whitened_eigen(coefs, space)
        sp, sq = select_dimensions(vals[:cap], threshold)
        p = sp if p is None else p
        q = sq if q is None else q
    p = min(p, cap)
    q = max(0, min(q, cap - p))
    return functional_pca(coefs, space, p, q)
