"""Best linear unbiased continuation of a curve observed up to a cut.

Everything is computed on coefficient vectors; functions are evaluated only
when a caller asks for values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError, InvalidInputError, InvalidVarianceError
from .estimation import CurveModel
from .linalg import blup_gain, blup_scores, pinv, psd_factor
from .splines import (
    SplineFunction,
    SplineSpace,
    basis_matrix,
    derivative_jumps,
    gram_matrix,
    restricted_space,
    restriction_matrix,
)

log = logging.getLogger(__name__)

Convention = Literal["g", "G"]


@dataclass(frozen=True, eq=False)
class SegmentedModel:
    """A :class:`CurveModel` split at ``cut`` into observed and future parts.

    Index 1 refers to ``[a, cut]`` and index 2 to ``[cut, b]``. Lower-case
    ``g_ij`` are factor cross-covariances ``A_i L A_j'``; upper-case ``G_ij``
    add the noise term ``B_i Sigma B_j'``. ``scores`` maps observed
    deviations ``y1 - mu1`` to the predicted latent scores ``(h, eps)``.
    """

    full: CurveModel
    cut: float
    left_space: SplineSpace
    right_space: SplineSpace
    R1: np.ndarray
    R2: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    g11: np.ndarray
    g12: np.ndarray
    g21: np.ndarray
    g22: np.ndarray
    G11: np.ndarray
    G12: np.ndarray
    G22: np.ndarray
    G11_pinv: np.ndarray
    scores: np.ndarray

    @property
    def gain(self) -> np.ndarray:
        """``g21 G11^+``, evaluated as ``A2`` times the factor rows of :attr:`scores`."""
        return self.A2 @ self.scores[: self.A2.shape[1]]

    def conditional_covariance(self, convention: Convention = "g") -> np.ndarray:
        """Coefficient covariance of the continuation given the observed part.

        ``"g"`` gives ``g22 - g21 G11^+ g12``, the conditional covariance of the
        noise-free continuation. ``"G"`` gives ``g22 - G21 G11^+ G12``.
        """
        if convention == "g":
            cov = self.g22 - self.g21 @ self.G11_pinv @ self.g12
        elif convention == "G":
            cov = self.g22 - self.G12.T @ self.G11_pinv @ self.G12
        else:
            raise InvalidInputError(f"unknown covariance convention {convention!r}")
        return 0.5 * (cov + cov.T)

    def observed_error_covariance(self) -> np.ndarray:
        """Covariance of ``Y2 - prediction`` for the noisy continuation ``Y2``.

        Expands ``Cov(Y2 - g21 G11^+ Y1)`` using ``G11^+ G11 G11^+ = G11^+``.
        """
        k = self.G11_pinv
        cross = self.g21 @ k @ self.G12
        cov = self.G22 - cross - cross.T + self.g21 @ k @ self.g12
        return 0.5 * (cov + cov.T)


@dataclass(frozen=True, eq=False)
class Prediction:
    """Predicted continuation on the right segment.

    ``cond_cov`` is the error covariance for the noise-free continuation and
    ``obs_cov`` the error covariance against the observed (noisy)
    continuation; they coincide when the model has no noise functions.
    """

    mean: SplineFunction
    cond_cov: np.ndarray
    method: str
    obs_cov: np.ndarray | None = None

    def __post_init__(self):
        if self.obs_cov is None:
            object.__setattr__(self, "obs_cov", self.cond_cov)

    @property
    def space(self) -> SplineSpace:
        return self.mean.space

    def variance(self, t, observed: bool = False) -> np.ndarray:
        """Pointwise error variance ``b2(t)' cov b2(t)``, never negative."""
        f = psd_factor(self.obs_cov if observed else self.cond_cov)
        return np.sum((basis_matrix(self.space, t) @ f) ** 2, axis=1)

    def sd(self, t, observed: bool = False) -> np.ndarray:
        return np.sqrt(self.variance(t, observed))


@dataclass(frozen=True, eq=False)
class Concatenation:
    """Full-segment spline joining the observed part and a prediction."""

    function: SplineFunction
    jumps: np.ndarray
    residual: float


def segment(model: CurveModel, cut: float) -> SegmentedModel:
    a, b = model.space.domain
    cut = float(cut)
    if not a < cut < b:
        raise DomainError(f"cut {cut} must lie strictly inside ({a}, {b})")
    r1 = restriction_matrix(model.space, cut, "left")
    r2 = restriction_matrix(model.space, cut, "right")
    left = restricted_space(model.space, cut, "left")
    right = restricted_space(model.space, cut, "right")
    a1, a2 = r1 @ model.A, r2 @ model.A
    b1, b2 = r1 @ model.B, r2 @ model.B
    la1, la2 = a1 * model.L_diag, a2 * model.L_diag
    sb1, sb2 = b1 * model.Sigma_diag, b2 * model.Sigma_diag
    g11 = la1 @ a1.T
    g12 = la1 @ a2.T
    g22 = la2 @ a2.T
    big11 = g11 + sb1 @ b1.T
    c = np.hstack([a1, b1])
    s = np.concatenate([model.L_diag, model.Sigma_diag])
    return SegmentedModel(
        full=model,
        cut=cut,
        left_space=left,
        right_space=right,
        R1=r1,
        R2=r2,
        mu1=r1 @ model.mu,
        mu2=r2 @ model.mu,
        A1=a1,
        A2=a2,
        B1=b1,
        B2=b2,
        W1=gram_matrix(left),
        W2=gram_matrix(right),
        g11=0.5 * (g11 + g11.T),
        g12=g12,
        g21=g12.T,
        g22=0.5 * (g22 + g22.T),
        G11=0.5 * (big11 + big11.T),
        G12=g12 + sb1 @ b2.T,
        G22=g22 + sb2 @ b2.T,
        G11_pinv=blup_gain(c, s),
        scores=blup_scores(c, s),
    )


def _check_left(seg: SegmentedModel, y1: SplineFunction) -> np.ndarray:
    if not isinstance(y1, SplineFunction) or y1.space.knot_vector != seg.left_space.knot_vector:
        raise InvalidInputError("observed curve must live in the left segment space")
    return y1.coefficients - seg.mu1


def predict(seg: SegmentedModel, y1: SplineFunction, convention: Convention = "g") -> Prediction:
    """BLUP of the continuation: coefficients ``mu2 + g21 G11^+ (y1 - mu1)``."""
    dev = _check_left(seg, y1)
    coef = seg.mu2 + seg.A2 @ (seg.scores[: seg.A2.shape[1]] @ dev)
    return Prediction(
        mean=SplineFunction(seg.right_space, coef),
        cond_cov=seg.conditional_covariance(convention),
        method="blup",
        obs_cov=seg.observed_error_covariance(),
    )


def ridge_gain(seg: SegmentedModel, sigma2: float) -> np.ndarray:
    """``A2 (A1'A1 + sigma2 L^-1)^-1 A1'`` via a ``p x p`` solve."""
    if not sigma2 > 0:
        raise InvalidVarianceError(f"sigma2 must be positive, got {sigma2}")
    lhs = seg.A1.T @ seg.A1 + np.diag(sigma2 / seg.full.L_diag)
    return seg.A2 @ np.linalg.solve(lhs, seg.A1.T)


def ridge_gain_direct(seg: SegmentedModel, sigma2: float) -> np.ndarray:
    """The same gain through the ``N1 x N1`` inverse ``g21 (g11 + sigma2 I)^-1``."""
    if not sigma2 > 0:
        raise InvalidVarianceError(f"sigma2 must be positive, got {sigma2}")
    n1 = seg.g11.shape[0]
    return np.linalg.solve(seg.g11 + sigma2 * np.eye(n1), seg.g12).T


def predict_ridge(seg: SegmentedModel, y1: SplineFunction, sigma2: float) -> Prediction:
    """Prediction when the observed coefficients carry iid ``sigma2`` noise.

    The conditional covariance under that model is
    ``sigma2 A2 (A1'A1 + sigma2 L^-1)^-1 A2'``; the observed continuation
    carries the same iid noise on its own coefficients on top.
    """
    dev = _check_left(seg, y1)
    gain = ridge_gain(seg, sigma2)
    lhs = seg.A1.T @ seg.A1 + np.diag(sigma2 / seg.full.L_diag)
    cov = sigma2 * seg.A2 @ np.linalg.solve(lhs, seg.A2.T)
    return Prediction(
        mean=SplineFunction(seg.right_space, seg.mu2 + gain @ dev),
        cond_cov=0.5 * (cov + cov.T),
        method="ridge",
        obs_cov=0.5 * (cov + cov.T) + sigma2 * np.eye(cov.shape[0]),
    )


def predict_mean(seg: SegmentedModel) -> Prediction:
    """Forecast from past days only: the mean curve with its unconditional spread."""
    return Prediction(
        mean=SplineFunction(seg.right_space, seg.mu2),
        cond_cov=seg.g22.copy(),
        method="mean-baseline",
        obs_cov=seg.G22.copy(),
    )


def concatenate(seg: SegmentedModel, x1: SplineFunction, pred: Prediction) -> Concatenation:
    """Join ``x1`` on the left segment with ``pred.mean`` on the right.

    Returns the least-squares full-space spline whose restrictions best match
    both pieces, with the derivative jumps (orders ``0..k-2``) at the cut. For
    noise-free input the jumps vanish and the match is exact.
    """
    _check_left(seg, x1)
    if pred.space.knot_vector != seg.right_space.knot_vector:
        raise InvalidInputError("prediction must live in the right segment space")
    stacked = np.vstack([seg.R1, seg.R2])
    target = np.concatenate([x1.coefficients, pred.mean.coefficients])
    coef, *_ = np.linalg.lstsq(stacked, target, rcond=None)
    residual = float(np.linalg.norm(stacked @ coef - target))
    jumps = derivative_jumps(x1, pred.mean, seg.cut, seg.full.space.order - 2)
    if jumps.max(initial=0.0) > 1e-8:
        log.info("concatenation at %g has derivative jumps %s", seg.cut, jumps)
    return Concatenation(SplineFunction(seg.full.space, coef), jumps, residual)


def pseudo_op_check(seg: SegmentedModel, y1: SplineFunction) -> float:
    """``|| G11 G11^+ (y1 - mu1) - (y1 - mu1) ||``; zero for in-model curves."""
    dev = _check_left(seg, y1)
    return float(np.linalg.norm(seg.G11 @ (seg.G11_pinv @ dev) - dev))


def direct_pinv_prediction(seg: SegmentedModel, y1: SplineFunction) -> np.ndarray:
    """Prediction coefficients using ``pinv(G11)`` directly, for cross-checks."""
    dev = _check_left(seg, y1)
    return seg.mu2 + seg.g21 @ (pinv(seg.G11).values @ dev)
