"""From raw day samples to continuation forecasts.

Glue between estimation and prediction: picks the knot layout, fits the
model on training days, turns a partially observed day into a spline on the
left segment and produces a :class:`~curvecast.predictor.Prediction`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DegenerateModelError, InvalidInputError, UnderdeterminedFitError
from .estimation import (
    CurveModel,
    CurveSample,
    estimate_model,
    fit_coefficients,
    functional_pca,
    select_dimensions,
    whitened_eigen,
)
from .predictor import Prediction, SegmentedModel, predict, predict_mean, predict_ridge, segment
from .splines import SplineFunction, SplineSpace, basis_matrix, insert_knots

log = logging.getLogger(__name__)

METHODS = ("blup", "ridge", "mean-baseline")


@dataclass(frozen=True)
class ForecastConfig:
    """Model and predictor settings.

    ``n_spans`` fixes the number of equal knot spans; when None there is one
    span per ``intervals_per_break`` observation intervals. ``p`` and ``q``
    default to cumulative-variance selection at ``threshold``. For the ridge
    method ``sigma2`` overrides the model's residual variance and
    ``sigma2_scale`` multiplies whichever value is used.
    """

    order: int = 4
    intervals_per_break: int = 4
    n_spans: int | None = None
    p: int | None = None
    q: int | None = None
    threshold: float = 0.9
    method: str = "ridge"
    sigma2: float | None = None
    sigma2_scale: float = 1.0
    convention: str = "g"

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.order < 2:
            raise InvalidInputError("order must be >= 2")


def build_space(times, config: ForecastConfig) -> SplineSpace:
    times = np.asarray(times, dtype=float)
    if config.n_spans is not None:
        n_spans = config.n_spans
    else:
        n_spans = max(1, (times.size - 1) // config.intervals_per_break)
    return SplineSpace.uniform(times[0], times[-1], n_spans, config.order)


def _coarser(space: SplineSpace) -> SplineSpace | None:
    interior = space.breaks[1:-1]
    if interior.size == 0:
        return None
    keep = interior[1::2]
    a, b = space.domain
    return SplineSpace.from_breaks(np.concatenate([[a], keep, [b]]), space.order)


def fit_observed(sample: CurveSample, left_space: SplineSpace) -> SplineFunction:
    """Regression spline of the samples at or before the cut, in ``left_space``.

    When there are too few points the interior knots are thinned until the
    fit is determined, and the result is re-expressed in ``left_space`` by
    knot insertion.
    """
    a, cut = left_space.domain
    slack = 1e-9 * (cut - a)
    obs = sample.window(a - slack, cut + slack)
    space = left_space
    while True:
        design = basis_matrix(space, obs.times) if obs.times.size else np.zeros((0, space.dim))
        if design.shape[0] >= space.dim and np.linalg.matrix_rank(design) == space.dim:
            break
        coarse = _coarser(space)
        if coarse is None:
            raise UnderdeterminedFitError(
                f"{obs.times.size} observations before the cut cannot determine an order-{space.order} spline"
            )
        space = coarse
    coef, *_ = np.linalg.lstsq(design, obs.values, rcond=None)
    f = SplineFunction(space, coef)
    if space is left_space:
        return f
    log.warning("left segment coarsened to %d basis functions for %d observations",
                space.dim, obs.times.size)
    extra = _knot_difference(left_space.knots, space.knots)
    refined = insert_knots(f, extra)
    return SplineFunction(left_space, refined.coefficients)


def _knot_difference(fine: np.ndarray, coarse: np.ndarray) -> np.ndarray:
    fine_vals, fine_counts = np.unique(fine, return_counts=True)
    out = []
    for v, c in zip(fine_vals, fine_counts):
        out.extend([v] * (c - int(np.count_nonzero(coarse == v))))
    return np.array(out)


class Forecaster:
    """A model fitted on training days, ready to forecast at any cut."""

    def __init__(self, model: CurveModel, config: ForecastConfig):
        self.model = model
        self.config = config
        self._segments: dict[float, SegmentedModel] = {}

    @classmethod
    def fit(cls, samples: Sequence[CurveSample], space: SplineSpace,
            config: ForecastConfig) -> "Forecaster":
        return cls(estimate_model(samples, space, config.p, config.q, config.threshold), config)

    @classmethod
    def fit_coefficients(cls, coefs: np.ndarray, space: SplineSpace,
                         config: ForecastConfig) -> "Forecaster":
        cap = min(coefs.shape[0] - 1, space.dim)
        p, q = config.p, config.q
        if p is None or q is None:
            _, vals, _ = whitened_eigen(coefs, space)
            sp, sq = select_dimensions(vals[:cap], config.threshold)
            p = sp if p is None else p
            q = sq if q is None else q
        p = min(p, cap)
        q = max(0, min(q, cap - p))
        return cls(functional_pca(coefs, space, p, q), config)

    def segmented(self, cut: float) -> SegmentedModel:
        cut = float(cut)
        if cut not in self._segments:
            self._segments[cut] = segment(self.model, cut)
        return self._segments[cut]

    @cached_property
    def sigma2(self) -> float:
        s2 = self.config.sigma2 if self.config.sigma2 is not None else self.model.sigma2
        s2 *= self.config.sigma2_scale
        if s2 <= 0:
            # no residual spectrum left; fall back to a tiny ridge
            s2 = 1e-8 * float(self.model.L_diag[0])
        return s2

    def predict_coefficients(self, y1: SplineFunction, cut: float) -> Prediction:
        seg = self.segmented(cut)
        method = self.config.method
        if method == "blup":
            return predict(seg, y1, self.config.convention)
        if method == "ridge":
            return predict_ridge(seg, y1, self.sigma2)
        return predict_mean(seg)

    def forecast(self, sample: CurveSample, cut: float) -> Prediction:
        """Forecast the rest of ``sample``'s day from its values up to ``cut``."""
        seg = self.segmented(cut)
        if self.config.method == "mean-baseline":
            return predict_mean(seg)
        y1 = fit_observed(sample, seg.left_space)
        return self.predict_coefficients(y1, cut)


def with_method(config: ForecastConfig, method: str) -> ForecastConfig:
    return replace(config, method=method)


def fold_indices(n: int, k: int, seed: int | None = None) -> list[np.ndarray]:
    """Round-robin fold assignment by position; shuffled first when ``seed`` is given."""
    if k < 2:
        raise InvalidInputError("need at least two folds")
    order = np.arange(n)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(n)
    return [order[j::k] for j in range(k) if order[j::k].size]


def cv_select(samples: Sequence[CurveSample], space: SplineSpace, config: ForecastConfig,
              cut: float, eval_start: float, folds: int = 10,
              p_grid: Sequence[int] | None = None,
              sigma2_scales: Sequence[float] = (0.25, 1.0, 4.0, 16.0)) -> ForecastConfig:
    """Choose ``p`` (and ``sigma2_scale`` for ridge) by K-fold forecast RMSE.

    Each candidate is scored by the root mean squared error of forecasting the
    held-out days' observations at or after ``eval_start`` from their data up
    to ``cut``. ``q`` is fixed to 0 for ridge and kept from the selection
    rule for BLUP.
    """
    if config.method == "mean-baseline":
        return config
    coefs = fit_coefficients(samples, space)
    folds_ = fold_indices(len(samples), min(folds, len(samples)))
    max_p = max(1, min(len(samples) - len(max(folds_, key=len)) - 1, space.dim, 8))
    if p_grid is None:
        p_grid = range(1, max_p + 1)
    scales = sigma2_scales if config.method == "ridge" else (config.sigma2_scale,)
    best, best_score = config, np.inf
    for p in p_grid:
        for scale in scales:
            cand = replace(config, p=int(p), q=0 if config.method == "ridge" else config.q,
                           sigma2_scale=float(scale))
            err, count = 0.0, 0
            try:
                for held in folds_:
                    train = np.setdiff1d(np.arange(len(samples)), held)
                    fc = Forecaster.fit_coefficients(coefs[train], space, cand)
                    for i in held:
                        s = samples[i]
                        pred = fc.forecast(s, cut)
                        keep = s.times >= eval_start
                        r = s.values[keep] - pred.mean(s.times[keep])
                        err += float(r @ r)
                        count += r.size
            except (InvalidInputError, UnderdeterminedFitError, DegenerateModelError,
                    np.linalg.LinAlgError) as exc:
                log.debug("candidate p=%s scale=%s skipped: %s", p, scale, exc)
                continue
            score = np.sqrt(err / max(count, 1))
            if score < best_score:
                best, best_score = cand, score
    log.debug("cv selected p=%s sigma2_scale=%s (rmse %.4g)", best.p, best.sigma2_scale, best_score)
    return best
