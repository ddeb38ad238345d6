"""Simultaneous confidence bands for a predicted continuation.

Between two breaks a spline trajectory is a polynomial of degree ``k - 1``,
so it is pinned down by its values at ``k`` nodes. Bounding the standardized
conditional process at the nodes of every span bounds it everywhere once the
node-wise standard deviations are spread by the Lagrange weights. The
critical value for the node bound comes from seeded simulation, with a
deterministic union-style bound as a cross-check. A cross-validated variant
calibrates the multiplier on held-out days instead of trusting the model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special, stats

from .errors import InfeasibleFoldError, InvalidInputError
from .estimation import CurveSample, fit_coefficients
from .linalg import psd_factor
from .predictor import Prediction, SegmentedModel
from .rng import normal_batches
from .splines import SplineFunction, SplineSpace, basis_matrix, lagrange_weights

log = logging.getLogger(__name__)

BAND_KINDS = ("global", "local", "cv_global", "cv_local")


@dataclass(frozen=True, eq=False)
class BandGrid:
    """Breaks of the right segment plus ``k - 2`` equally spaced points per span.

    ``span_nodes[i]`` indexes the ``k`` points of span ``i`` into ``points``;
    consecutive spans share their common break.
    """

    points: np.ndarray
    breaks: np.ndarray
    order: int
    span_nodes: np.ndarray

    @property
    def n_spans(self) -> int:
        return self.breaks.size - 1

    def span_of(self, t) -> np.ndarray:
        """Span index of each ``t``; right endpoints belong to the last span."""
        t = np.asarray(t, dtype=float)
        return np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, self.n_spans - 1)


def build_grid(space: SplineSpace) -> BandGrid:
    k = space.order
    if k < 2:
        raise InvalidInputError("bands need splines of order >= 2")
    br = space.breaks
    m = br.size
    frac = np.arange(k - 1) / (k - 1)
    pts = [br[i] + frac * (br[i + 1] - br[i]) for i in range(m - 1)]
    points = np.concatenate(pts + [br[-1:]])
    span_nodes = np.arange(m - 1)[:, None] * (k - 1) + np.arange(k)[None, :]
    return BandGrid(points, br.copy(), k, span_nodes)


def grid_covariance(source, grid: BandGrid, space: SplineSpace | None = None) -> np.ndarray:
    """Conditional covariance of the continuation at the grid points.

    ``source`` is a :class:`Prediction`, a :class:`SegmentedModel` (its
    default conditional covariance) or a coefficient covariance matrix, in
    which case ``space`` gives the basis.
    """
    if isinstance(source, Prediction):
        cov, space = source.cond_cov, source.space
    elif isinstance(source, SegmentedModel):
        cov, space = source.conditional_covariance(), source.right_space
    else:
        cov = np.asarray(source, dtype=float)
        if space is None:
            raise InvalidInputError("space is required with a bare covariance matrix")
    b = basis_matrix(space, grid.points)
    out = b @ cov @ b.T
    return 0.5 * (out + out.T)


def _standardized_factor(cov: np.ndarray):
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    top = sd.max(initial=0.0)
    live = sd > 1e-10 * top if top > 0 else np.zeros(sd.shape, dtype=bool)
    if np.any(~live):
        log.info("%d grid point(s) with zero conditional variance excluded from the maximum",
                 int(np.count_nonzero(~live)))
    idx = np.flatnonzero(live)
    corr = cov[np.ix_(idx, idx)] / np.outer(sd[idx], sd[idx])
    return idx, psd_factor(corr)


def _max_abs_draws(cov: np.ndarray, groups: Sequence[np.ndarray], n_sims: int, seed: int):
    """Simulated ``max |Z|`` over each index group, shape ``(n_sims, len(groups))``."""
    idx, factor = _standardized_factor(cov)
    pos = -np.ones(cov.shape[0], dtype=int)
    pos[idx] = np.arange(idx.size)
    local = [pos[g][pos[g] >= 0] for g in groups]
    out = np.zeros((n_sims, len(groups)))
    if idx.size == 0 or factor.shape[1] == 0:
        return out
    row = 0
    for batch in normal_batches(seed, n_sims, factor.shape[1]):
        z = np.abs(batch @ factor.T)
        for j, g in enumerate(local):
            if g.size:
                out[row:row + batch.shape[0], j] = z[:, g].max(axis=1)
        row += batch.shape[0]
    return out


def _upper_quantile(draws: np.ndarray, delta: float) -> np.ndarray:
    return np.quantile(draws, 1.0 - delta, axis=0, method="inverted_cdf")


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")


def max_abs_quantile(cov, delta: float, n_sims: int = 100_000, seed: int = 0) -> float:
    """Simulated ``(1 - delta)`` quantile of ``max_i |Z_i|`` for ``Z`` with covariance ``cov`` standardized."""
    _check_delta(delta)
    cov = np.asarray(cov, dtype=float)
    draws = _max_abs_draws(cov, [np.arange(cov.shape[0])], n_sims, seed)
    return float(_upper_quantile(draws, delta)[0])


def critical_values(source, grid: BandGrid, delta: float, n_sims: int = 100_000,
                    seed: int = 0) -> tuple[float, np.ndarray]:
    """Global critical value and per-span values from one set of draws.

    Sharing the draws makes the global value at least every per-span value
    for any seed.
    """
    _check_delta(delta)
    cov = grid_covariance(source, grid) if not isinstance(source, np.ndarray) else source
    groups = [np.arange(grid.points.size)] + list(grid.span_nodes)
    q = _upper_quantile(_max_abs_draws(cov, groups, n_sims, seed), delta)
    return float(q[0]), q[1:]


def critical_value_global(source, grid: BandGrid, delta: float, n_sims: int = 100_000,
                          seed: int = 0) -> float:
    """Smallest ``z`` with ``P(max over the grid of |Z| > z) <= delta``, by simulation."""
    return critical_values(source, grid, delta, n_sims, seed)[0]


def critical_value_local(source, grid: BandGrid, delta: float, n_sims: int = 100_000,
                         seed: int = 0) -> tuple[float, np.ndarray]:
    """Largest per-span critical value, and the per-span values themselves."""
    _, per_span = critical_values(source, grid, delta, n_sims, seed)
    return float(per_span.max()), per_span


class LagrangeEnvelope:
    """``D(t) = sum_j |l_j(t)| sd_j`` over the nodes of the span containing ``t``."""

    def __init__(self, grid: BandGrid, node_sd):
        node_sd = np.asarray(node_sd, dtype=float)
        if node_sd.shape != grid.points.shape:
            raise InvalidInputError("need one standard deviation per grid point")
        self.grid = grid
        self.node_sd = node_sd

    def __call__(self, t) -> np.ndarray:
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        spans = self.grid.span_of(t)
        out = np.empty(t.size)
        for i in np.unique(spans):
            sel = spans == i
            nodes = self.grid.span_nodes[i]
            w = lagrange_weights(self.grid.points[nodes], t[sel])
            out[sel] = np.abs(w) @ self.node_sd[nodes]
        return out[0] if scalar else out


@dataclass(frozen=True, eq=False)
class Band:
    """``center(t) +- critical_value * spread(t)``."""

    center: SplineFunction
    kind: str
    level: float
    critical_value: float
    spread: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if self.kind not in BAND_KINDS:
            raise InvalidInputError(f"unknown band kind {self.kind!r}")

    def halfwidth(self, t) -> np.ndarray:
        return self.critical_value * np.asarray(self.spread(t))

    def lower(self, t) -> np.ndarray:
        return self.center(t) - self.halfwidth(t)

    def upper(self, t) -> np.ndarray:
        return self.center(t) + self.halfwidth(t)


def envelope(grid: BandGrid, pred: Prediction, z: float, kind: str = "global",
             level: float = 0.95) -> Band:
    """Band ``pred.mean +- z D(t)`` with the Lagrange envelope of the node sd."""
    if z < 0:
        raise InvalidInputError("critical value must be nonnegative")
    return Band(pred.mean, kind, level, float(z), LagrangeEnvelope(grid, pred.sd(grid.points)))


def model_band(pred: Prediction, delta: float = 0.05, kind: str = "global",
               n_sims: int = 100_000, seed: int = 0) -> Band:
    """Global or local band from the model's conditional law."""
    grid = build_grid(pred.space)
    z_global, per_span = critical_values(pred, grid, delta, n_sims, seed)
    if kind == "global":
        z = z_global
    elif kind == "local":
        z = float(per_span.max())
    else:
        raise InvalidInputError(f"model bands are global or local, not {kind!r}")
    return envelope(grid, pred, z, kind, 1.0 - delta)


# deterministic bound


def consecutive_correlations(cov) -> np.ndarray:
    """Correlations of neighbouring grid points, skipping points with zero variance."""
    cov = np.asarray(cov, dtype=float)
    sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    top = sd.max(initial=0.0)
    idx = np.flatnonzero(sd > 1e-10 * top) if top > 0 else np.array([], dtype=int)
    if idx.size < 2:
        return np.zeros(0)
    a, b = idx[:-1], idx[1:]
    return np.clip(cov[a, b] / (sd[a] * sd[b]), -1.0, 1.0)


_PDF0 = 1.0 / np.sqrt(2.0 * np.pi)


def _box_prob(a: float, rho: float) -> float:
    """``P(|X| <= a, |Y| <= a)`` for a standard bivariate normal with correlation ``rho``."""
    if a <= 0:
        return 0.0
    if abs(rho) >= 1.0 - 1e-12:
        return 2.0 * special.ndtr(a) - 1.0
    s = np.sqrt(1.0 - rho * rho)

    def inner(x):
        return _PDF0 * np.exp(-0.5 * x * x) * (special.ndtr((a - rho * x) / s) - special.ndtr((-a - rho * x) / s))

    val, _ = integrate.quad(inner, -a, a, epsabs=1e-10, epsrel=1e-10, limit=200)
    return float(val)


def inequality_rhs(a: float, correlations) -> float:
    """``P(|Z_1| > a) + sum_i P(|Z_i| <= a, |Z_{i+1}| > a)``."""
    p_in = 2.0 * special.ndtr(a) - 1.0
    total = 1.0 - p_in
    for rho in np.asarray(correlations, dtype=float):
        total += p_in - _box_prob(a, float(rho))
    return total


def inequality_bound(delta: float, correlations, tol: float = 1e-6) -> float:
    """Smallest ``a`` (to ``tol``) whose union-style tail bound is at most ``delta``.

    ``correlations`` lists the correlations of consecutive grid points; an
    empty list means a single point.
    """
    _check_delta(delta)
    correlations = np.asarray(correlations, dtype=float)
    if np.any(np.abs(correlations) > 1.0 + 1e-12):
        raise InvalidInputError("correlations must lie in [-1, 1]")
    n = correlations.size + 1
    hi = float(stats.norm.isf(delta / (2.0 * n)))
    lo = 0.0
    while inequality_rhs(hi, correlations) > delta:
        hi *= 1.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if inequality_rhs(mid, correlations) <= delta:
            hi = mid
        else:
            lo = mid
    return hi


# cross-validated bands


@dataclass(frozen=True, eq=False)
class CVBands:
    """Medians over folds of the cross-validated multipliers, with the spread ``D_hat``."""

    c_global: float
    c_local: float
    fold_global: np.ndarray
    fold_local: np.ndarray
    spread: SplineFunction
    level: float

    def band(self, pred: Prediction, kind: str = "cv_global") -> Band:
        c = self.c_global if kind == "cv_global" else self.c_local
        if kind not in ("cv_global", "cv_local"):
            raise InvalidInputError(f"cross-validated bands are cv_global or cv_local, not {kind!r}")
        return Band(pred.mean, kind, self.level, c, _nonneg(self.spread))


def _nonneg(f: SplineFunction) -> Callable:
    def spread(t):
        return np.clip(f(t), 0.0, None)

    return spread


def sd_spline(pred: Prediction, grid: BandGrid | None = None, observed: bool = True) -> SplineFunction:
    """Least-squares spline of the error sd over the band grid, in the prediction's space.

    By default the sd is that of the error against the observed
    continuation, which is what held-out days measure.
    """
    grid = grid or build_grid(pred.space)
    b = basis_matrix(pred.space, grid.points)
    coef, *_ = np.linalg.lstsq(b, pred.sd(grid.points, observed), rcond=None)
    return SplineFunction(pred.space, coef)


def required_count(n: int, delta: float) -> int:
    """Fewest curves out of ``n`` whose share strictly exceeds ``1 - delta``."""
    return int(np.floor((1.0 - delta) * n + 1e-12)) + 1


def fold_multipliers(ratios: np.ndarray, delta: float) -> tuple[float, float]:
    """``(C_global, C_local)`` for one fold from ``|residual| / D_hat`` of shape (curves, points)."""
    ratios = np.atleast_2d(ratios)
    n = ratios.shape[0]
    if n == 0:
        raise InfeasibleFoldError("empty fold")
    need = required_count(n, delta)
    if need > n:
        raise InfeasibleFoldError(f"fold of {n} curve(s) cannot exceed coverage {1 - delta}")
    c_global = np.sort(ratios.max(axis=1))[need - 1]
    c_local = np.sort(ratios, axis=0)[need - 1].max()
    return float(c_global), float(c_local)


def cv_bands(samples: Sequence[CurveSample], space: SplineSpace, config, cut: float,
             K: int = 10, delta: float = 0.05, target: str = "grid",
             eval_start: float | None = None, seed: int | None = None) -> CVBands:
    """Cross-validated band multipliers for the forecaster described by ``config``.

    Each fold's model is fitted on the other folds. Held-out residuals are
    measured on the band grid against the day's regression spline
    (``target="grid"``) or at the day's own observation times from
    ``eval_start`` on (``target="observations"``), and divided by that fold's
    ``D_hat``. The returned spread is ``D_hat`` of a model fitted on all days.
    """
    from .forecasting import Forecaster, fold_indices

    _check_delta(delta)
    if K < 2:
        raise InvalidInputError("K must be at least 2")
    if len(samples) < K:
        raise InvalidInputError(f"need at least K={K} curves, got {len(samples)}")
    if target not in ("grid", "observations"):
        raise InvalidInputError(f"unknown target {target!r}")
    coefs = fit_coefficients(samples, space)
    folds = fold_indices(len(samples), K, seed)
    start = cut if eval_start is None else eval_start
    fold_global, fold_local = [], []
    for j, held in enumerate(folds):
        train = np.setdiff1d(np.arange(len(samples)), held)
        fc = Forecaster.fit_coefficients(coefs[train], space, config)
        seg = fc.segmented(cut)
        grid = build_grid(seg.right_space)
        d_hat = None
        rows = []
        for i in held:
            s = samples[i]
            pred = fc.forecast(s, cut)
            if d_hat is None:
                d_hat = _nonneg(sd_spline(pred, grid))
            if target == "grid":
                pts = grid.points
                truth = SplineFunction(space, coefs[i])(pts)
            else:
                keep = s.times >= start - 1e-9
                pts, truth = s.times[keep], s.values[keep]
            resid = np.abs(truth - pred.mean(pts))
            # residuals at roundoff level count as exact
            resid[resid <= 1e-9 * max(1.0, np.abs(truth).max(initial=0.0))] = 0.0
            spread = d_hat(pts)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(resid > 0, resid / spread, 0.0)
            rows.append(ratio)
        ratios = np.vstack(rows)
        if not np.all(np.isfinite(ratios)):
            raise InfeasibleFoldError(f"fold {j}: zero spread where held-out residuals are nonzero")
        cg, cl = fold_multipliers(ratios, delta)
        fold_global.append(cg)
        fold_local.append(cl)
    full = Forecaster.fit_coefficients(coefs, space, config)
    # the conditional covariance does not depend on the observed values
    pred0 = full.forecast(samples[0], cut)
    return CVBands(
        c_global=float(np.median(fold_global)),
        c_local=float(np.median(fold_local)),
        fold_global=np.array(fold_global),
        fold_local=np.array(fold_local),
        spread=sd_spline(pred0),
        level=1.0 - delta,
    )
