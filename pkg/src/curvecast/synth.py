"""Ground-truth Gaussian model sampler and brute-force reference predictors.

The reference predictors deliberately avoid the code paths used by
:mod:`curvecast.predictor`:

* :func:`discrete_blup_oracle` builds the joint coefficient covariance in the
  full space and applies ``m2 + R21 R11^+ (z1 - m1)`` with SciPy's
  pseudoinverse.
* :func:`mc_conditional` estimates ``E[X2(t) | Y1]`` from simulated pairs by
  kernel-weighted regression, touching no model matrix except to simulate.

Normal variates come from NumPy's ``Generator`` (PCG64 bit generator,
ziggurat normal sampler). Large draws are split into fixed-size batches, each
seeded from ``SeedSequence(seed).spawn``, so results depend only on the seed.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import CurvePanel, format_clock
from .errors import InvalidInputError, UnreliableEstimateError
from .estimation import CurveModel
from .splines import SplineSpace, basis_matrix, gram_matrix, restriction_matrix
from .linalg import sym_sqrt
from .rng import normals

MIN_ESS = 100.0


@dataclass(frozen=True)
class SyntheticSpec:
    """Known generating model plus observation noise and seed."""

    space: SplineSpace
    mu: np.ndarray
    A: np.ndarray
    L_diag: np.ndarray
    B: np.ndarray
    Sigma_diag: np.ndarray
    obs_noise_sd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        # validates the shared invariants
        self.model()
        if self.obs_noise_sd < 0:
            raise InvalidInputError("obs_noise_sd must be nonnegative")

    def model(self) -> CurveModel:
        return CurveModel(self.space, self.mu, self.A, self.L_diag, self.B, self.Sigma_diag)

    @classmethod
    def from_model(cls, model: CurveModel, obs_noise_sd: float = 0.0, seed: int = 0):
        return cls(model.space, model.mu, model.A, model.L_diag, model.B, model.Sigma_diag,
                   obs_noise_sd, seed)


def w_orthonormal(raw: np.ndarray, space: SplineSpace) -> np.ndarray:
    """Columns spanning the same space as ``raw`` that are orthonormal in W."""
    w = gram_matrix(space)
    half, half_inv = sym_sqrt(w), sym_sqrt(w, inverse=True)
    q, _ = np.linalg.qr(half @ raw)
    return half_inv @ q


def random_spec(seed: int, n_basis: int, p: int, q: int, order: int = 4,
                domain: tuple[float, float] = (0.0, 1.0), obs_noise_sd: float = 0.0,
                L_range=(0.5, 4.0), Sigma_range=(0.05, 0.5),
                level: float = 0.0) -> SyntheticSpec:
    """Random model on a uniform clamped space of dimension ``n_basis``.

    ``level`` is added to the mean curve; a level well above the factor
    spread keeps sampled panels away from the clip at zero.
    """
    rng = np.random.default_rng(seed)
    space = SplineSpace.uniform(domain[0], domain[1], n_basis - order + 1, order)
    loadings = w_orthonormal(rng.standard_normal((n_basis, p + q)), space)
    ld = np.sort(rng.uniform(*L_range, size=p))[::-1]
    sd = np.sort(rng.uniform(*Sigma_range, size=q))[::-1]
    mu = rng.standard_normal(n_basis) + level
    return SyntheticSpec(space, mu, loadings[:, :p], ld, loadings[:, p:], sd, obs_noise_sd, seed)


def sample_latent(spec: SyntheticSpec, m: int, seed: int | None = None):
    """Factor scores ``h`` (m x p) and noise scores ``eps`` (m x q)."""
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    p, q = spec.A.shape[1], spec.B.shape[1]
    z = normals(spec.seed if seed is None else seed, m, p + q)
    return z[:, :p] * np.sqrt(spec.L_diag), z[:, p:] * np.sqrt(spec.Sigma_diag)


def sample_curves(spec: SyntheticSpec, m: int, times=None, seed: int | None = None,
                  start_date: dt.date = dt.date(2003, 3, 3), interval_minutes: int | None = None):
    """Draw ``m`` noisy curves ``mu + A h + B eps``.

    Returns ``(coefficients, panel)``. When ``times`` (hours) is given the
    panel holds the curves evaluated there plus iid ``N(0, obs_noise_sd^2)``
    noise, clipped at zero, one calendar day per curve; otherwise ``panel`` is
    None.
    """
    seed = spec.seed if seed is None else seed
    h, eps = sample_latent(spec, m, seed)
    coefs = spec.mu + h @ spec.A.T + eps @ spec.B.T
    if times is None:
        return coefs, None
    times = np.asarray(times, dtype=float)
    values = coefs @ basis_matrix(spec.space, times).T
    if spec.obs_noise_sd > 0:
        values = values + spec.obs_noise_sd * normals(seed + 1, m, times.size)
    values = np.clip(values, 0.0, None)
    if interval_minutes is None:
        interval_minutes = int(round((times[1] - times[0]) * 60)) if times.size > 1 else 1
    dates = [start_date + dt.timedelta(days=i) for i in range(m)]
    panel = CurvePanel.from_arrays(dates, times, values, interval_minutes,
                                   [format_clock(t) for t in times])
    return coefs, panel


def _joint_blocks(spec: SyntheticSpec, cut: float, convention: str):
    r1 = restriction_matrix(spec.space, cut, "left")
    r2 = restriction_matrix(spec.space, cut, "right")
    kx = spec.A @ np.diag(spec.L_diag) @ spec.A.T
    ky = kx + spec.B @ np.diag(spec.Sigma_diag) @ spec.B.T
    r11 = r1 @ ky @ r1.T
    r21 = r2 @ (kx if convention == "g" else ky) @ r1.T
    return r1 @ spec.mu, r2 @ spec.mu, r11, r21


def discrete_blup_oracle(spec: SyntheticSpec, cut: float, y1_coeffs, convention: str = "g"):
    """Multivariate BLUP ``m2 + R21 R11^+ (z1 - m1)`` on coefficient vectors."""
    m1, m2, r11, r21 = _joint_blocks(spec, float(cut), convention)
    return m2 + r21 @ scipy.linalg.pinv(0.5 * (r11 + r11.T)) @ (np.asarray(y1_coeffs) - m1)


@dataclass(frozen=True)
class MCConditional:
    times: np.ndarray
    mean: np.ndarray
    mean_se: np.ndarray
    variance: np.ndarray
    variance_se: np.ndarray
    ess: float
    bandwidth: float


def mc_conditional(spec: SyntheticSpec, cut: float, y1_coeffs, n: int = 100_000,
                   bandwidth: float | None = None, times=None, seed: int | None = None,
                   method: str = "local-linear") -> MCConditional:
    """Kernel-regression estimate of the conditional law of ``X2(t)`` given ``Y1``.

    Draws ``n`` joint pairs, whitens the observed-segment coefficients by their
    sample principal axes, and weights draws with a Gaussian kernel of width
    ``bandwidth`` (whitened units) around the conditioning point.
    ``method="local-linear"`` fits a weighted linear regression and reports its
    intercept; ``method="nw"`` reports the plain weighted mean.
    """
    if n < 10_000:
        raise InvalidInputError("mc_conditional needs n >= 10000")
    cut = float(cut)
    a, b = spec.space.domain
    if times is None:
        times = np.linspace(cut, b, 10)
    times = np.asarray(times, dtype=float)
    seed = spec.seed + 7919 if seed is None else seed
    h, eps = sample_latent(spec, n, seed)
    x_full = spec.mu + h @ spec.A.T
    y1 = (x_full + eps @ spec.B.T) @ restriction_matrix(spec.space, cut, "left").T
    x2 = x_full @ basis_matrix(spec.space, times).T

    centre = y1.mean(axis=0)
    _, s, vt = np.linalg.svd((y1 - centre) / math.sqrt(n), full_matrices=False)
    keep = s > 1e-8 * s[0]
    axes, scale = vt[keep].T, s[keep]
    z = (y1 - centre) @ axes / scale
    target = (np.asarray(y1_coeffs, dtype=float) - centre) @ axes / scale
    d = z.shape[1]
    if bandwidth is None:
        if method == "nw":
            bandwidth = (4.0 / (d + 2)) ** (1.0 / (d + 4)) * n ** (-1.0 / (d + 4))
        else:
            bandwidth = 1.5
    dist2 = np.sum((z - target) ** 2, axis=1)
    w = np.exp(-(dist2 - dist2.min()) / (2.0 * bandwidth**2))
    ess = w.sum() ** 2 / np.sum(w**2)
    if ess < MIN_ESS:
        raise UnreliableEstimateError(f"effective sample size {ess:.1f} < {MIN_ESS}; raise n or bandwidth")

    sw = w.sum()
    if method == "nw":
        mean = w @ x2 / sw
        resid = x2 - mean
        mean_se = np.sqrt((w**2) @ resid**2) / sw
        dof = 1
    elif method == "local-linear":
        design = np.hstack([np.ones((n, 1)), z - target])
        xtw = design.T * w
        bread = np.linalg.inv(xtw @ design)
        coef = bread @ (xtw @ x2)
        mean = coef[0]
        resid = x2 - design @ coef
        mean_se = np.empty(times.size)
        for j in range(times.size):
            u = design * (w * resid[:, j])[:, None]
            sandwich = bread @ (u.T @ u) @ bread
            mean_se[j] = math.sqrt(max(sandwich[0, 0], 0.0))
        dof = d + 1
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    var = (w @ resid**2) / sw * ess / max(ess - dof, 1.0)
    var_se = np.sqrt((w**2) @ (resid**2 - var) ** 2) / sw
    return MCConditional(times, mean, mean_se, var, var_se, float(ess), float(bandwidth))


# ---------------------------------------------------------------------------
# call-centre style panels

_WEEKDAY_SCALE = {0: 1.15, 1: 1.0, 2: 0.98, 3: 0.97, 4: 0.92, 5: 0.55, 6: 0.35}


def _base_profile(t: np.ndarray) -> np.ndarray:
    """Smooth weekday arrival-rate shape (calls per hour), peak near 10 AM."""
    rise = 1.0 / (1.0 + np.exp(-(t - 8.3) / 0.55))
    decline = np.exp(-0.07 * np.clip(t - 10.5, 0, None))
    drop = 1.0 - 0.45 / (1.0 + np.exp(-(t - 16.5) / 0.35))
    tail = np.exp(-0.12 * np.clip(t - 17.0, 0, None))
    return 2000.0 * rise * decline * drop * tail + 40.0


def callcenter_panel(n_days: int, seed: int = 0, start: str = "07:00", end: str = "21:05",
                     interval_minutes: int = 5, start_date: dt.date = dt.date(2003, 3, 3),
                     weekdays_only: bool = True, level_sd: float = 0.12, tilt_sd: float = 0.10,
                     bump_sd: float = 0.08) -> CurvePanel:
    """Poisson interval counts around a smooth day-specific rate.

    Each day's log-rate is the weekday profile plus three smooth random
    effects: an overall level, a linear morning/afternoon tilt and a midday
    bump. Counts are Poisson given the rate.
    """
    rng = np.random.default_rng(seed)
    t0 = (int(start[:2]) * 60 + int(start[3:])) / 60.0
    t1 = (int(end[:2]) * 60 + int(end[3:])) / 60.0
    times = np.arange(t0, t1 + 1e-9, interval_minutes / 60.0)
    dates: list[dt.date] = []
    day = start_date
    while len(dates) < n_days:
        if not weekdays_only or day.weekday() < 5:
            dates.append(day)
        day += dt.timedelta(days=1)
    base = _base_profile(times) * interval_minutes / 60.0
    u = (times - times[0]) / (times[-1] - times[0])
    bump = np.exp(-0.5 * ((times - 13.0) / 1.5) ** 2)
    values = np.empty((n_days, times.size))
    for i, d in enumerate(dates):
        level = level_sd * rng.standard_normal()
        tilt = tilt_sd * rng.standard_normal()
        mid = bump_sd * rng.standard_normal()
        log_rate = np.log(base * _WEEKDAY_SCALE[d.weekday()]) + level + tilt * (u - 0.5) * 2 + mid * bump
        values[i] = rng.poisson(np.exp(log_rate))
    return CurvePanel.from_arrays(dates, times, values, interval_minutes,
                                  [format_clock(t) for t in times])
