"""Rolling evaluation of continuation forecasts over a panel of days.

For every test day the model is fitted on a window of earlier days, the day
is cut at a clock time, its remainder is forecast and the forecast is scored
on the intervals from ``eval_start`` to the end of the day.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .bands import cv_bands, model_band
from .data import CurvePanel, format_clock, parse_clock
from .errors import InvalidInputError, NoDataError
from .estimation import fit_coefficients
from .forecasting import ForecastConfig, Forecaster, build_space, cv_select

log = logging.getLogger(__name__)

TRAINING_MODES = ("same-weekday", "rolling-all")
BAND_CHOICES = ("none", "global", "local", "cv_global", "cv_local")
STATS = ("min", "q1", "median", "mean", "q3", "max")


def _clock(value) -> float:
    return parse_clock(value) if isinstance(value, str) else float(value)


@dataclass(frozen=True)
class ProtocolConfig:
    """Evaluation protocol.

    Clock times may be given as ``"HH:MM"`` strings or hours. ``select="cv"``
    picks the number of factors (and the ridge variance scale) per test day
    by ``cv_folds``-fold cross-validation on the training window.
    """

    training_mode: str = "same-weekday"
    window_days: int = 20
    cut_time: float | str = "10:00"
    eval_start: float | str = "12:00"
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    select: str = "none"
    cv_folds: int = 10
    bands: str = "cv_global"
    delta: float = 0.05
    K: int = 10
    n_sims: int = 20_000
    seed: int = 0
    first_test: dt.date | None = None
    last_test: dt.date | None = None
    max_test_days: int | None = None

    def __post_init__(self):
        if self.training_mode not in TRAINING_MODES:
            raise InvalidInputError(f"training_mode must be one of {TRAINING_MODES}")
        if self.window_days < 2:
            raise InvalidInputError("window_days must be at least 2")
        if self.bands not in BAND_CHOICES:
            raise InvalidInputError(f"bands must be one of {BAND_CHOICES}")
        if self.select not in ("none", "cv"):
            raise InvalidInputError("select must be 'none' or 'cv'")
        if self.eval_start_hours < self.cut_hours:
            raise InvalidInputError("eval_start must not precede cut_time")
        if not 0 < self.delta < 1:
            raise InvalidInputError("delta must lie in (0, 1)")

    @property
    def cut_hours(self) -> float:
        return _clock(self.cut_time)

    @property
    def eval_start_hours(self) -> float:
        return _clock(self.eval_start)

    @property
    def label(self) -> str:
        if self.forecast.method == "mean-baseline":
            return "mean-baseline"
        return f"{self.forecast.method}@{format_clock(self.cut_hours)}"


def rmse(truth, forecast) -> float:
    r = np.asarray(truth, dtype=float) - np.asarray(forecast, dtype=float)
    return float(np.sqrt(np.mean(r * r)))


def ape(truth, forecast) -> float:
    """Mean absolute percentage error; NaN if any truth value is zero."""
    truth = np.asarray(truth, dtype=float)
    if np.any(truth == 0):
        return float("nan")
    return float(100.0 * np.mean(np.abs(truth - np.asarray(forecast, dtype=float)) / truth))


def cover_width(lower, upper, truth) -> tuple[float, float]:
    """Share of intervals strictly inside the band, and the mean band width."""
    lower, upper, truth = (np.asarray(x, dtype=float) for x in (lower, upper, truth))
    inside = (lower < truth) & (truth < upper)
    return float(inside.mean()), float(np.mean(upper - lower))


def summary_stats(values) -> dict[str, float]:
    """Min, quartiles (linear interpolation), median, mean and max, ignoring NaN."""
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return {k: float("nan") for k in STATS}
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    return {"min": float(v.min()), "q1": float(q1), "median": float(med),
            "mean": float(v.mean()), "q3": float(q3), "max": float(v.max())}


@dataclass
class DayResult:
    date: dt.date
    times: np.ndarray
    truth: np.ndarray
    forecast: np.ndarray
    lower: np.ndarray | None
    upper: np.ndarray | None
    rmse: float
    ape: float
    cover: float
    width: float


@dataclass
class EvalReport:
    label: str
    days: list[DayResult]

    @property
    def dates(self) -> list[dt.date]:
        return [d.date for d in self.days]

    def metric(self, name: str) -> np.ndarray:
        return np.array([getattr(d, name) for d in self.days], dtype=float)

    @property
    def excluded_from_ape(self) -> list[dt.date]:
        return [d.date for d in self.days if np.isnan(d.ape)]

    def summary(self, name: str) -> dict[str, float]:
        return summary_stats(self.metric(name))

    def mean_se(self, name: str) -> tuple[float, float]:
        v = self.metric(name)
        v = v[~np.isnan(v)]
        return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan")


def training_indices(panel: CurvePanel, j: int, mode: str, window: int) -> list[int]:
    """Indices of the ``window`` most recent eligible days before day ``j``."""
    target = panel.days[j].weekday
    out = []
    for i in range(j - 1, -1, -1):
        if mode == "rolling-all" or panel.days[i].weekday == target:
            out.append(i)
            if len(out) == window:
                break
    return sorted(out)


def _test_days(panel: CurvePanel, config: ProtocolConfig) -> list[tuple[int, list[int]]]:
    out = []
    for j, day in enumerate(panel.days):
        if config.first_test and day.date < config.first_test:
            continue
        if config.last_test and day.date > config.last_test:
            continue
        train = training_indices(panel, j, config.training_mode, config.window_days)
        if len(train) < config.window_days:
            continue
        out.append((j, train))
        if config.max_test_days and len(out) >= config.max_test_days:
            break
    return out


def run_protocol(panel: CurvePanel, config: ProtocolConfig) -> EvalReport:
    """Forecast and score every day that has a full training window."""
    if len(panel) == 0:
        raise NoDataError("empty panel")
    times = panel.times
    cut, start = config.cut_hours, config.eval_start_hours
    a, b = float(times[0]), float(times[-1])
    if not a < cut < b:
        raise InvalidInputError(f"cut {format_clock(cut)} outside the day {format_clock(a)}-{format_clock(b)}")
    space = build_space(times, config.forecast)
    keep = times >= start - 1e-9
    eval_times = times[keep]
    plan = _test_days(panel, config)
    if not plan:
        raise NoDataError(f"no day has {config.window_days} earlier {config.training_mode} days")
    results = []
    for j, train in plan:
        day = panel.days[j]
        samples = [panel.days[i].sample for i in train]
        fcfg = config.forecast
        if config.select == "cv":
            fcfg = cv_select(samples, space, fcfg, cut, start, folds=config.cv_folds)
        fc = Forecaster.fit_coefficients(fit_coefficients(samples, space), space, fcfg)
        pred = fc.forecast(day.sample, cut)
        truth = day.sample.values[keep]
        yhat = pred.mean(eval_times)
        lower = upper = None
        cover = width = float("nan")
        if config.bands != "none":
            band_seed = config.seed + j
            if config.bands.startswith("cv"):
                cvb = cv_bands(samples, space, fcfg, cut, min(config.K, len(samples)),
                               config.delta, target="observations", eval_start=start, seed=None)
                band = cvb.band(pred, config.bands)
            else:
                band = model_band(pred, config.delta, config.bands, config.n_sims, band_seed)
            lower, upper = band.lower(eval_times), band.upper(eval_times)
            cover, width = cover_width(lower, upper, truth)
        results.append(DayResult(day.date, eval_times, truth, yhat, lower, upper,
                                 rmse(truth, yhat), ape(truth, yhat), cover, width))
        log.debug("%s %s rmse=%.3f", config.label, day.date, results[-1].rmse)
    return EvalReport(config.label, results)


def compare(panel: CurvePanel, config: ProtocolConfig, cuts=("10:00", "12:00"),
            baseline: bool = True) -> list[EvalReport]:
    """Reports for the mean baseline and the configured method at each cut."""
    reports = []
    if baseline:
        base = replace(config, forecast=replace(config.forecast, method="mean-baseline"), select="none")
        reports.append(run_protocol(panel, base))
    for c in cuts:
        reports.append(run_protocol(panel, replace(config, cut_time=c)))
    return reports
