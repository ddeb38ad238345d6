"""Day-indexed panels of intraday curves and their CSV form.

A panel CSV has a header ``date,HH:MM,HH:MM,...`` and one row per day. Each
clock label marks the end of its interval, so the value under ``10:05`` with
5-minute intervals counts events in ``[10:00, 10:05]``.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import NoDataError, SchemaError
from .estimation import CurveSample

log = logging.getLogger(__name__)


def parse_clock(label: str) -> float:
    """``"HH:MM"`` to hours after midnight."""
    try:
        hh, mm = label.strip().split(":")
        hours, minutes = int(hh), int(mm)
    except ValueError as exc:
        raise SchemaError(f"bad clock label {label!r}; expected HH:MM") from exc
    if not (0 <= hours <= 24 and 0 <= minutes < 60):
        raise SchemaError(f"clock label {label!r} out of range")
    return hours + minutes / 60.0


def format_clock(hours: float) -> str:
    total = int(round(hours * 60))
    return f"{total // 60:02d}:{total % 60:02d}"


@dataclass(frozen=True)
class DayRecord:
    date: dt.date
    weekday: str
    sample: CurveSample


@dataclass
class CurvePanel:
    """Curves of many days sampled on one shared clock grid."""

    days: list[DayRecord]
    interval_minutes: int
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.interval_minutes <= 0:
            raise SchemaError("interval_minutes must be positive")
        if self.days:
            t0 = self.days[0].sample.times
            for d in self.days:
                if not np.array_equal(d.sample.times, t0):
                    raise SchemaError(f"day {d.date} has a different time grid")
                if np.any(d.sample.values < 0):
                    raise SchemaError(f"day {d.date} has negative values")
        if not self.labels and self.days:
            self.labels = [format_clock(t) for t in self.days[0].sample.times]

    def __len__(self) -> int:
        return len(self.days)

    @property
    def times(self) -> np.ndarray:
        return self.days[0].sample.times

    @property
    def values(self) -> np.ndarray:
        return np.vstack([d.sample.values for d in self.days])

    @property
    def day_window(self) -> tuple[float, float]:
        t = self.times
        return float(t[0]), float(t[-1])

    def subset(self, indices: Iterable[int]) -> "CurvePanel":
        return CurvePanel([self.days[i] for i in indices], self.interval_minutes, list(self.labels))

    @classmethod
    def from_arrays(cls, dates: Sequence[dt.date], times, values, interval_minutes: int,
                    labels: Sequence[str] | None = None) -> "CurvePanel":
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        days = [
            DayRecord(d, d.strftime("%a"), CurveSample(times, row, d.isoformat()))
            for d, row in zip(dates, values)
        ]
        return cls(days, interval_minutes, list(labels) if labels else [])


def read_exclusions(path: str | Path) -> set[dt.date]:
    """ISO dates, one per line; blank lines and ``#`` comments ignored."""
    out = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            try:
                out.add(dt.date.fromisoformat(line))
            except ValueError as exc:
                raise SchemaError(f"bad date {line!r} in exclusion list {path}") from exc
    return out


def _read_one(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise NoDataError(f"{path} is empty")
    return [h.strip() for h in rows[0]], rows[1:]


def ingest_csv(paths, exclude: Iterable[dt.date] | None = None,
               date_column: str = "date") -> CurvePanel:
    """Load one or more panel CSVs sharing a column grid.

    Rows with a blank, non-numeric, negative or non-finite cell are dropped
    with a warning, as are dates in ``exclude``.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    exclude = set(exclude or ())
    header = None
    records: dict[dt.date, np.ndarray] = {}
    for path in map(Path, paths):
        hdr, rows = _read_one(path)
        if hdr[0] != date_column:
            raise SchemaError(f"{path}: first column must be {date_column!r}, got {hdr[0]!r}")
        if header is None:
            header = hdr
        elif hdr != header:
            raise SchemaError(f"{path}: column grid differs from {paths[0]}")
        for lineno, row in enumerate(rows, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                day = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                log.warning("%s:%d: unparseable date %r, row dropped", path, lineno, row[0])
                continue
            if day in exclude:
                log.info("%s: excluded date %s", path, day)
                continue
            cells = row[1:]
            vals = _parse_cells(cells, len(header) - 1)
            if vals is None:
                log.warning("%s:%d: day %s has missing or invalid cells, dropped", path, lineno, day)
                continue
            if day in records:
                log.warning("%s:%d: duplicate date %s ignored", path, lineno, day)
                continue
            records[day] = vals
    if header is None or not records:
        raise NoDataError("no usable days in input")
    labels = header[1:]
    if not labels:
        raise SchemaError("no interval columns in header")
    times = np.array([parse_clock(lb) for lb in labels])
    if np.any(np.diff(times) <= 0):
        raise SchemaError("interval labels must be strictly increasing")
    steps = np.round(np.diff(times) * 60).astype(int)
    if steps.size and np.any(steps != steps[0]):
        raise SchemaError("interval labels must be equally spaced")
    interval = int(steps[0]) if steps.size else 1
    dates = sorted(records)
    return CurvePanel.from_arrays(dates, times, [records[d] for d in dates], interval, labels)


def _parse_cells(cells: Sequence[str], expected: int) -> np.ndarray | None:
    if len(cells) != expected:
        return None
    out = np.empty(expected)
    for i, c in enumerate(cells):
        try:
            v = float(c)
        except ValueError:
            return None
        if not math.isfinite(v) or v < 0:
            return None
        out[i] = v
    return out


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def emit_csv(panel: CurvePanel, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", *panel.labels])
        for d in panel.days:
            writer.writerow([d.date.isoformat(), *(_fmt(v) for v in d.sample.values)])
