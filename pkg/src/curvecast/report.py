"""Tables and delimited output for evaluation reports."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence, TextIO

from .data import format_clock
from .harness import STATS, EvalReport

FORMATS = ("table", "csv", "plotdata")
METRICS = ("rmse", "ape", "cover", "width")
_ROW_NAMES = {"min": "Minimum", "q1": "Q1", "median": "Median", "mean": "Mean",
              "q3": "Q3", "max": "Maximum"}


def _num(v: float) -> str:
    return "NA" if v != v else f"{v:.2f}"


def render_table(reports: Sequence[EvalReport], metrics: Sequence[str] = METRICS) -> str:
    """One block per metric: summary statistics down, methods across."""
    if not reports:
        return ""
    labels = [r.label for r in reports]
    width = max(10, *(len(lb) for lb in labels)) + 2
    out = []
    for m in metrics:
        summaries = [r.summary(m) for r in reports]
        if all(s["mean"] != s["mean"] for s in summaries):
            continue
        out.append(m.upper())
        out.append(f"{'':<9}" + "".join(f"{lb:>{width}}" for lb in labels))
        for key in STATS:
            out.append(f"{_ROW_NAMES[key]:<9}" + "".join(f"{_num(s[key]):>{width}}" for s in summaries))
        excluded = sum(len(r.excluded_from_ape) for r in reports)
        if m == "ape" and excluded:
            out.append(f"({excluded} day(s) with zero counts excluded from APE)")
        out.append("")
    return "\n".join(out)


def _write_summary_csv(reports: Sequence[EvalReport], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["label", "metric", *STATS, "n_days"])
    for r in reports:
        for m in METRICS:
            s = r.summary(m)
            w.writerow([r.label, m, *(format(s[k], ".17g") for k in STATS), len(r.days)])


def _write_plotdata(reports: Sequence[EvalReport], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["label", "date", "time", "truth", "forecast", "lower", "upper"])
    for r in reports:
        for d in r.days:
            for i, t in enumerate(d.times):
                lo = "" if d.lower is None else format(d.lower[i], ".17g")
                hi = "" if d.upper is None else format(d.upper[i], ".17g")
                w.writerow([r.label, d.date.isoformat(), format_clock(t),
                            format(d.truth[i], ".17g"), format(d.forecast[i], ".17g"), lo, hi])


def emit_report(reports: Sequence[EvalReport], fmt: str = "table",
                out: str | Path | TextIO | None = None) -> str:
    """Render ``reports`` as ``table``, summary ``csv`` or per-interval ``plotdata``.

    Writes to ``out`` (a path or open text stream) when given and returns
    the rendered text either way.
    """
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    buf = io.StringIO()
    if fmt == "table":
        buf.write(render_table(reports))
    elif fmt == "csv":
        _write_summary_csv(reports, buf)
    else:
        _write_plotdata(reports, buf)
    text = buf.getvalue()
    if out is None:
        return text
    if isinstance(out, (str, Path)):
        Path(out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    return text
