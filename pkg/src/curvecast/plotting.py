"""PNG figures written next to the delimited report files."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .data import CurvePanel  # noqa: E402
from .harness import EvalReport  # noqa: E402
from .predictor import Prediction  # noqa: E402


def plot_day(report: EvalReport, index: int, path: str | Path) -> Path:
    """Truth, forecast and band (if any) for one test day."""
    d = report.days[index]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    if d.lower is not None:
        ax.fill_between(d.times, d.lower, d.upper, color="tab:blue", alpha=0.2, label="band")
    ax.plot(d.times, d.truth, ".", color="0.3", ms=3, label="observed")
    ax.plot(d.times, d.forecast, color="tab:blue", label="forecast")
    ax.set_xlabel("hour of day")
    ax.set_ylabel("count")
    ax.set_title(f"{report.label} {d.date.isoformat()}")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_metrics(reports: Sequence[EvalReport], path: str | Path,
                 metrics: Sequence[str] = ("rmse", "width")) -> Path:
    """Box plots of per-day metrics, one panel per metric."""
    fig, axes = plt.subplots(1, len(metrics), figsize=(4 * len(metrics), 3.5), squeeze=False)
    for ax, m in zip(axes[0], metrics):
        data = [r.metric(m)[~np.isnan(r.metric(m))] for r in reports]
        if any(x.size for x in data):
            ax.boxplot(data)
            ax.set_xticks(range(1, len(reports) + 1), [r.label for r in reports])
        ax.set_title(m.upper())
        ax.tick_params(axis="x", labelrotation=30)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_prediction(pred: Prediction, path: str | Path, lower=None, upper=None,
                    observed: tuple | None = None, n_points: int = 200) -> Path:
    """Predicted continuation with optional band and observed points."""
    a, b = pred.space.domain
    t = np.linspace(a, b, n_points)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    if lower is not None and upper is not None:
        ax.fill_between(t, lower(t), upper(t), color="tab:orange", alpha=0.25, label="band")
    if observed is not None:
        ax.plot(observed[0], observed[1], ".", color="0.3", ms=3, label="observed")
    ax.plot(t, pred.mean(t), color="tab:orange", label="forecast")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_panel(panel: CurvePanel, path: str | Path, max_days: int = 50) -> Path:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for d in panel.days[:max_days]:
        ax.plot(d.sample.times, d.sample.values, lw=0.6, alpha=0.5)
    ax.set_xlabel("hour of day")
    ax.set_title(f"{min(len(panel), max_days)} of {len(panel)} days")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def write_report_figures(reports: Sequence[EvalReport], outdir: str | Path,
                         stem: str = "report") -> list[Path]:
    """Metric box plots plus the first day of each report."""
    outdir = Path(outdir)
    paths = []
    if not reports:
        return paths
    paths.append(plot_metrics(reports, outdir / f"{stem}_metrics.png"))
    for r in reports:
        if r.days:
            safe = r.label.replace("@", "_").replace(":", "")
            paths.append(plot_day(r, 0, outdir / f"{stem}_{safe}_day0.png"))
    return paths
