"""Command-line entry point: ``curvecast {synth,fit,forecast,bands,evaluate}``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import logging
import sys
from pathlib import Path

import numpy as np

from . import errors
from .bands import build_grid, critical_values, cv_bands, envelope
from .config import ConfigError, forecast_config, load_config, protocol_config
from .data import CurvePanel, emit_csv, format_clock, ingest_csv, parse_clock, read_exclusions
from .estimation import fit_coefficients
from .forecasting import Forecaster, build_space
from .harness import compare, training_indices
from .modelio import load_model, save_model

log = logging.getLogger("curvecast")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

DATA_ERRORS = (
    errors.SchemaError,
    errors.NoDataError,
    errors.InvalidKnotError,
    errors.InvalidInputError,
    errors.DomainError,
    errors.InvalidNodesError,
    OSError,
)
NUMERIC_ERRORS = (
    errors.UnderdeterminedFitError,
    errors.DegenerateModelError,
    errors.InfeasibleFoldError,
    errors.UnreliableEstimateError,
    errors.InvalidMatrixError,
    errors.InvalidVarianceError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration entry, e.g. model.p=3 (repeatable)")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", nargs="+", help="panel CSV file(s)")
    p.add_argument("--exclude", help="file of ISO dates to drop")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="curvecast", description="Continuation forecasts of intraday curves.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic panel CSV")
    _common(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--days", type=int, help="number of days")
    p.add_argument("--kind", choices=("callcenter", "model"))
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("fit", help="estimate a model from a panel and save it")
    _common(p)
    _data_args(p)
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--weekday", help="only use days with this label, e.g. Mon")
    p.add_argument("--last", type=int, help="only use the last N (matching) days")

    p = sub.add_parser("forecast", help="forecast the rest of one day")
    _common(p)
    _data_args(p)
    p.add_argument("--model", required=True, help="model file from 'fit'")
    p.add_argument("--date", required=True, help="ISO date of the day to forecast")
    p.add_argument("--cut", required=True, help="cut clock time HH:MM")
    p.add_argument("--band", choices=("none", "global", "local"), default="global")
    p.add_argument("--out", help="output CSV (default stdout); a PNG is written alongside")

    p = sub.add_parser("bands", help="cross-validated and model band constants for one day")
    _common(p)
    _data_args(p)
    p.add_argument("--date", required=True)
    p.add_argument("--cut", required=True)
    p.add_argument("--out", help="output CSV (default stdout); a PNG is written alongside")

    p = sub.add_parser("evaluate", help="run the rolling evaluation protocol")
    _common(p)
    _data_args(p)
    p.add_argument("--cuts", nargs="+", help="cut clock times")
    p.add_argument("--method", choices=("blup", "ridge", "mean-baseline"))
    p.add_argument("--format", choices=("table", "csv", "plotdata"), default="table")
    p.add_argument("--out-dir", help="directory for summary.csv, plotdata.csv and figures")
    p.add_argument("--max-days", type=int, help="limit the number of test days")
    return parser


def _config(args) -> dict:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "method", None):
        overrides.append(f"model.method={args.method}")
    if getattr(args, "max_days", None):
        overrides.append(f"protocol.max_test_days={args.max_days}")
    cfg = load_config(args.config, overrides)
    if getattr(args, "data", None):
        cfg["data"]["paths"] = args.data
    if getattr(args, "exclude", None):
        cfg["data"]["exclude"] = args.exclude
    return cfg


def _panel(cfg: dict) -> CurvePanel:
    paths = cfg["data"]["paths"]
    if not paths:
        raise UsageError("no input data: pass --data or set data.paths")
    exclude = read_exclusions(cfg["data"]["exclude"]) if cfg["data"]["exclude"] else None
    return ingest_csv(paths, exclude)


def _day_index(panel: CurvePanel, date: str) -> int:
    try:
        want = dt.date.fromisoformat(date)
    except ValueError as exc:
        raise UsageError(f"bad date {date!r}") from exc
    for i, d in enumerate(panel.days):
        if d.date == want:
            return i
    raise errors.NoDataError(f"date {date} not in the panel")


def _write_rows(header, rows, out: str | None) -> None:
    fh = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if out:
            fh.close()


def cmd_synth(args, cfg) -> int:
    from .synth import callcenter_panel, random_spec, sample_curves, SyntheticSpec

    sy = cfg["synth"]
    kind = args.kind or sy["kind"]
    n_days = args.days or int(sy["n_days"])
    seed = int(cfg["seed"])
    start_date = dt.date.fromisoformat(str(sy["start_date"]))
    if kind == "callcenter":
        panel = callcenter_panel(n_days, seed, sy["start"], sy["end"], int(sy["interval_minutes"]),
                                 start_date)
    else:
        t0, t1 = parse_clock(sy["start"]), parse_clock(sy["end"])
        step = int(sy["interval_minutes"]) / 60.0
        times = np.arange(t0, t1 + 1e-9, step)
        if sy["model"]:
            spec = SyntheticSpec.from_model(load_model(sy["model"]), float(sy["obs_noise_sd"]), seed)
        else:
            spec = random_spec(seed, int(sy["n_basis"]), int(sy["p"]), int(sy["q"]),
                               domain=(t0, t1), obs_noise_sd=float(sy["obs_noise_sd"]),
                               level=float(sy["level"]))
        _, panel = sample_curves(spec, n_days, times, seed=seed, start_date=start_date,
                                 interval_minutes=int(sy["interval_minutes"]))
    emit_csv(panel, args.out)
    if not args.no_plot:
        from .plotting import plot_panel

        plot_panel(panel, Path(args.out).with_suffix(".png"))
    log.info("wrote %d days to %s", len(panel), args.out)
    return EXIT_OK


def cmd_fit(args, cfg) -> int:
    panel = _panel(cfg)
    idx = [i for i, d in enumerate(panel.days) if not args.weekday or d.weekday == args.weekday]
    if args.last:
        idx = idx[-args.last:]
    if len(idx) < 2:
        raise errors.NoDataError("need at least two days to fit a model")
    fcfg = forecast_config(cfg)
    space = build_space(panel.times, fcfg)
    samples = [panel.days[i].sample for i in idx]
    fc = Forecaster.fit_coefficients(fit_coefficients(samples, space), space, fcfg)
    save_model(fc.model, args.model)
    m = fc.model
    print(f"fitted {len(idx)} days: N={m.space.dim} p={m.p} q={m.q} sigma2={m.sigma2:.6g}")
    return EXIT_OK


def _prediction_rows(pred, t, band=None):
    mean = pred.mean(t)
    lo = band.lower(t) if band is not None else np.full(t.size, np.nan)
    hi = band.upper(t) if band is not None else np.full(t.size, np.nan)
    return [[format_clock(x), format(m, ".17g"), format(a, ".17g"), format(b, ".17g")]
            for x, m, a, b in zip(t, mean, lo, hi)]


def cmd_forecast(args, cfg) -> int:
    model = load_model(args.model)
    panel = _panel(cfg)
    j = _day_index(panel, args.date)
    fcfg = forecast_config(cfg)
    fc = Forecaster(model, fcfg)
    cut = parse_clock(args.cut)
    pred = fc.forecast(panel.days[j].sample, cut)
    band = None
    delta = float(cfg["protocol"]["delta"])
    if args.band != "none":
        grid = build_grid(pred.space)
        zg, per_span = critical_values(pred, grid, delta, int(cfg["protocol"]["n_sims"]),
                                       int(cfg["seed"]))
        z = zg if args.band == "global" else float(per_span.max())
        band = envelope(grid, pred, z, args.band, 1 - delta)
    t = panel.times[panel.times >= cut - 1e-9]
    _write_rows(["time", "forecast", "lower", "upper"], _prediction_rows(pred, t, band), args.out)
    if args.out:
        from .plotting import plot_prediction

        s = panel.days[j].sample
        plot_prediction(pred, Path(args.out).with_suffix(".png"),
                        band.lower if band else None, band.upper if band else None,
                        observed=(s.times, s.values))
    return EXIT_OK


def cmd_bands(args, cfg) -> int:
    panel = _panel(cfg)
    j = _day_index(panel, args.date)
    pcfg = protocol_config(cfg, args.cut)
    train = training_indices(panel, j, pcfg.training_mode, pcfg.window_days)
    if len(train) < 2:
        raise errors.NoDataError(f"{args.date} has fewer than two training days")
    fcfg = pcfg.forecast
    space = build_space(panel.times, fcfg)
    samples = [panel.days[i].sample for i in train]
    cut = pcfg.cut_hours
    fc = Forecaster.fit_coefficients(fit_coefficients(samples, space), space, fcfg)
    pred = fc.forecast(panel.days[j].sample, cut)
    grid = build_grid(pred.space)
    zg, per_span = critical_values(pred, grid, pcfg.delta, pcfg.n_sims, pcfg.seed)
    cvb = cv_bands(samples, space, fcfg, cut, min(pcfg.K, len(samples)), pcfg.delta,
                   target="observations", eval_start=pcfg.eval_start_hours)
    print(f"# z_global={zg:.6g} z_local={per_span.max():.6g} "
          f"C_global={cvb.c_global:.6g} C_local={cvb.c_local:.6g}", file=sys.stderr)
    bands = {
        "global": envelope(grid, pred, zg, "global", 1 - pcfg.delta),
        "local": envelope(grid, pred, float(per_span.max()), "local", 1 - pcfg.delta),
        "cv_global": cvb.band(pred, "cv_global"),
        "cv_local": cvb.band(pred, "cv_local"),
    }
    t = panel.times[panel.times >= cut - 1e-9]
    header = ["time", "forecast"] + [f"{k}_{s}" for k in bands for s in ("lower", "upper")]
    mean = pred.mean(t)
    cols = [mean] + [f(t) for b in bands.values() for f in (b.lower, b.upper)]
    rows = [[format_clock(x)] + [format(c[i], ".17g") for c in cols] for i, x in enumerate(t)]
    _write_rows(header, rows, args.out)
    if args.out:
        from .plotting import plot_prediction

        s = panel.days[j].sample
        plot_prediction(pred, Path(args.out).with_suffix(".png"), bands["cv_global"].lower,
                        bands["cv_global"].upper, observed=(s.times, s.values))
    return EXIT_OK


def cmd_evaluate(args, cfg) -> int:
    from .report import emit_report

    panel = _panel(cfg)
    cuts = args.cuts or cfg["protocol"]["cuts"]
    pcfg = protocol_config(cfg, cuts[0] if cuts else None)
    baseline = bool(cfg["protocol"]["baseline"]) and pcfg.forecast.method != "mean-baseline"
    reports = compare(panel, pcfg, cuts=cuts, baseline=baseline)
    sys.stdout.write(emit_report(reports, args.format))
    if args.out_dir:
        from .plotting import write_report_figures

        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        emit_report(reports, "csv", out / "summary.csv")
        emit_report(reports, "plotdata", out / "plotdata.csv")
        emit_report(reports, "table", out / "table.txt")
        write_report_figures(reports, out)
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "fit": cmd_fit, "forecast": cmd_forecast,
            "bands": cmd_bands, "evaluate": cmd_evaluate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"curvecast: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"curvecast: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DATA_ERRORS as exc:
        print(f"curvecast: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
