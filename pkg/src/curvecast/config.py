"""YAML run configuration with dotted-key overrides."""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any, Iterable

import yaml

from .forecasting import ForecastConfig
from .harness import ProtocolConfig

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "data": {"paths": [], "exclude": None},
    "model": {
        "order": 4,
        "intervals_per_break": 4,
        "n_spans": None,
        "p": None,
        "q": None,
        "threshold": 0.9,
        "method": "ridge",
        "sigma2": None,
        "sigma2_scale": 1.0,
        "convention": "g",
    },
    "protocol": {
        "training_mode": "same-weekday",
        "window_days": 20,
        "cuts": ["10:00", "12:00"],
        "eval_start": "12:00",
        "select": "none",
        "cv_folds": 10,
        "bands": "cv_global",
        "delta": 0.05,
        "K": 10,
        "n_sims": 20000,
        "baseline": True,
        "max_test_days": None,
    },
    "synth": {
        "kind": "callcenter",
        "n_days": 300,
        "start": "07:00",
        "end": "21:05",
        "interval_minutes": 5,
        "start_date": "2003-03-03",
        "n_basis": 12,
        "p": 2,
        "q": 2,
        "obs_noise_sd": 0.0,
        "level": 20.0,
        "model": None,
    },
}


class ConfigError(ValueError):
    """Unknown key or malformed value in a configuration."""


def _merge(base: dict, extra: dict, where: str = "") -> None:
    for key, value in extra.items():
        if key not in base:
            raise ConfigError(f"unknown configuration key {where + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where + key!r} must be a mapping")
            _merge(base[key], value, f"{where}{key}.")
        else:
            base[key] = value


def parse_override(item: str) -> tuple[list[str], Any]:
    """``"model.p=3"`` to ``(["model", "p"], 3)``; the value is read as YAML."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    return key.strip().split("."), yaml.safe_load(raw)


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        _merge(cfg, loaded)
    for item in overrides:
        keys, value = parse_override(item)
        nested: Any = value
        for k in reversed(keys):
            nested = {k: nested}
        _merge(cfg, nested)
    return cfg


def forecast_config(cfg: dict) -> ForecastConfig:
    try:
        return ForecastConfig(**cfg["model"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model section: {exc}") from exc


def protocol_config(cfg: dict, cut: str | None = None) -> ProtocolConfig:
    pr = cfg["protocol"]
    try:
        return ProtocolConfig(
            training_mode=pr["training_mode"],
            window_days=int(pr["window_days"]),
            cut_time=cut if cut is not None else pr["cuts"][0],
            eval_start=pr["eval_start"],
            forecast=forecast_config(cfg),
            select=pr["select"],
            cv_folds=int(pr["cv_folds"]),
            bands=pr["bands"],
            delta=float(pr["delta"]),
            K=int(pr["K"]),
            n_sims=int(pr["n_sims"]),
            seed=int(cfg["seed"]),
            max_test_days=pr["max_test_days"],
        )
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"protocol section: {exc}") from exc
