"""Continuation forecasts of partially observed curves in a B-spline model."""

from .bands import (
    Band,
    BandGrid,
    build_grid,
    critical_value_global,
    critical_value_local,
    cv_bands,
    envelope,
    inequality_bound,
)
from .data import CurvePanel, emit_csv, ingest_csv
from .estimation import CurveModel, CurveSample, estimate_model, functional_pca
from .forecasting import ForecastConfig, Forecaster
from .harness import EvalReport, ProtocolConfig, run_protocol
from .modelio import load_model, save_model
from .predictor import Prediction, SegmentedModel, concatenate, predict, predict_ridge, segment
from .splines import SplineFunction, SplineSpace

__version__ = "0.1.0"

__all__ = [
    "Band",
    "BandGrid",
    "CurveModel",
    "CurvePanel",
    "CurveSample",
    "EvalReport",
    "ForecastConfig",
    "Forecaster",
    "Prediction",
    "ProtocolConfig",
    "SegmentedModel",
    "SplineFunction",
    "SplineSpace",
    "build_grid",
    "concatenate",
    "critical_value_global",
    "critical_value_local",
    "cv_bands",
    "emit_csv",
    "envelope",
    "estimate_model",
    "functional_pca",
    "inequality_bound",
    "ingest_csv",
    "load_model",
    "predict",
    "predict_ridge",
    "run_protocol",
    "save_model",
    "segment",
]
