"""Plain-text model files.

Layout, one item per line, numbers written with 17 significant digits so a
round trip is exact::

    CURVECAST-MODEL 1
    order 4
    knots <n> v1 v2 ...
    mu <N> ...
    A <N> <p> row-major values...
    L <p> ...
    B <N> <q> row-major values...
    Sigma <q> ...
    sigma2 <value>

Blank lines and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import SchemaError
from .estimation import CurveModel
from .splines import SplineSpace

MAGIC = "CURVECAST-MODEL"
VERSION = 1


def _fmt(values) -> str:
    return " ".join(format(float(v), ".17g") for v in np.ravel(values))


def dumps(model: CurveModel) -> str:
    n, p, q = model.space.dim, model.p, model.q
    lines = [
        f"{MAGIC} {VERSION}",
        f"order {model.space.order}",
        f"knots {model.space.knots.size} {_fmt(model.space.knots)}",
        f"mu {n} {_fmt(model.mu)}",
        f"A {n} {p} {_fmt(model.A)}".rstrip(),
        f"L {p} {_fmt(model.L_diag)}".rstrip(),
        f"B {n} {q} {_fmt(model.B)}".rstrip(),
        f"Sigma {q} {_fmt(model.Sigma_diag)}".rstrip(),
        f"sigma2 {_fmt([model.sigma2])}",
    ]
    return "\n".join(lines) + "\n"


def save_model(model: CurveModel, path: str | Path) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8")


def _vector(fields: dict, key: str) -> np.ndarray:
    tokens = fields[key]
    n = int(tokens[0])
    vals = np.array([float(x) for x in tokens[1:]])
    if vals.size != n:
        raise SchemaError(f"{key}: declared {n} values, found {vals.size}")
    return vals


def _matrix(fields: dict, key: str) -> np.ndarray:
    tokens = fields[key]
    rows, cols = int(tokens[0]), int(tokens[1])
    vals = np.array([float(x) for x in tokens[2:]])
    if vals.size != rows * cols:
        raise SchemaError(f"{key}: declared {rows}x{cols}, found {vals.size} values")
    return vals.reshape(rows, cols)


def loads(text: str) -> CurveModel:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise SchemaError("empty model file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise SchemaError(f"not a model file (header {lines[0]!r})")
    if int(head[1]) != VERSION:
        raise SchemaError(f"unsupported model file version {head[1]}")
    fields = {}
    for ln in lines[1:]:
        key, *rest = ln.split()
        fields[key] = rest
    required = ("order", "knots", "mu", "A", "L", "B", "Sigma", "sigma2")
    missing = [k for k in required if k not in fields]
    if missing:
        raise SchemaError(f"model file lacks {', '.join(missing)}")
    try:
        space = SplineSpace.from_knots(_vector(fields, "knots"), int(fields["order"][0]))
        return CurveModel(
            space=space,
            mu=_vector(fields, "mu"),
            A=_matrix(fields, "A"),
            L_diag=_vector(fields, "L"),
            B=_matrix(fields, "B"),
            Sigma_diag=_vector(fields, "Sigma"),
            sigma2=float(fields["sigma2"][0]),
        )
    except (ValueError, IndexError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"malformed model file: {exc}") from exc


def load_model(path: str | Path) -> CurveModel:
    return loads(Path(path).read_text(encoding="utf-8"))
