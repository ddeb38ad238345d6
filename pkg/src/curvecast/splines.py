"""Clamped B-spline spaces: basis evaluation, knot insertion, restriction.

All polynomial machinery used by the rest of the package lives here. Knot
vectors are clamped (end knots repeated ``order`` times) so that every space
is defined on a closed interval and restriction to a sub-interval is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np

from .errors import DomainError, InvalidInputError, InvalidKnotError, InvalidNodesError

Side = Literal["left", "right"]

# relative slack allowed when a point sits a rounding error outside the domain
_DOMAIN_SLACK = 1e-12


class KnotVector:
    """Nondecreasing, clamped knot sequence of a given spline order.

    Parameters
    ----------
    knots : array_like
        Knot values. First and last values must each be repeated exactly
        ``order`` times; no interior value may repeat more than ``order`` times.
    order : int
        Spline order ``k`` (polynomial degree ``k - 1``).
    """

    __slots__ = ("knots", "order", "_key")

    def __init__(self, knots: Sequence[float] | np.ndarray, order: int):
        knots = np.array(knots, dtype=float)
        order = int(order)
        if order < 1:
            raise InvalidKnotError(f"order must be >= 1, got {order}")
        if knots.ndim != 1 or not np.all(np.isfinite(knots)):
            raise InvalidKnotError("knots must be a finite 1-d sequence")
        if np.any(np.diff(knots) < 0):
            raise InvalidKnotError("knots must be nondecreasing")
        if knots.size - order < order:
            raise InvalidKnotError(
                f"need at least {2 * order} knots for order {order}, got {knots.size}"
            )
        values, counts = np.unique(knots, return_counts=True)
        if values.size < 2:
            raise InvalidKnotError("knot vector spans an empty interval")
        if counts.max() > order:
            raise InvalidKnotError(
                f"knot {values[counts.argmax()]!r} has multiplicity {counts.max()} > order {order}"
            )
        if counts[0] != order or counts[-1] != order:
            raise InvalidKnotError("boundary knots must have multiplicity equal to the order")
        knots.flags.writeable = False
        self.knots = knots
        self.order = order
        self._key = (order, tuple(knots.tolist()))

    @property
    def n_basis(self) -> int:
        return self.knots.size - self.order

    @property
    def breaks(self) -> np.ndarray:
        """Distinct knot values in increasing order."""
        return np.unique(self.knots)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def multiplicity(self, value: float) -> int:
        return int(np.count_nonzero(self.knots == value))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnotVector):
            return NotImplemented
        return self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"KnotVector(order={self.order}, knots={self.knots.tolist()})"


@dataclass(frozen=True)
class SplineSpace:
    """Order-k B-spline space over a clamped knot vector."""

    knot_vector: KnotVector

    @classmethod
    def from_knots(cls, knots, order: int) -> "SplineSpace":
        return cls(KnotVector(knots, order))

    @classmethod
    def from_breaks(cls, breaks, order: int) -> "SplineSpace":
        """Clamped space with simple interior knots at ``breaks[1:-1]``."""
        breaks = np.asarray(breaks, dtype=float)
        knots = np.concatenate([[breaks[0]] * order, breaks[1:-1], [breaks[-1]] * order])
        return cls(KnotVector(knots, order))

    @classmethod
    def uniform(cls, start: float, end: float, n_spans: int, order: int) -> "SplineSpace":
        if n_spans < 1:
            raise InvalidKnotError("n_spans must be >= 1")
        return cls.from_breaks(np.linspace(start, end, n_spans + 1), order)

    @property
    def knots(self) -> np.ndarray:
        return self.knot_vector.knots

    @property
    def order(self) -> int:
        return self.knot_vector.order

    @property
    def dim(self) -> int:
        return self.knot_vector.n_basis

    @property
    def domain(self) -> tuple[float, float]:
        return self.knot_vector.domain

    @property
    def breaks(self) -> np.ndarray:
        return self.knot_vector.breaks

    def contains(self, t) -> np.ndarray:
        a, b = self.domain
        slack = _DOMAIN_SLACK * (b - a)
        t = np.asarray(t, dtype=float)
        return (t >= a - slack) & (t <= b + slack)


@dataclass(frozen=True)
class SplineFunction:
    """A function ``t -> b(t)' c`` in a spline space."""

    space: SplineSpace
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float)
        if c.ndim != 1 or c.size != self.space.dim:
            raise InvalidInputError(
                f"expected {self.space.dim} coefficients, got shape {c.shape}"
            )
        c.flags.writeable = False
        object.__setattr__(self, "coefficients", c)

    def __call__(self, t):
        return self.evaluate(t)

    def evaluate(self, t, nu: int = 0):
        """Value (``nu = 0``) or ``nu``-th derivative at ``t``."""
        scalar = np.ndim(t) == 0
        t = _checked_points(self.space, t)
        if nu == 0:
            out = basis_matrix(self.space, t) @ self.coefficients
        else:
            out = _eval_derivative_raw(self.space.knots, self.order, self.coefficients, t, nu)
        return float(out[0]) if scalar else out

    @property
    def order(self) -> int:
        return self.space.order


# ---------------------------------------------------------------------------
# raw kernels (no validation)


def _find_span(knots: np.ndarray, k: int, t: np.ndarray) -> np.ndarray:
    n = knots.size - k
    span = np.searchsorted(knots, t, side="right") - 1
    return np.clip(span, k - 1, n - 1)


def _basis_funs(knots: np.ndarray, k: int, t: np.ndarray, span: np.ndarray) -> np.ndarray:
    """Nonzero basis values at ``t``: column r belongs to basis ``span - k + 1 + r``."""
    m = t.size
    vals = np.zeros((m, k))
    vals[:, 0] = 1.0
    left = np.zeros((m, k))
    right = np.zeros((m, k))
    for j in range(1, k):
        left[:, j] = t - knots[span + 1 - j]
        right[:, j] = knots[span + j] - t
        saved = np.zeros(m)
        for r in range(j):
            temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved
    return vals


def _basis_matrix_raw(knots: np.ndarray, k: int, t: np.ndarray) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n = knots.size - k
    span = _find_span(knots, k, t)
    local = _basis_funs(knots, k, t, span)
    out = np.zeros((t.size, n))
    rows = np.arange(t.size)[:, None]
    cols = span[:, None] - k + 1 + np.arange(k)[None, :]
    out[rows, cols] = local
    return out


def _derivative_coefficients(knots: np.ndarray, k: int, coefs: np.ndarray):
    """Knots and coefficients of the derivative, an order ``k - 1`` spline."""
    denom = knots[k:-1] - knots[1 : coefs.shape[0]]
    diff = np.diff(coefs, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(denom > 0, (k - 1) / np.where(denom > 0, denom, 1.0), 0.0)
    return knots[1:-1], diff * scale.reshape((-1,) + (1,) * (coefs.ndim - 1))


def _eval_derivative_raw(knots, k, coefs, t, nu):
    if nu >= k:
        return np.zeros(np.size(t))
    for _ in range(nu):
        knots, coefs = _derivative_coefficients(knots, k, coefs)
        k -= 1
    return _basis_matrix_raw(knots, k, t) @ coefs


def _checked_points(space: SplineSpace, t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if not np.all(space.contains(t)):
        a, b = space.domain
        bad = t[~space.contains(t)]
        raise DomainError(f"points {bad[:3].tolist()} outside domain [{a}, {b}]")
    a, b = space.domain
    return np.clip(t, a, b)


# ---------------------------------------------------------------------------
# public operations


def eval_basis(space: SplineSpace, t: float) -> np.ndarray:
    """All ``N`` basis values at a single point ``t``.

    The right endpoint is evaluated as a left limit, so the basis is defined
    on the closed domain and sums to one everywhere on it.
    """
    t = _checked_points(space, t)
    if t.size != 1:
        raise InvalidInputError("eval_basis takes a scalar; use basis_matrix for arrays")
    return _basis_matrix_raw(space.knots, space.order, t)[0]


def basis_matrix(space: SplineSpace, t) -> np.ndarray:
    """Collocation matrix with shape ``(len(t), N)``."""
    t = _checked_points(space, t)
    return _basis_matrix_raw(space.knots, space.order, t)


def _insert_one(knots: np.ndarray, k: int, coefs: np.ndarray, u: float):
    # Boehm's single-knot insertion
    s = int(np.searchsorted(knots, u, side="right")) - 1
    p = k - 1
    new = np.empty((coefs.shape[0] + 1,) + coefs.shape[1:])
    new[: s - p + 1] = coefs[: s - p + 1]
    new[s + 1 :] = coefs[s:]
    for i in range(s - p + 1, s + 1):
        alpha = (u - knots[i]) / (knots[i + p] - knots[i])
        new[i] = alpha * coefs[i] + (1.0 - alpha) * coefs[i - 1]
    return np.insert(knots, s + 1, u), new


def _insert_many(knots: np.ndarray, k: int, coefs: np.ndarray, new_knots) -> tuple:
    a, b = knots[0], knots[-1]
    new_knots = np.sort(np.asarray(new_knots, dtype=float).ravel())
    for u in new_knots:
        if not a < u < b:
            raise InvalidKnotError(f"inserted knot {u} not strictly inside ({a}, {b})")
        if np.count_nonzero(knots == u) + 1 > k:
            raise InvalidKnotError(f"inserting {u} would exceed multiplicity {k}")
        knots, coefs = _insert_one(knots, k, coefs, u)
    return knots, coefs


def insert_knots(f: SplineFunction, new_knots) -> SplineFunction:
    """Represent ``f`` exactly on a refined knot vector."""
    knots, coefs = _insert_many(f.space.knots, f.order, f.coefficients, new_knots)
    return SplineFunction(SplineSpace.from_knots(knots, f.order), coefs)


def _restrict_raw(knots: np.ndarray, k: int, coefs: np.ndarray, cut: float, side: Side):
    a, b = knots[0], knots[-1]
    if not a < cut < b:
        raise DomainError(f"cut {cut} must lie strictly inside ({a}, {b})")
    if side not in ("left", "right"):
        raise InvalidInputError(f"side must be 'left' or 'right', got {side!r}")
    missing = k - int(np.count_nonzero(knots == cut))
    knots, coefs = _insert_many(knots, k, coefs, [cut] * missing)
    j0 = int(np.searchsorted(knots, cut, side="left"))
    if side == "left":
        return knots[: j0 + k], coefs[:j0]
    return knots[j0:], coefs[j0:]


def restrict(f: SplineFunction, cut: float, side: Side) -> SplineFunction:
    """Restriction of ``f`` to ``[a, cut]`` (left) or ``[cut, b]`` (right).

    Knots are inserted at ``cut`` up to full multiplicity and the knot and
    coefficient sequences are truncated to the requested side.
    """
    knots, coefs = _restrict_raw(f.space.knots, f.order, f.coefficients, float(cut), side)
    return SplineFunction(SplineSpace.from_knots(knots, f.order), coefs)


def restricted_space(space: SplineSpace, cut: float, side: Side) -> SplineSpace:
    knots, _ = _restrict_raw(space.knots, space.order, np.zeros(space.dim), float(cut), side)
    return SplineSpace.from_knots(knots, space.order)


@lru_cache(maxsize=256)
def _restriction_matrix_cached(kv: KnotVector, cut: float, side: str) -> np.ndarray:
    _, mat = _restrict_raw(kv.knots, kv.order, np.eye(kv.n_basis), cut, side)
    mat = np.ascontiguousarray(mat)
    mat.flags.writeable = False
    return mat


def restriction_matrix(space: SplineSpace, cut: float, side: Side) -> np.ndarray:
    """Linear map from full-space to sub-segment coefficients, shape ``(N_i, N)``."""
    return _restriction_matrix_cached(space.knot_vector, float(cut), side)


@lru_cache(maxsize=256)
def _gram_cached(kv: KnotVector) -> np.ndarray:
    k = kv.order
    nodes, weights = np.polynomial.legendre.leggauss(k)
    breaks = kv.breaks
    lo, hi = breaks[:-1], breaks[1:]
    half = 0.5 * (hi - lo)
    pts = (0.5 * (hi + lo))[:, None] + half[:, None] * nodes[None, :]
    wts = half[:, None] * weights[None, :]
    # evaluate each span's nodes with that span's polynomial piece
    span = np.searchsorted(kv.knots, lo, side="right") - 1
    span = np.repeat(np.clip(span, k - 1, kv.n_basis - 1), k)
    pts = pts.ravel()
    local = _basis_funs(kv.knots, k, pts, span)
    bmat = np.zeros((pts.size, kv.n_basis))
    rows = np.arange(pts.size)[:, None]
    bmat[rows, span[:, None] - k + 1 + np.arange(k)[None, :]] = local
    gram = bmat.T @ (bmat * wts.ravel()[:, None])
    gram = 0.5 * (gram + gram.T)
    gram.flags.writeable = False
    return gram


def gram_matrix(space: SplineSpace) -> np.ndarray:
    """``W = integral of b(s) b(s)' ds`` over the domain, exact up to rounding.

    Uses ``k``-point Gauss-Legendre quadrature on every knot span, which is
    exact for the degree ``2k - 2`` products of basis functions.
    """
    return _gram_cached(space.knot_vector)


def lagrange_weights(nodes, t) -> np.ndarray:
    """Lagrange basis polynomials of ``nodes`` evaluated at ``t``.

    Returns shape ``(k,)`` for scalar ``t`` and ``(len(t), k)`` otherwise.
    """
    nodes = np.asarray(nodes, dtype=float).ravel()
    if np.unique(nodes).size != nodes.size:
        raise InvalidNodesError("interpolation nodes must be pairwise distinct")
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    k = nodes.size
    out = np.ones((t.size, k))
    for j in range(k):
        for r in range(k):
            if r != j:
                out[:, j] *= (t - nodes[r]) / (nodes[j] - nodes[r])
    return out[0] if scalar else out


def derivative_jumps(left: SplineFunction, right: SplineFunction, at: float, max_order: int):
    """``|right^(nu)(at) - left^(nu)(at)|`` for ``nu = 0..max_order``."""
    return np.array(
        [abs(right.evaluate(at, nu) - left.evaluate(at, nu)) for nu in range(max_order + 1)]
    )
