"""Finite probability measures and the KL-divergence family.

All information quantities are in nats. Zero-mass atoms contribute nothing
to sums of the form ``p ln(p / q)`` (the ``0 ln 0 = 0`` convention), and a
divergence that is not defined because of missing support is returned as
``math.inf`` rather than raised.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import BudgetError, DimensionError, MarginalMismatchError, OTKLError, SupportError

ArrayLike = Union[Sequence[float], np.ndarray]

MASS_TOL = 1e-12
MARGINAL_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def _normalize(weights, ndim: int, what: str) -> tuple[np.ndarray, float]:
    a = np.asarray(weights, dtype=float)
    if a.ndim != ndim:
        raise DimensionError(f"{what} must be {ndim}-dimensional, got shape {a.shape}")
    if a.size == 0:
        raise DimensionError(f"{what} must have at least one atom")
    if not np.all(np.isfinite(a)):
        raise OTKLError(f"{what} has non-finite entries")
    if np.any(a < 0):
        raise OTKLError(f"{what} has negative entries")
    total = float(a.sum())
    if total <= 0:
        raise OTKLError(f"{what} has zero total mass")
    return _frozen(a / total), total


@dataclass(frozen=True, eq=False)
class Distribution:
    """Probability vector on ``{0, ..., n-1}``.

    Unnormalized non-negative weights are accepted and rescaled; the
    original total is kept in ``total``. Exact zeros stay zero.
    """

    mass: np.ndarray
    total: float = field(default=1.0, init=False)

    def __post_init__(self):
        mass, total = _normalize(self.mass, 1, "distribution")
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "total", total)

    @property
    def space_size(self) -> int:
        return self.mass.shape[0]

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(np.ones(n))

    @classmethod
    def point_mass(cls, n: int, atom: int) -> "Distribution":
        m = np.zeros(n)
        m[atom] = 1.0
        return cls(m)

    def __len__(self):
        return self.space_size

    def __array__(self, dtype=None, copy=None):
        return self.mass if dtype is None else self.mass.astype(dtype)

    def __repr__(self):
        return f"Distribution({np.array2string(self.mass, precision=6)})"


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability measure on ``X x Y`` stored as a ``(|X|, |Y|)`` matrix."""

    mass: np.ndarray
    total: float = field(default=1.0, init=False)

    def __post_init__(self):
        mass, total = _normalize(self.mass, 2, "joint distribution")
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "total", total)

    @property
    def rows(self) -> int:
        return self.mass.shape[0]

    @property
    def cols(self) -> int:
        return self.mass.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.mass.shape

    def row_marginal(self) -> Distribution:
        return Distribution(self.mass.sum(axis=1))

    def col_marginal(self) -> Distribution:
        return Distribution(self.mass.sum(axis=0))

    def expect(self, values) -> float:
        """Expectation of a function on ``X x Y`` given as a matrix."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.shape:
            raise DimensionError(f"values shape {values.shape} != joint shape {self.shape}")
        nz = self.mass > 0
        return float(np.sum(self.mass[nz] * values[nz]))

    def __array__(self, dtype=None, copy=None):
        return self.mass if dtype is None else self.mass.astype(dtype)

    def __repr__(self):
        return f"JointDistribution(\n{np.array2string(self.mass, precision=6)})"


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Non-negative cost ``c(x, y)`` with structural flags computed on construction."""

    cost: np.ndarray
    is_metric: bool = field(default=False, init=False)
    is_translation_invariant: bool = field(default=False, init=False)

    def __post_init__(self):
        c = np.asarray(self.cost, dtype=float)
        if c.ndim != 2 or c.size == 0:
            raise DimensionError(f"cost must be a non-empty matrix, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise OTKLError("cost has non-finite entries")
        if np.any(c < 0):
            raise OTKLError("cost has negative entries")
        object.__setattr__(self, "cost", _frozen(c))
        object.__setattr__(self, "is_metric", _check_metric(c))
        object.__setattr__(self, "is_translation_invariant", _check_cyclic(c))

    @property
    def rows(self) -> int:
        return self.cost.shape[0]

    @property
    def cols(self) -> int:
        return self.cost.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.cost.shape

    @property
    def T(self) -> "CostMatrix":
        return CostMatrix(self.cost.T)

    def __array__(self, dtype=None, copy=None):
        return self.cost if dtype is None else self.cost.astype(dtype)


def _check_metric(c: np.ndarray, tol: float = 1e-12) -> bool:
    n, m = c.shape
    if n != m:
        return False
    if np.any(np.abs(np.diag(c)) > tol) or np.any(np.abs(c - c.T) > tol):
        return False
    # c[i, k] <= c[i, j] + c[j, k] for all j
    via = c[:, :, None] + c[None, :, :]
    return bool(np.all(c <= via.min(axis=1) + tol))


def _check_cyclic(c: np.ndarray, tol: float = 1e-12) -> bool:
    n, m = c.shape
    if n != m:
        return False
    shifted = np.roll(np.roll(c, 1, axis=0), 1, axis=1)
    return bool(np.all(np.abs(shifted - c) <= tol))


@dataclass(frozen=True)
class InfoBudget:
    """Upper bound on mutual information, in nats."""

    lam: float

    def __post_init__(self):
        lam = float(self.lam)
        if not lam >= 0:
            raise BudgetError(f"information budget must be >= 0, got {self.lam}")
        object.__setattr__(self, "lam", lam)


def as_distribution(p) -> Distribution:
    return p if isinstance(p, Distribution) else Distribution(p)


def as_joint(w) -> JointDistribution:
    return w if isinstance(w, JointDistribution) else JointDistribution(w)


def as_cost(c) -> CostMatrix:
    return c if isinstance(c, CostMatrix) else CostMatrix(c)


def as_budget(b) -> InfoBudget:
    return b if isinstance(b, InfoBudget) else InfoBudget(b)


def _kl_arrays(p: np.ndarray, q: np.ndarray) -> float:
    support = p > 0
    if np.any(q[support] <= 0):
        return math.inf
    ps, qs = p[support], q[support]
    d = float(np.sum(ps * (np.log(ps) - np.log(qs))))
    # roundoff can push an exact zero slightly negative
    return max(d, 0.0)


def kl_divergence(p, q) -> float:
    """KL divergence ``D[p, q] = sum p ln(p / q)`` in nats.

    Returns ``math.inf`` when ``p`` puts mass where ``q`` has none.
    """
    p, q = as_distribution(p), as_distribution(q)
    if p.space_size != q.space_size:
        raise DimensionError(f"space sizes differ: {p.space_size} vs {q.space_size}")
    return _kl_arrays(p.mass, q.mass)


def entropy(p, reference=None) -> float:
    """Entropy of ``p`` relative to a reference measure.

    ``H[p/r] = -sum p ln(p / r)``. The reference is any strictly positive
    weight vector (not necessarily normalized); the default is the counting
    measure, which gives the Shannon entropy.
    """
    p = as_distribution(p)
    if reference is None:
        r = np.ones(p.space_size)
    else:
        r = np.asarray(reference.mass if isinstance(reference, Distribution) else reference, dtype=float)
        if r.shape != (p.space_size,):
            raise DimensionError(f"reference shape {r.shape} != ({p.space_size},)")
        if np.any(r <= 0):
            raise SupportError("reference measure must be strictly positive")
    s = p.mass > 0
    return float(-np.sum(p.mass[s] * (np.log(p.mass[s]) - np.log(r[s]))))


def marginals(w) -> tuple[Distribution, Distribution]:
    """Row (``X``) and column (``Y``) marginals of a joint measure."""
    w = as_joint(w)
    return w.row_marginal(), w.col_marginal()


def product(q, p) -> JointDistribution:
    """Product measure ``q (x) p``."""
    q, p = as_distribution(q), as_distribution(p)
    return JointDistribution(np.outer(q.mass, p.mass))


def diagonal(q) -> JointDistribution:
    """Joint measure of ``(X, X)``: the deterministic identity channel."""
    q = as_distribution(q)
    return JointDistribution(np.diag(q.mass))


def _kl_from_product(w: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    # D[w, a (x) b] without forming the outer product, which can underflow
    xs, ys = np.nonzero(w > 0)
    if np.any(a[xs] <= 0) or np.any(b[ys] <= 0):
        return math.inf
    ws = w[xs, ys]
    d = float(np.sum(ws * (np.log(ws) - np.log(a[xs]) - np.log(b[ys]))))
    return max(d, 0.0)


def mutual_information(w) -> float:
    """``I(X, Y) = D[w, q (x) p]`` with ``q, p`` the marginals of ``w``."""
    w = as_joint(w)
    return _kl_from_product(w.mass, w.mass.sum(axis=1), w.mass.sum(axis=0))


def cross_information(w, q) -> float:
    """Cross-information ``D[w, q (x) q]`` of a joint with row marginal ``q``."""
    w, q = as_joint(w), as_distribution(q)
    if w.rows != w.cols:
        raise DimensionError(f"cross-information needs a square joint, got {w.shape}")
    if q.space_size != w.rows:
        raise DimensionError(f"q has {q.space_size} atoms, joint has {w.rows} rows")
    err = float(np.max(np.abs(w.mass.sum(axis=1) - q.mass)))
    if err > MARGINAL_TOL:
        raise MarginalMismatchError(f"row marginal of w differs from q by {err:.3g}")
    return _kl_from_product(w.mass, q.mass, q.mass)


def pythagorean_residual(w) -> float:
    """``|D[w, q(x)q] - I(X,Y) - D[p, q]|`` for ``w`` with marginals ``(q, p)``.

    Only finite when the column marginal is absolutely continuous with
    respect to the row marginal.
    """
    w = as_joint(w)
    q, p = marginals(w)
    return abs(cross_information(w, q) - mutual_information(w) - kl_divergence(p, q))


def total_variation(a, b) -> float:
    """Half the l1 distance between two measures of equal shape."""
    a = np.asarray(getattr(a, "mass", a), dtype=float)
    b = np.asarray(getattr(b, "mass", b), dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shapes differ: {a.shape} vs {b.shape}")
    return 0.5 * float(np.abs(a - b).sum())
