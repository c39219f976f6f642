"""Deliberately naive reference computations and a seeded instance generator.

Nothing here shares code with the solvers it is used to check.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .errors import DimensionError, OTKLError
from .measures import CostMatrix, Distribution, as_budget, as_cost, as_distribution

CostKind = Literal["hamming", "grid_abs", "random_uniform", "translation_invariant_cyclic"]
MarginalKind = Literal["uniform", "random_dirichlet", "point_mass"]

LP_BRUTEFORCE_MAX_CELLS = 12
GRIDSEARCH_MIN_STEP = 1e-3


@dataclass(frozen=True)
class InstanceSpec:
    nx: int
    ny: int
    seed: int
    cost_kind: CostKind = "random_uniform"
    marginal_kind: MarginalKind = "random_dirichlet"

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise OTKLError(f"instance sizes must be >= 1, got ({self.nx}, {self.ny})")
        if self.cost_kind == "translation_invariant_cyclic" and self.nx != self.ny:
            raise DimensionError("cyclic costs need a square space")


def _marginal(kind: str, n: int, rng: np.random.Generator) -> Distribution:
    if kind == "uniform":
        return Distribution(np.ones(n))
    if kind == "random_dirichlet":
        w = rng.dirichlet(np.ones(n))
        # Dirichlet draws can underflow to exact zero for tiny concentration
        return Distribution(np.maximum(w, 1e-12))
    if kind == "point_mass":
        return Distribution.point_mass(n, int(rng.integers(n)))
    raise OTKLError(f"unknown marginal kind {kind!r}")


def _cost(kind: str, nx: int, ny: int, rng: np.random.Generator) -> np.ndarray:
    x = np.arange(nx)[:, None]
    y = np.arange(ny)[None, :]
    if kind == "hamming":
        return (x != y).astype(float)
    if kind == "grid_abs":
        return np.abs(x - y).astype(float)
    if kind == "random_uniform":
        return rng.random((nx, ny))
    if kind == "translation_invariant_cyclic":
        profile = rng.random(nx)
        profile[0] = 0.0
        return profile[(y - x) % nx]
    raise OTKLError(f"unknown cost kind {kind!r}")


def generate(spec: InstanceSpec) -> tuple[Distribution, Distribution, CostMatrix]:
    """Deterministic ``(q, p, c)`` for a spec; the same spec gives identical arrays."""
    rng = np.random.default_rng(spec.seed)
    q = _marginal(spec.marginal_kind, spec.nx, rng)
    p = _marginal(spec.marginal_kind, spec.ny, rng)
    c = CostMatrix(_cost(spec.cost_kind, spec.nx, spec.ny, rng))
    if spec.cost_kind in ("hamming", "grid_abs") and spec.nx == spec.ny:
        assert c.is_metric
    if spec.cost_kind == "translation_invariant_cyclic":
        assert c.is_translation_invariant
    return q, p, c


def _is_spanning_tree(cells, n: int, m: int) -> bool:
    parent = list(range(n + m))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in cells:
        ri, rj = find(i), find(n + j)
        if ri == rj:
            return False
        parent[ri] = rj
    return True


def lp_bruteforce(q, p, c) -> tuple[float, np.ndarray]:
    """Minimum of the transportation LP over every basic feasible solution.

    Every vertex of the transportation polytope is supported on a spanning
    tree of the bipartite graph, so enumerating all ``nx + ny - 1`` cell
    subsets that form a tree and solving the marginal equations on each
    support visits every vertex.
    """
    q, p, c = as_distribution(q), as_distribution(p), as_cost(c)
    n, m = q.space_size, p.space_size
    if c.shape != (n, m):
        raise DimensionError(f"cost shape {c.shape} != ({n}, {m})")
    if n * m > LP_BRUTEFORCE_MAX_CELLS:
        raise OTKLError(f"brute force limited to nx*ny <= {LP_BRUTEFORCE_MAX_CELLS}, got {n * m}")
    all_cells = [(i, j) for i in range(n) for j in range(m)]
    rhs = np.concatenate([q.mass, p.mass])
    best_value, best_plan = math.inf, None
    for support in itertools.combinations(all_cells, n + m - 1):
        if not _is_spanning_tree(support, n, m):
            continue
        a = np.zeros((n + m, len(support)))
        for k, (i, j) in enumerate(support):
            a[i, k] = 1.0
            a[n + j, k] = 1.0
        x, *_ = np.linalg.lstsq(a, rhs, rcond=None)
        if np.max(np.abs(a @ x - rhs)) > 1e-12 or x.min() < -1e-12:
            continue
        plan = np.zeros((n, m))
        for k, (i, j) in enumerate(support):
            plan[i, j] = max(x[k], 0.0)
        value = float(np.sum(plan * c.cost))
        if value < best_value:
            best_value, best_plan = value, plan
    return best_value, best_plan


def monotone_1d(q, p, spacing: float = 1.0) -> float:
    """Transport cost for ``c(x, y) = spacing * |x - y|`` on a 1D grid, via CDFs."""
    q, p = as_distribution(q), as_distribution(p)
    if q.space_size != p.space_size:
        raise DimensionError(f"grid sizes differ: {q.space_size} vs {p.space_size}")
    return float(spacing * np.abs(np.cumsum(q.mass) - np.cumsum(p.mass))[:-1].sum())


def _mi_2x2(q: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # channel rows (a, 1-a) and (b, 1-b); returns I(X,Y) elementwise
    w = np.stack([q[0] * a, q[0] * (1 - a), q[1] * b, q[1] * (1 - b)])
    out0 = w[0] + w[2]
    out = np.stack([out0, 1 - out0, out0, 1 - out0])
    inp = np.array([q[0], q[0], q[1], q[1]])[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, w * np.log(w / (inp * out)), 0.0)
    return terms.sum(axis=0)


def channel_gridsearch(q, c, budget, step: float = 1e-3) -> float:
    """Smallest expected cost over 2x2 channels on a grid with ``I(X, Y) <= lambda``."""
    q, c, budget = as_distribution(q), as_cost(c), as_budget(budget)
    if c.shape != (2, 2) or q.space_size != 2:
        raise OTKLError("channel grid search handles 2x2 instances only")
    if step < GRIDSEARCH_MIN_STEP:
        raise OTKLError(f"grid step must be >= {GRIDSEARCH_MIN_STEP}")
    k = int(round(1.0 / step))
    grid = np.linspace(0.0, 1.0, k + 1)
    a, b = np.meshgrid(grid, grid, indexing="ij")
    a, b = a.ravel(), b.ravel()
    qm, cm = q.mass, c.cost
    cost = qm[0] * (a * cm[0, 0] + (1 - a) * cm[0, 1]) + qm[1] * (b * cm[1, 0] + (1 - b) * cm[1, 1])
    feasible = _mi_2x2(qm, a, b) <= budget.lam + 1e-15
    return float(cost[feasible].min())


def central_difference(fn: Callable[[float], float], x: float, h: float) -> float:
    return (fn(x + h) - fn(x - h)) / (2.0 * h)
