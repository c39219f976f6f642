"""Exact solver for the finite transportation linear program.

    minimize    sum_xy w[x, y] c[x, y]
    subject to  sum_y w[x, y] = q[x],  sum_x w[x, y] = p[y],  w >= 0

Rows index the source space ``X`` (marginal ``q``), columns the target space
``Y`` (marginal ``p``). The dual is

    maximize    E_p{f} - E_q{g}
    subject to  f[y] - g[x] <= c[x, y]

so ``f`` lives on the target side and ``g`` on the source side. For a
symmetric cost on ``X = Y`` the constraint reads ``f(x) - g(y) <= c(x, y)``.

The solver is a transportation (network) simplex on the bipartite graph:
northwest-corner start, Bland's rule for the entering arc (first cell in
row-major order with negative reduced cost), lowest-index tie break for the
leaving arc, and a tiny perturbation of the supplies against degeneracy that
is removed before the plan is returned.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DimensionError, SolverStateError
from .measures import CostMatrix, Distribution, JointDistribution, as_cost, as_distribution

PERTURBATION = 1e-13
FLOW_CLIP = 1e-11


@dataclass(frozen=True, eq=False)
class TransportSolution:
    """Optimal plan, Kantorovich value and dual potentials of one solve.

    ``f`` is indexed by the target atoms (pairs with ``p``) and ``g`` by the
    source atoms (pairs with ``q``).
    """

    plan: JointDistribution
    value: float
    f: np.ndarray
    g: np.ndarray
    iterations: int
    status: Literal["optimal", "infeasible-input"]
    basis: tuple[tuple[int, int], ...]

    @property
    def potentials(self) -> tuple[np.ndarray, np.ndarray]:
        return self.f, self.g


def _northwest_corner(supply: np.ndarray, demand: np.ndarray) -> dict[tuple[int, int], float]:
    n, m = len(supply), len(demand)
    s, d = supply.copy(), demand.copy()
    flows: dict[tuple[int, int], float] = {}
    i = j = 0
    while i < n and j < m:
        amount = min(s[i], d[j])
        flows[(i, j)] = amount
        s[i] -= amount
        d[j] -= amount
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif s[i] <= d[j]:
            i += 1
        else:
            j += 1
    return flows


def _adjacency(cells, n: int, m: int) -> list[list[int]]:
    # nodes 0..n-1 are rows, n..n+m-1 are columns
    adj: list[list[int]] = [[] for _ in range(n + m)]
    for i, j in cells:
        adj[i].append(n + j)
        adj[n + j].append(i)
    return adj


def _rooted_tree(cells, cost: np.ndarray):
    """Potentials ``u[i] + v[j] = c[i, j]`` on the basis tree plus parent/depth arrays.

    The tree is rooted at row 0 with ``u[0] = 0``.
    """
    n, m = cost.shape
    adj = _adjacency(cells, n, m)
    pot = np.zeros(n + m)
    parent = [-1] * (n + m)
    depth = [-1] * (n + m)
    depth[0] = 0
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for b in adj[a]:
            if depth[b] < 0:
                i, j = (a, b - n) if a < n else (b, a - n)
                pot[b] = cost[i, j] - pot[a]
                parent[b] = a
                depth[b] = depth[a] + 1
                queue.append(b)
    return pot[:n], pot[n:], parent, depth


def _tree_path(parent, depth, start: int, goal: int) -> list[int]:
    head, tail = [start], [goal]
    a, b = start, goal
    while depth[a] > depth[b]:
        a = parent[a]
        head.append(a)
    while depth[b] > depth[a]:
        b = parent[b]
        tail.append(b)
    while a != b:
        a, b = parent[a], parent[b]
        head.append(a)
        tail.append(b)
    return head + tail[-2::-1]


def tree_flows(cells, supply: np.ndarray, demand: np.ndarray) -> dict[tuple[int, int], float]:
    """Flows on a spanning-tree basis by repeated leaf elimination."""
    n, m = len(supply), len(demand)
    residual = np.concatenate([supply, demand]).astype(float)
    adj = [set(nbrs) for nbrs in _adjacency(cells, n, m)]
    flows: dict[tuple[int, int], float] = {}
    leaves = deque(a for a in range(n + m) if len(adj[a]) == 1)
    while leaves:
        a = leaves.popleft()
        if len(adj[a]) != 1:
            continue
        b = adj[a].pop()
        adj[b].discard(a)
        i, j = (a, b - n) if a < n else (b, a - n)
        amount = residual[a]
        flows[(i, j)] = amount
        residual[b] -= amount
        residual[a] = 0.0
        if len(adj[b]) == 1:
            leaves.append(b)
    return flows


def solve_otp(q, p, c, *, max_pivots: int | None = None) -> TransportSolution:
    """Kantorovich transport value ``K_c[p, q]`` with an optimal vertex plan.

    Parameters
    ----------
    q : Distribution
        Source marginal (rows).
    p : Distribution
        Target marginal (columns).
    c : CostMatrix
        Cost of shape ``(len(q), len(p))``.
    max_pivots : int, optional
        Safety cap on simplex pivots; defaults to a generous bound in the
        problem size.

    Returns
    -------
    TransportSolution
    """
    q, p, c = as_distribution(q), as_distribution(p), as_cost(c)
    if c.shape != (q.space_size, p.space_size):
        raise DimensionError(
            f"cost shape {c.shape} does not match marginals ({q.space_size}, {p.space_size})"
        )
    cost = c.cost
    n, m = cost.shape
    if max_pivots is None:
        max_pivots = 50 * (n + m) * max(n, m) + 1000

    eps = PERTURBATION * np.arange(1, n + 1)
    supply = q.mass + eps
    demand = p.mass.copy()
    demand[-1] += eps.sum()

    flows = _northwest_corner(supply, demand)
    cells = list(flows)
    scale = max(1.0, float(np.abs(cost).max()))
    tol = 1e-12 * scale

    pivots = 0
    while True:
        u, v, parent, depth = _rooted_tree(cells, cost)
        reduced = cost - u[:, None] - v[None, :]
        negative = np.flatnonzero(reduced.ravel() < -tol)
        if negative.size == 0:
            break
        if pivots >= max_pivots:
            raise RuntimeError(f"transport simplex exceeded {max_pivots} pivots")
        i_in, j_in = divmod(int(negative[0]), m)

        # cycle: entering cell, then the tree path from column j_in back to row i_in
        path = _tree_path(parent, depth, n + j_in, i_in)
        cycle = []
        for a, b in zip(path[:-1], path[1:]):
            cycle.append((b, a - n) if a >= n else (a, b - n))
        # cells on the path alternate: the first one touches column j_in and loses flow
        minus = cycle[0::2]
        theta = min(flows[e] for e in minus)
        leaving = min(e for e in minus if flows[e] == theta)
        for k, e in enumerate(cycle):
            flows[e] += -theta if k % 2 == 0 else theta
        flows[(i_in, j_in)] = theta
        del flows[leaving]
        cells = list(flows)
        pivots += 1

    exact = tree_flows(cells, q.mass, p.mass)
    plan = np.zeros((n, m))
    for (i, j), amount in exact.items():
        if amount < -FLOW_CLIP:
            raise RuntimeError(f"negative basic flow {amount:.3g} after removing perturbation")
        plan[i, j] = max(amount, 0.0)

    u, v, _, _ = _rooted_tree(cells, cost)
    joint = JointDistribution(plan)
    value = float(np.sum(joint.mass * cost))
    return TransportSolution(
        plan=joint,
        value=value,
        f=v.copy(),
        g=-u,
        iterations=pivots,
        status="optimal",
        basis=tuple(sorted(cells)),
    )


def dual_value(sol: TransportSolution, q, p) -> float:
    """Dual objective ``E_p{f} - E_q{g}`` of the solver's potentials."""
    if sol.status != "optimal":
        raise SolverStateError(f"dual value needs an optimal solution, got status {sol.status!r}")
    q, p = as_distribution(q), as_distribution(p)
    if (q.space_size, p.space_size) != (len(sol.g), len(sol.f)):
        raise DimensionError("marginal sizes do not match the solution's potentials")
    return float(p.mass @ sol.f - q.mass @ sol.g)


def dual_feasibility_violation(f, g, c) -> float:
    """Largest amount by which ``f[y] - g[x] <= c[x, y]`` fails (0 if feasible)."""
    cost = np.asarray(getattr(c, "cost", c), dtype=float)
    excess = np.asarray(f)[None, :] - np.asarray(g)[:, None] - cost
    return max(float(excess.max()), 0.0)


def complementary_slackness_residual(sol: TransportSolution, c, threshold: float = 1e-12) -> float:
    """Max ``|f[y] - g[x] - c[x, y]|`` over cells carrying more than ``threshold`` mass."""
    cost = np.asarray(getattr(c, "cost", c), dtype=float)
    gap = np.abs(sol.f[None, :] - sol.g[:, None] - cost)
    active = sol.plan.mass > threshold
    return float(gap[active].max()) if active.any() else 0.0
