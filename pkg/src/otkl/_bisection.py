"""Inverse-temperature search shared by the channel and constrained transport solvers.

Both problems produce solutions whose mutual information is non-decreasing
in ``beta``, so the budget is matched by bracketing and bisecting ``beta``.
"""
from __future__ import annotations

from typing import Callable, Protocol, TypeVar

import numpy as np

BETA_CAP = 1e8
OVERSHOOT_TOL = 1e-8
MAX_BISECTION_STEPS = 200


class _HasInfo(Protocol):
    info: float


S = TypeVar("S", bound=_HasInfo)


def initial_beta(cost: np.ndarray) -> float:
    """Starting point of the upward bracket: one unit of inverse cost range."""
    cost = np.asarray(cost, dtype=float)
    spread = float(cost.max() - cost.min())
    return 1.0 / spread if spread > 0 else 1.0


def match_budget(
    solve: Callable[[float], S],
    lam: float,
    beta_start: float,
    info_tol: float,
) -> tuple[S, float, int]:
    """Find ``beta`` whose solution has ``lam - info_tol <= info <= lam + OVERSHOOT_TOL``.

    ``solve(0.0)`` must be valid and carry zero information. Returns the
    solution, its ``beta`` and the number of solves. If the window is never
    hit, the best solution on the feasible side (``info <= lam``) is
    returned.
    """

    def accepted(s) -> bool:
        return lam - info_tol <= s.info <= lam + OVERSHOOT_TOL

    steps = 0
    lo, lo_sol = 0.0, None
    hi = beta_start
    hi_sol = solve(hi)
    steps += 1
    while hi_sol.info < lam and not accepted(hi_sol) and hi < BETA_CAP:
        lo, lo_sol = hi, hi_sol
        hi = min(2.0 * hi, BETA_CAP)
        hi_sol = solve(hi)
        steps += 1
    if accepted(hi_sol) or hi_sol.info < lam:
        return hi_sol, hi, steps

    while steps < MAX_BISECTION_STEPS and hi - lo > 1e-15 * hi:
        mid = 0.5 * (lo + hi)
        sol = solve(mid)
        steps += 1
        if accepted(sol):
            return sol, mid, steps
        if sol.info < lam:
            lo, lo_sol = mid, sol
        else:
            hi, hi_sol = mid, sol
    if lo_sol is None:
        lo_sol = solve(lo)
        steps += 1
    return lo_sol, lo, steps
