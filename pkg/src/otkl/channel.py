"""Optimal channel problem: minimum expected cost under a mutual-information budget.

For an input marginal ``q`` and cost ``c`` the value is

    R_c[q](lam) = inf { E_w{c} : I(X, Y) <= lam, row marginal of w = q }.

At a fixed inverse temperature ``beta`` the optimum minimizes
``E_w{c} + I(X, Y) / beta`` and has the exponential form

    w(x, y) = q(x) p(y) exp(-beta c(x, y) - kappa(beta, x)),

which Blahut-Arimoto alternating minimization reaches from a uniform output
marginal. The budget is then matched by bisecting ``beta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._bisection import match_budget, initial_beta
from .errors import BudgetError, DimensionError, SolverStateError
from .measures import (
    CostMatrix,
    Distribution,
    InfoBudget,
    JointDistribution,
    as_budget,
    as_cost,
    as_distribution,
    mutual_information,
)

BA_TOL = 1e-12
BA_MAX_ITER = 10_000
# extra stopping condition: output marginal stable in log scale
BA_LOG_MARGINAL_TOL = 1e-10
BISECTION_INFO_TOL = 1e-6
# output letters below this are treated as extinct; avoids denormals
DEAD_LETTER = 1e-300
# stalled Blahut-Arimoto hands over to an active-set Newton solve
POLISH_AFTER = 200
POLISH_MAX_STEPS = 200
POLISH_DECREMENT = 1e-28
POLISH_KKT_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class ChannelSolution:
    """Result of an optimal-channel solve.

    ``beta`` is ``math.inf`` when the information budget does not bind.
    ``lagrangian`` holds ``E_w{c} + I/beta`` after every Blahut-Arimoto
    iteration of the final solve (empty for ``beta`` in ``{0, inf}``).
    """

    joint: JointDistribution
    value: float
    info: float
    beta: float
    output_marginal: Distribution
    ba_iterations: int
    bisection_iterations: int = 0
    lagrangian: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def channel(self) -> np.ndarray:
        """Conditional ``w(y | x)``; rows with zero input mass copy the output marginal."""
        q = self.joint.mass.sum(axis=1)
        out = np.tile(self.output_marginal.mass, (len(q), 1))
        nz = q > 0
        out[nz] = self.joint.mass[nz] / q[nz, None]
        return out


def _embed(qm: np.ndarray, active: np.ndarray, rows: np.ndarray, m: int) -> np.ndarray:
    joint = np.zeros((len(qm), m))
    joint[active] = qm[active, None] * rows
    return joint


def _finish(qm, cost, joint, beta, iterations, history=()) -> ChannelSolution:
    jd = JointDistribution(joint)
    return ChannelSolution(
        joint=jd,
        value=jd.expect(cost),
        info=mutual_information(jd),
        beta=beta,
        output_marginal=Distribution(joint.sum(axis=0)),
        ba_iterations=iterations,
        lagrangian=np.asarray(history, dtype=float),
    )


def _zero_temperature_limit(qm: np.ndarray, cost: np.ndarray) -> ChannelSolution:
    """Least-information channel among those with minimal expected cost.

    Each input may only use its cheapest outputs; among such channels the
    mutual information is minimized by alternating minimization with the
    cost term switched off.
    """
    active = qm > 0
    qa, ca = qm[active], cost[active]
    scale = max(1.0, float(np.abs(ca).max()))
    allowed = ca <= ca.min(axis=1, keepdims=True) + 1e-12 * scale
    n_out = cost.shape[1]
    p = np.full(n_out, 1.0 / n_out)
    it = 0
    for it in range(1, BA_MAX_ITER + 1):
        rows = np.where(allowed, p[None, :], 0.0)
        rows /= rows.sum(axis=1, keepdims=True)
        p_new = qa @ rows
        done = np.max(np.abs(p_new - p)) <= 1e-15
        p = p_new
        if done:
            break
    return _finish(qm, cost, _embed(qm, active, rows, n_out), math.inf, it)


def _infinite_temperature(qm: np.ndarray, cost: np.ndarray) -> ChannelSolution:
    # I = 0 forces a product coupling; the best output is a single cheapest column
    best = int(np.argmin(qm @ cost))
    p = np.zeros(cost.shape[1])
    p[best] = 1.0
    return _finish(qm, cost, np.outer(qm, p), 0.0, 0)


def _blahut_arimoto_log(qm: np.ndarray, cost: np.ndarray, beta: float, max_iter: int, tol: float):
    """Log-domain iteration; slower, used when the scaled kernel underflows."""
    active = qm > 0
    qa = qm[active][:, None]
    neg_bc = -beta * cost[active]
    n_out = cost.shape[1]
    logp = np.full(n_out, -math.log(n_out))
    history = []
    prev = math.inf
    it = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        for it in range(1, max_iter + 1):
            logw = logp + neg_bc
            top = logw.max(axis=1, keepdims=True)
            logw -= top + np.log(np.exp(logw - top).sum(axis=1, keepdims=True))
            w = np.exp(logw)
            qw = qa * w
            p_new = qw.sum(axis=0)
            logp_new = np.log(p_new)
            info = np.where(qw > 0, qw * logw, 0.0).sum() - np.where(p_new > 0, p_new * logp_new, 0.0).sum()
            lagr = float((qw * neg_bc).sum() / -beta + info / beta)
            history.append(lagr)
            seen = p_new > 1e-12
            drift = float(np.abs(logp_new[seen] - logp[seen]).max())
            logp = logp_new
            if abs(prev - lagr) <= tol * max(1.0, abs(lagr)) and drift <= BA_LOG_MARGINAL_TOL:
                break
            prev = lagr
    return _embed(qm, active, w, n_out), it, history


def _polish_marginal(qa: np.ndarray, kernel: np.ndarray, p: np.ndarray) -> np.ndarray | None:
    """Active-set Newton solve of ``max_p sum_x q(x) ln (K p)(x)`` over the simplex.

    Starts from a Blahut-Arimoto iterate. Letters whose mass the line search
    drives to zero leave the free set; a letter at zero is released again
    if its gradient ``g(y) = sum_x q(x) K(x, y) / (K p)(x)`` exceeds 1, which
    is the optimality (KKT) condition for this concave program. Returns
    ``None`` if no certified optimum is reached.
    """
    p = p.copy()
    free = p > 0

    def objective(pp):
        z = kernel @ pp
        return float(qa @ np.log(z)) if z.min() > 0 else -math.inf

    f = objective(p)
    for _ in range(POLISH_MAX_STEPS):
        z = kernel @ p
        g = (qa / z) @ kernel
        idx = np.flatnonzero(free)
        kf = kernel[:, idx] / z[:, None]
        hess = kf.T @ (qa[:, None] * kf)
        k = len(idx)
        system = np.zeros((k + 1, k + 1))
        system[:k, :k] = hess
        system[:k, k] = system[k, :k] = 1.0
        sol, *_ = np.linalg.lstsq(system, np.concatenate([g[idx], [0.0]]), rcond=None)
        d = sol[:k]
        decrement = float(g[idx] @ d)
        if decrement <= POLISH_DECREMENT:
            outside = np.flatnonzero(~free)
            if outside.size == 0 or g[outside].max() <= 1.0 + POLISH_KKT_TOL:
                return p / p.sum()
            free[outside[np.argmax(g[outside])]] = True
            continue
        shrinking = d < 0
        t_max = float(np.min(-p[idx][shrinking] / d[shrinking])) if shrinking.any() else math.inf
        t = min(1.0, t_max)
        for _ in range(60):
            trial = p.copy()
            trial[idx] = np.maximum(p[idx] + t * d, 0.0)
            f_trial = objective(trial)
            if f_trial >= f + 1e-4 * t * decrement:
                break
            t *= 0.5
        else:
            return None
        if t == t_max:
            blocked = idx[shrinking][np.argmin(-p[idx][shrinking] / d[shrinking])]
            trial[blocked] = 0.0
            free[blocked] = False
        p, f = trial, f_trial
    return None


def _blahut_arimoto(qm: np.ndarray, cost: np.ndarray, beta: float, max_iter: int, tol: float, polish: bool = True):
    """Alternating minimization of ``E_w{c} + I/beta`` from a uniform output marginal.

    Each step sets ``w(y|x) = p(y) K(x, y) / z(x)`` with ``K = exp(-beta c)``
    and then ``p = q w``. The Lagrangian after a step equals
    ``-(sum_x q ln Z(x) + D[p_new, p_old]) / beta``, so it is tracked without
    forming ``ln w``.

    Near a value of ``beta`` where an output letter leaves the optimal
    support, the letter's mass decays very slowly. If the iteration has not
    converged after ``POLISH_AFTER`` steps, the output marginal is handed to
    an active-set Newton solve and iteration resumes from its certified
    optimum, which then converges in a step or two. The polished point is
    used only if it does not raise the Lagrangian.
    """
    active = qm > 0
    qa = qm[active]
    ca = cost[active]
    row_min = ca.min(axis=1)
    kernel = np.exp(-beta * (ca - row_min[:, None]))
    # ln Z(x) = ln z(x) - beta * min_y c(x, y)
    shift = beta * float(qa @ row_min)
    n_out = cost.shape[1]

    def step(p):
        z = kernel @ p
        if not z.min() > 1e-250:
            return None
        p_new = p * ((qa / z) @ kernel)
        p_new[p_new < DEAD_LETTER] = 0.0
        pos = p_new > 0
        log_ratio = np.log(p_new[pos] / p[pos])
        lagr = -(float(qa @ np.log(z)) - shift + float(p_new[pos] @ log_ratio)) / beta
        seen = p_new[pos] > 1e-12
        drift = float(np.abs(log_ratio[seen]).max()) if seen.any() else 0.0
        return p_new, z, lagr, drift

    p = np.full(n_out, 1.0 / n_out)
    history = []
    prev = math.inf
    it = 0
    polished = not polish
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        while it < max_iter:
            out = step(p)
            it += 1
            if out is None:
                return _blahut_arimoto_log(qm, cost, beta, max_iter, tol)
            if not polished and it > POLISH_AFTER:
                polished = True
                better = _polish_marginal(qa, kernel, p)
                trial = step(better) if better is not None else None
                if trial is not None and trial[2] <= min(out[2], history[-1]):
                    p, out = better, trial
            p_new, z, lagr, drift = out
            history.append(lagr)
            p_old, p = p, p_new
            if abs(prev - lagr) <= tol * max(1.0, abs(lagr)) and drift <= BA_LOG_MARGINAL_TOL:
                break
            prev = lagr
    w = p_old[None, :] * kernel / z[:, None]
    return _embed(qm, active, w, n_out), it, history


def solve_ocp_at_beta(
    q, c, beta: float, *, max_iter: int = BA_MAX_ITER, tol: float = BA_TOL, polish: bool = True
) -> ChannelSolution:
    """Minimize ``E_w{c} + I(X, Y) / beta`` over channels with input marginal ``q``.

    ``beta = 0`` returns the cheapest product coupling (zero information,
    ties broken towards the lowest output index); ``beta = inf`` returns
    the least-information channel among the cost-optimal ones.
    """
    q, c = as_distribution(q), as_cost(c)
    if c.rows != q.space_size:
        raise DimensionError(f"cost has {c.rows} rows, q has {q.space_size} atoms")
    beta = float(beta)
    if not beta >= 0:
        raise BudgetError(f"beta must be >= 0, got {beta}")
    if beta == 0:
        return _infinite_temperature(q.mass, c.cost)
    if math.isinf(beta):
        return _zero_temperature_limit(q.mass, c.cost)
    joint, it, history = _blahut_arimoto(q.mass, c.cost, beta, max_iter, tol, polish)
    return _finish(q.mass, c.cost, joint, beta, it, history)


def _with_bisection(sol: ChannelSolution, steps: int) -> ChannelSolution:
    return ChannelSolution(
        joint=sol.joint,
        value=sol.value,
        info=sol.info,
        beta=sol.beta,
        output_marginal=sol.output_marginal,
        ba_iterations=sol.ba_iterations,
        bisection_iterations=steps,
        lagrangian=sol.lagrangian,
    )


def solve_ocp(
    q,
    c,
    budget,
    *,
    info_tol: float = BISECTION_INFO_TOL,
    on_solve: Callable[[ChannelSolution], None] | None = None,
) -> ChannelSolution:
    """``R_c[q](lam)`` and the optimal channel for an information budget.

    If the unconstrained optimum already carries at most ``lam`` nats it is
    returned with ``beta = inf``. Otherwise ``beta`` is bisected until the
    achieved information lies in ``[lam - info_tol, lam + 1e-8]``.
    ``on_solve``, if given, sees every fixed-``beta`` solve of the search.
    """
    q, c = as_distribution(q), as_cost(c)
    budget = as_budget(budget)
    if c.rows != q.space_size:
        raise DimensionError(f"cost has {c.rows} rows, q has {q.space_size} atoms")
    lam = budget.lam

    unconstrained = _zero_temperature_limit(q.mass, c.cost)
    if unconstrained.info <= lam:
        return unconstrained
    if lam == 0:
        return _infinite_temperature(q.mass, c.cost)

    beta_start = initial_beta(c.cost)
    def solve(beta):
        sol = solve_ocp_at_beta(q, c, beta)
        if on_solve is not None:
            on_solve(sol)
        return sol

    sol, _, steps = match_budget(solve, lam, beta_start, info_tol)
    return _with_bisection(sol, steps)


@dataclass(frozen=True)
class VoIPoint:
    lam: float
    value: float
    v: float
    beta: float
    info: float


def value_of_information(q, c, lambdas, *, info_tol: float = BISECTION_INFO_TOL) -> list[VoIPoint]:
    """``V(lam) = R_c[q](0) - R_c[q](lam)`` on an ascending grid of budgets."""
    lambdas = [float(x) for x in lambdas]
    if any(b < a for a, b in zip(lambdas, lambdas[1:])):
        raise BudgetError("lambdas must be sorted ascending")
    if lambdas and lambdas[0] < 0:
        raise BudgetError("lambdas must be non-negative")
    base = solve_ocp(q, c, 0.0).value
    points = []
    for lam in lambdas:
        sol = solve_ocp(q, c, lam, info_tol=info_tol)
        points.append(VoIPoint(lam=lam, value=sol.value, v=base - sol.value, beta=sol.beta, info=sol.info))
    return points


def exponential_form_residual(sol: ChannelSolution, c, threshold: float = 1e-12) -> float:
    """Spread over ``y`` of ``ln(w/(q p)) + beta c`` per input, maximized over inputs.

    Zero for an exact solution of the form ``q p exp(-beta c - kappa(x))``.
    """
    cost = as_cost(c).cost
    if not math.isfinite(sol.beta):
        return 0.0
    joint = sol.joint.mass
    qm = joint.sum(axis=1)
    pm = sol.output_marginal.mass
    worst = 0.0
    for x in np.flatnonzero(qm > 0):
        keep = joint[x] > threshold
        if keep.sum() < 2:
            continue
        vals = np.log(joint[x, keep] / (qm[x] * pm[keep])) + sol.beta * cost[x, keep]
        worst = max(worst, float(vals.max() - vals.min()))
    return worst


def check_translation_invariant_form(sol: ChannelSolution, c, tol: float = 1e-7) -> tuple[bool, float]:
    """Whether ``q(x) exp(-kappa(beta, x))`` is constant over inputs.

    ``kappa(beta, x) = ln sum_y p(y) exp(-beta c(x, y))``. When it is
    constant the optimal channel depends on ``q`` only through the output
    marginal. Returns the verdict and the spread of that quantity.
    """
    c = as_cost(c)
    if c.rows != c.cols:
        raise DimensionError(f"translation-invariant form needs a square cost, got {c.shape}")
    if not math.isfinite(sol.beta):
        raise SolverStateError("translation-invariant form is defined for finite beta only")
    qm = sol.joint.mass.sum(axis=1)
    pm = sol.output_marginal.mass
    nz = qm > 0
    kappa = np.log(np.exp(-sol.beta * c.cost) @ pm)
    vals = qm[nz] * np.exp(-kappa[nz])
    residual = float(vals.max() - vals.min())
    return residual <= tol, residual
