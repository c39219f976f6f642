"""Optimal transport with an explicit mutual-information budget.

    K_c[p, q](lam) = inf { E_w{c} : I(X, Y) <= lam, w in Gamma[q, p] }

When the budget binds, the optimum is a Gibbs plan
``w = q(x) p(y) exp(a(x) + b(y) - beta c(x, y))`` whose scalings ``a, b``
are found by alternating marginal fitting (Sinkhorn) in the log domain and
whose ``beta`` is bisected to spend exactly the budget.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._bisection import match_budget, initial_beta
from .channel import ChannelSolution, solve_ocp
from .errors import DimensionError, SupportError
from .measures import (
    Distribution,
    JointDistribution,
    as_budget,
    as_cost,
    as_distribution,
    cross_information,
    kl_divergence,
    mutual_information,
    product,
    total_variation,
)
from .transport_lp import TransportSolution, solve_otp

SCALING_TOL = 1e-10
SCALING_MAX_ITER = 50_000
# largest |log scaling| kept outside the kernel before it is absorbed
ABSORB = 50.0
MAX_RESETS = 1000
BISECTION_INFO_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class ConstrainedTransportSolution:
    plan: JointDistribution
    value: float
    info: float
    beta: float
    active: bool
    scaling_iterations: int
    bisection_iterations: int = 0
    marginal_violation: float = 0.0


@dataclass(frozen=True)
class _Scaled:
    plan: np.ndarray
    info: float
    beta: float
    iterations: int
    violation: float


def _lse(a: np.ndarray, axis: int) -> np.ndarray:
    top = a.max(axis=axis, keepdims=True)
    return np.squeeze(top, axis=axis) + np.log(np.exp(a - top).sum(axis=axis))


def _mi_dense(w: np.ndarray, q: np.ndarray, p: np.ndarray) -> float:
    pos = w > 0
    return float(np.sum(w[pos] * np.log(w[pos] / np.outer(q, p)[pos])))


class _GibbsScaler:
    """Log-domain Sinkhorn on the support of ``q`` and ``p``, warm-started across ``beta``."""

    def __init__(self, q: np.ndarray, p: np.ndarray, cost: np.ndarray, tol: float, max_iter: int):
        self.q, self.p, self.cost = q, p, cost
        self.log_q, self.log_p = np.log(q), np.log(p)
        self.tol, self.max_iter = tol, max_iter
        self.b = np.zeros(len(p))

    def __call__(self, beta: float) -> _Scaled:
        if beta == 0:
            return _Scaled(np.outer(self.q, self.p), 0.0, 0.0, 0, 0.0)
        fast = self._stabilized(beta)
        return fast if fast is not None else self._log_domain(beta)

    def _result(self, beta, a, b, iterations, violation) -> _Scaled:
        self.b = b
        log_plan = self.log_q[:, None] + self.log_p[None, :] + a[:, None] + b[None, :] - beta * self.cost
        plan = np.exp(log_plan)
        return _Scaled(plan, _mi_dense(plan, self.q, self.p), beta, iterations, violation)

    def _stabilized(self, beta: float) -> _Scaled | None:
        # matrix-vector scaling on a kernel that absorbs the log scalings
        # whenever they drift past ABSORB or underflow; None asks for the
        # log-domain loop
        neg_bc = -beta * self.cost
        base = self.log_q[:, None] + self.log_p[None, :] + neg_bc
        log_p_k, log_q_k = self.log_p[None, :] + neg_bc, self.log_q[:, None] + neg_bc
        a, b = np.zeros(len(self.q)), self.b.copy()
        u, v = np.ones(len(self.q)), np.ones(len(self.p))
        violation = math.inf
        resets = 0
        refresh = True
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            for it in range(1, self.max_iter + 1):
                if refresh:
                    # one exact log-domain sweep leaves every column sum equal to p
                    a = -_lse(log_p_k + b[None, :], axis=1)
                    b = -_lse(log_q_k + a[:, None], axis=0)
                    kernel = np.exp(base + a[:, None] + b[None, :])
                    u, v = np.ones(len(self.q)), np.ones(len(self.p))
                    col = kernel.T @ u
                    refresh = False
                v = self.p / col
                u = self.q / (kernel @ v)
                col = kernel.T @ u
                violation = float(np.max(np.abs(v * col - self.p)))
                if not (math.isfinite(violation) and u.min() > 0 and v.min() > 0):
                    resets += 1
                    if resets > MAX_RESETS:
                        return None
                    refresh = True
                    continue
                if violation <= self.tol:
                    break
                if it % 16 == 0 and max(np.abs(np.log(u)).max(), np.abs(np.log(v)).max()) > ABSORB:
                    a, b = a + np.log(u), b + np.log(v)
                    refresh = True
        return self._result(beta, a + np.log(u), b + np.log(v), it, violation)

    def _log_domain(self, beta: float) -> _Scaled:
        neg_bc = -beta * self.cost
        log_p_k = self.log_p[None, :] + neg_bc
        log_q_k = self.log_q[:, None] + neg_bc
        b = self.b
        a = -_lse(log_p_k + b[None, :], axis=1)
        violation = math.inf
        it = 0
        for it in range(1, self.max_iter + 1):
            b = -_lse(log_q_k + a[:, None], axis=0)
            a_next = -_lse(log_p_k + b[None, :], axis=1)
            # columns are exact after the b-step; row sums are q * exp(a - a_next)
            violation = float(np.max(self.q * np.abs(np.expm1(a - a_next))))
            if violation <= self.tol:
                break
            a = a_next
        return self._result(beta, a, b, it, violation)


def _embed(small: np.ndarray, rows: np.ndarray, cols: np.ndarray, shape) -> np.ndarray:
    full = np.zeros(shape)
    full[np.ix_(rows, cols)] = small
    return full


def solve_constrained_otp(
    q, p, c, budget, *, info_tol: float = BISECTION_INFO_TOL, lp: TransportSolution | None = None
) -> ConstrainedTransportSolution:
    """Minimum expected cost over couplings of ``q`` and ``p`` with ``I(X, Y) <= lam``.

    Parameters
    ----------
    q, p : Distribution
        Row and column marginals.
    c : CostMatrix
    budget : InfoBudget or float
        Information budget in nats.
    info_tol : float
        Accept a ``beta`` whose plan carries between ``lam - info_tol`` and
        ``lam + 1e-8`` nats.
    lp : TransportSolution, optional
        Reuse an already computed unconstrained solution.
    """
    q, p, c = as_distribution(q), as_distribution(p), as_cost(c)
    budget = as_budget(budget)
    if c.shape != (q.space_size, p.space_size):
        raise DimensionError(f"cost shape {c.shape} != ({q.space_size}, {p.space_size})")
    lam = budget.lam

    if lp is None:
        lp = solve_otp(q, p, c)
    lp_info = mutual_information(lp.plan)
    if lp_info <= lam:
        return ConstrainedTransportSolution(lp.plan, lp.value, lp_info, math.inf, False, 0)
    if lam == 0:
        w = product(q, p)
        return ConstrainedTransportSolution(w, w.expect(c.cost), 0.0, 0.0, True, 0)

    rows, cols = np.flatnonzero(q.mass > 0), np.flatnonzero(p.mass > 0)
    sub_cost = c.cost[np.ix_(rows, cols)]
    scaler = _GibbsScaler(q.mass[rows], p.mass[cols], sub_cost, SCALING_TOL, SCALING_MAX_ITER)
    beta_start = initial_beta(sub_cost)
    found, beta, steps = match_budget(scaler, lam, beta_start, info_tol)

    plan = JointDistribution(_embed(found.plan, rows, cols, c.shape))
    value = plan.expect(c.cost)
    # budget unreachable at any finite beta: the plan is LP-optimal up to the cap
    active = found.info >= lam - info_tol
    return ConstrainedTransportSolution(
        plan=plan,
        value=value,
        info=found.info,
        beta=beta,
        active=active,
        scaling_iterations=found.iterations,
        bisection_iterations=steps,
        marginal_violation=found.violation,
    )


def gibbs_form_residual(sol: ConstrainedTransportSolution, q, p, c, threshold: float = 1e-12) -> float:
    """How far ``ln(w / (q p)) + beta c`` is from a sum ``a(x) + b(y)`` on the plan's support."""
    if not math.isfinite(sol.beta) or sol.beta == 0:
        return 0.0
    q, p, c = as_distribution(q), as_distribution(p), as_cost(c)
    w = sol.plan.mass
    mask = w > threshold
    xs, ys = np.nonzero(mask)
    target = np.log(w[mask] / (q.mass[xs] * p.mass[ys])) + sol.beta * c.cost[mask]
    n, m = w.shape
    design = np.zeros((len(xs), n + m))
    design[np.arange(len(xs)), xs] = 1.0
    design[np.arange(len(xs)), n + ys] = 1.0
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    return float(np.max(np.abs(design @ coef - target)))


@dataclass(frozen=True, eq=False)
class Theorem1Report:
    """Outcome of comparing the optimal channel with constrained transport.

    ``gap = K_c[p, q](lam) - R_c[q](lam)``; ``plan_distance`` is the total
    variation between the two optimal joints; ``marginal_distance`` is the
    total variation between ``p`` and the channel's output marginal.
    """

    equal: bool
    gap: float
    marginal_distance: float
    plan_distance: float
    plans_coincide: bool
    ocp: ChannelSolution
    otp: ConstrainedTransportSolution

    @property
    def consistent(self) -> bool:
        return self.equal == self.plans_coincide


def check_theorem1(
    q,
    c,
    budget,
    *,
    p=None,
    info_tol: float = 1e-10,
    gap_tol: float = 1e-6,
    plan_tol: float = 1e-7,
) -> Theorem1Report:
    """Solve the channel problem, then transport onto ``p`` under the same budget.

    ``p`` defaults to the optimal channel's output marginal, in which case
    the two values and plans should coincide.
    """
    q, c, budget = as_distribution(q), as_cost(c), as_budget(budget)
    ocp = solve_ocp(q, c, budget, info_tol=info_tol)
    target = ocp.output_marginal if p is None else as_distribution(p)
    otp = solve_constrained_otp(q, target, c, budget, info_tol=info_tol)
    gap = otp.value - ocp.value
    plan_distance = total_variation(ocp.joint, otp.plan)
    return Theorem1Report(
        equal=gap <= gap_tol,
        gap=gap,
        marginal_distance=total_variation(target, ocp.output_marginal),
        plan_distance=plan_distance,
        plans_coincide=plan_distance <= plan_tol,
        ocp=ocp,
        otp=otp,
    )


def transport_vertices(q, p, rng: np.random.Generator, count: int) -> list[np.ndarray]:
    """Vertices of ``Gamma[q, p]`` from the northwest-corner rule on shuffled orders."""
    q, p = as_distribution(q), as_distribution(p)
    out = []
    for _ in range(count):
        ri = rng.permutation(q.space_size)
        cj = rng.permutation(p.space_size)
        s, d = q.mass[ri].copy(), p.mass[cj].copy()
        plan = np.zeros((q.space_size, p.space_size))
        i = j = 0
        while i < len(s) and j < len(d):
            amount = min(s[i], d[j])
            plan[ri[i], cj[j]] = amount
            s[i] -= amount
            d[j] -= amount
            if s[i] <= d[j]:
                i += 1
            else:
                j += 1
        out.append(plan)
    return out


@dataclass(frozen=True)
class CombinedExpressionReport:
    max_residual: float
    plans_checked: int
    constraint_agreement: bool


def verify_combined_expression(q, p, c, budget, *, samples: int = 100, seed: int = 0) -> CombinedExpressionReport:
    """Check that ``D[p, q] >= D[w, q(x)q] - lam`` and ``I(X, Y) <= lam`` admit the same plans.

    For plans ``w`` in ``Gamma[q, p]`` the difference
    ``D[w, q(x)q] - D[p, q]`` must equal ``I(X, Y)``. Plans are the product
    coupling, the constrained optimum and random mixtures of transport
    polytope vertices.
    """
    q, p, c, budget = as_distribution(q), as_distribution(p), as_cost(c), as_budget(budget)
    if q.space_size != p.space_size:
        raise DimensionError("combined expression needs q and p on the same space")
    if np.any(q.mass <= 0):
        raise SupportError("cross-information needs a strictly positive q")
    rng = np.random.default_rng(seed)
    vertices = transport_vertices(q, p, rng, max(4, q.space_size * 2))
    plans = [product(q, p).mass, solve_constrained_otp(q, p, c, budget).plan.mass]
    for _ in range(samples):
        weights = rng.dirichlet(np.ones(len(vertices)))
        plans.append(np.tensordot(weights, np.array(vertices), axes=1))

    d_pq = kl_divergence(p, q)
    worst = 0.0
    agree = True
    for w in plans:
        w = JointDistribution(w)
        # the scaling plan meets its marginals only to the solver tolerance,
        # so the identity is evaluated against the plan's own marginals
        rows, cols = w.row_marginal(), w.col_marginal()
        cross = cross_information(w, rows)
        info = mutual_information(w)
        worst = max(worst, abs((cross - kl_divergence(cols, rows)) - info))
        agree &= (info <= budget.lam) == (d_pq >= cross_information(w, q) - budget.lam)
    return CombinedExpressionReport(worst, len(plans), bool(agree))
