"""KL-divergence geometry and its link to the transport dual.

Identities checked here, for strictly positive ``q`` and ``r`` on one space:

* law of cosines      D[p,q] = D[p,r] + D[r,q] - sum ln(q/r) (p - r)
* difference form     D[p,q] = D[p,r] - D[q,r] - sum ln(q/r) (p - q)
* symmetrized form    D[q,r] + D[r,q] = sum ln(q/r) (q - r)

Potentials ``f, g`` give exponential representations
``p = exp(beta f - kappa[beta f]) r`` and ``q = exp(alpha g - kappa[alpha g]) r``
with ``kappa[h] = ln sum r exp(h)``. In transport terms ``f`` is the potential
on the target side (paired with ``p``) and ``g`` on the source side (paired
with ``q``), matching :mod:`otkl.transport_lp`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, OTKLError, SupportError
from .measures import Distribution, as_cost, as_distribution, kl_divergence
from .transport_lp import dual_feasibility_violation, solve_otp


@dataclass(frozen=True)
class Residual:
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def _reference_mass(r) -> np.ndarray:
    r = np.asarray(getattr(r, "mass", r), dtype=float)
    if r.ndim != 1:
        raise DimensionError("reference must be a vector")
    if np.any(r <= 0):
        raise SupportError("reference measure must be strictly positive")
    return r


def _triple(p, q, r):
    p, q, r = as_distribution(p), as_distribution(q), as_distribution(r)
    if not p.space_size == q.space_size == r.space_size:
        raise DimensionError("p, q and r must live on the same space")
    if np.any(r.mass <= 0):
        raise SupportError("reference r must be strictly positive")
    if np.any(q.mass <= 0):
        raise SupportError("q must be strictly positive (D[r, q] and ln(q/r) need it)")
    return p, q, r


def law_of_cosines(p, q, r) -> Residual:
    p, q, r = _triple(p, q, r)
    log_qr = np.log(q.mass) - np.log(r.mass)
    rhs = kl_divergence(p, r) + kl_divergence(r, q) - float(log_qr @ (p.mass - r.mass))
    return Residual(kl_divergence(p, q), rhs)


@dataclass(frozen=True)
class KLMinusReport:
    difference_form: Residual
    symmetrized: Residual

    @property
    def residual(self) -> float:
        return max(self.difference_form.residual, self.symmetrized.residual)


def kl_minus_decomposition(p, q, r) -> KLMinusReport:
    p, q, r = _triple(p, q, r)
    log_qr = np.log(q.mass) - np.log(r.mass)
    diff = kl_divergence(p, r) - kl_divergence(q, r) - float(log_qr @ (p.mass - q.mass))
    sym = Residual(kl_divergence(q, r) + kl_divergence(r, q), float(log_qr @ (q.mass - r.mass)))
    return KLMinusReport(Residual(kl_divergence(p, q), diff), sym)


def cumulant(f, t: float, r) -> float:
    """``ln sum_x r(x) exp(t f(x))`` with max-shift stabilization."""
    r = _reference_mass(r)
    h = t * np.asarray(f, dtype=float)
    if h.shape != r.shape:
        raise DimensionError(f"potential shape {h.shape} != reference shape {r.shape}")
    top = float(h.max())
    return top + math.log(float(np.sum(r * np.exp(h - top))))


def exponential_representation(f, t: float, r) -> Distribution:
    """The distribution ``exp(t f - kappa[t f]) r``."""
    r = _reference_mass(r)
    h = t * np.asarray(f, dtype=float)
    return Distribution(r * np.exp(h - cumulant(f, t, r)))


@dataclass(frozen=True)
class CumulantIdentityReport:
    derivative: float
    finite_difference: float
    legendre: Residual

    @property
    def derivative_rel_error(self) -> float:
        scale = max(abs(self.derivative), 1e-12)
        return abs(self.finite_difference - self.derivative) / scale


def cumulant_identities(f, beta: float, r, step: float = 1e-5) -> CumulantIdentityReport:
    """Check ``d kappa[beta f]/d beta = E_p{f}`` and ``D[p, r] = beta E_p{f} - kappa[beta f]``.

    Here ``p = exp(beta f - kappa[beta f]) r`` and ``r`` should be a
    probability vector for the Legendre identity to read as stated.
    """
    f = np.asarray(f, dtype=float)
    r = _reference_mass(r)
    p = exponential_representation(f, beta, r)
    mean = float(p.mass @ f)
    fd = (cumulant(f, beta + step, r) - cumulant(f, beta - step, r)) / (2 * step)
    legendre = Residual(kl_divergence(p, Distribution(r)), beta * mean - cumulant(f, beta, r))
    return CumulantIdentityReport(mean, fd, legendre)


@dataclass(frozen=True, eq=False)
class PotentialPair:
    """Potentials with multipliers and a reference measure.

    ``p`` and ``q`` are the exponential representations of ``beta f`` and
    ``alpha g`` against ``reference``.
    """

    f: np.ndarray
    g: np.ndarray
    alpha: float
    beta: float
    reference: Distribution

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        g = np.asarray(self.g, dtype=float)
        ref = as_distribution(self.reference)
        if not f.shape == g.shape == ref.mass.shape:
            raise DimensionError("f, g and the reference must have the same length")
        if self.alpha < 0 or self.beta < 0:
            raise OTKLError("multipliers alpha and beta must be non-negative")
        if np.any(ref.mass <= 0):
            raise SupportError("reference measure must be strictly positive")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "reference", ref)

    @property
    def kappa_f(self) -> float:
        return cumulant(self.f, self.beta, self.reference)

    @property
    def kappa_g(self) -> float:
        return cumulant(self.g, self.alpha, self.reference)

    @property
    def p(self) -> Distribution:
        return exponential_representation(self.f, self.beta, self.reference)

    @property
    def q(self) -> Distribution:
        return exponential_representation(self.g, self.alpha, self.reference)


@dataclass(frozen=True)
class CumulantReport:
    kappa_f: float
    kappa_g: float
    epsilon: float
    j_c_eps: float


def epsilon_feasibility(pp: PotentialPair, c) -> CumulantReport:
    """Smallest ``eps >= 0`` with ``beta f(y) - alpha g(x) <= eps c(x, y)``, and ``J_{c,eps}``.

    ``eps`` is ``math.inf`` when some zero-cost pair has a positive left-hand
    side. ``J_{c,eps} = (beta E_p{f} - alpha E_q{g}) / eps``, taken as 0 for
    ``eps`` in ``{0, inf}``.
    """
    cost = as_cost(c).cost
    n = len(pp.f)
    if cost.shape != (n, n):
        raise DimensionError(f"cost shape {cost.shape} != ({n}, {n})")
    lhs = pp.beta * pp.f[None, :] - pp.alpha * pp.g[:, None]
    positive = lhs > 1e-12
    if np.any(positive & (cost <= 0)):
        eps = math.inf
    elif positive.any():
        eps = float(np.max(lhs[positive] / cost[positive]))
    else:
        eps = 0.0
    numerator = pp.beta * float(pp.p.mass @ pp.f) - pp.alpha * float(pp.q.mass @ pp.g)
    if eps == 0.0:
        if numerator > 1e-12:
            raise OTKLError(
                f"internal inconsistency: eps = 0 but beta E_p f - alpha E_q g = {numerator:.3g} > 0"
            )
        j = 0.0
    elif math.isinf(eps):
        j = 0.0
    else:
        j = numerator / eps
    return CumulantReport(pp.kappa_f, pp.kappa_g, eps, j)


@dataclass(frozen=True)
class KLBoundReport:
    kl: float
    bound: float
    epsilon: float
    k_c: float

    @property
    def slack(self) -> float:
        return self.bound - self.kl


def kl_upper_bound(pp: PotentialPair, c) -> KLBoundReport:
    """``D[p,q] <= eps K_c[p,q] - (kappa[beta f] - kappa[alpha g]) - alpha sum g (p - q)``."""
    c = as_cost(c)
    report = epsilon_feasibility(pp, c)
    if math.isinf(report.epsilon):
        raise OTKLError("epsilon is infinite; the bound is vacuous")
    p, q = pp.p, pp.q
    k_c = solve_otp(q, p, c).value
    bound = (
        report.epsilon * k_c
        - (report.kappa_f - report.kappa_g)
        - pp.alpha * float(pp.g @ (p.mass - q.mass))
    )
    return KLBoundReport(kl_divergence(p, q), bound, report.epsilon, k_c)


@dataclass(frozen=True, eq=False)
class Theorem2Report:
    """Equality ``D[p,q] = K_c - (kappa[f] - kappa[g]) - sum g (p - q)`` for one instance."""

    kl: float
    rhs: float
    k_c: float
    dual_value: float
    f: np.ndarray
    g: np.ndarray
    reference: np.ndarray
    cost: np.ndarray
    seed: int

    @property
    def residual(self) -> float:
        return abs(self.kl - self.rhs)


def theorem2_identity(f, g, r, c, seed: int = -1) -> Theorem2Report:
    """Evaluate both sides of the equality for unit multipliers.

    ``K_c`` comes from the transport solver, not from the potentials, so the
    two sides are computed independently.
    """
    pp = PotentialPair(f, g, 1.0, 1.0, r)
    p, q = pp.p, pp.q
    cost = as_cost(c)
    k_c = solve_otp(q, p, cost).value
    rhs = k_c - (pp.kappa_f - pp.kappa_g) - float(pp.g @ (p.mass - q.mass))
    dual = float(p.mass @ pp.f - q.mass @ pp.g)
    return Theorem2Report(
        kl=kl_divergence(p, q),
        rhs=rhs,
        k_c=k_c,
        dual_value=dual,
        f=pp.f,
        g=pp.g,
        reference=pp.reference.mass,
        cost=cost.cost,
        seed=seed,
    )


def _monotone_plan(q: np.ndarray, p: np.ndarray, g: np.ndarray, f: np.ndarray) -> np.ndarray:
    # northwest corner after sorting both sides by their potentials
    rows, cols = np.argsort(g, kind="stable"), np.argsort(f, kind="stable")
    s, d = q[rows].copy(), p[cols].copy()
    plan = np.zeros((len(q), len(p)))
    i = j = 0
    while i < len(s) and j < len(d):
        amount = min(s[i], d[j])
        plan[rows[i], cols[j]] = amount
        s[i] -= amount
        d[j] -= amount
        if i == len(s) - 1:
            j += 1
        elif j == len(d) - 1 or s[i] <= d[j]:
            i += 1
        else:
            j += 1
    return plan


def synthesize_dual_optimal(n: int, seed: int, delta: float = 0.1):
    """Instance ``(f, g, r, c)`` on which ``(f, g)`` is an optimal transport dual pair.

    Draw ``r, f, g``; set ``p, q`` to their exponential representations;
    build a feasible plan by the northwest-corner rule on potential-sorted
    atoms; make the cost tight (``f(y) - g(x)``) on that plan's support and
    ``delta`` looser elsewhere. Dual feasibility plus complementary
    slackness then certify optimality. ``f`` is shifted so that ``c >= 0``;
    the shift leaves ``p`` unchanged.
    """
    if n < 2:
        raise OTKLError("dual-optimal construction needs n >= 2")
    for attempt in range(100):
        rng = np.random.default_rng([seed, attempt])
        r = rng.dirichlet(np.ones(n))
        f = rng.normal(size=n)
        g = rng.normal(size=n)
        p = exponential_representation(f, 1.0, r).mass
        q = exponential_representation(g, 1.0, r).mass
        plan = _monotone_plan(q, p, g, f)
        support = plan > 0
        if not (np.allclose(plan.sum(axis=1), q, atol=1e-12) and np.allclose(plan.sum(axis=0), p, atol=1e-12)):
            continue
        f = f + max(0.0, -float((f[None, :] - g[:, None]).min()))
        tight = f[None, :] - g[:, None]
        cost = np.where(support, tight, tight + delta)
        if cost.min() < 0 or dual_feasibility_violation(f, g, cost) > 1e-12:
            continue
        return f, g, r, cost
    raise OTKLError(f"could not synthesize a dual-optimal instance for n={n}, seed={seed}")


def check_theorem2(n: int, seed: int, delta: float = 0.1) -> Theorem2Report:
    f, g, r, cost = synthesize_dual_optimal(n, seed, delta)
    return theorem2_identity(f, g, r, cost, seed=seed)


def kl_legendre(u, q, p) -> float:
    """``D*[u, q(x)p] = ln sum_xy q(x) p(y) exp(u(x, y))``, the convex conjugate of ``D[., q(x)p]``."""
    q, p = as_distribution(q), as_distribution(p)
    u = np.asarray(u, dtype=float)
    if u.shape != (q.space_size, p.space_size):
        raise DimensionError(f"u shape {u.shape} != ({q.space_size}, {p.space_size})")
    weight = np.outer(q.mass, p.mass)
    mask = weight > 0
    h = u[mask]
    top = float(h.max())
    return top + math.log(float(np.sum(weight[mask] * np.exp(h - top))))


def fenchel_gap(u, w, q, p) -> float:
    """``D*[u, q(x)p] - (sum w u - D[w, q(x)p])``; non-negative for every joint ``w``."""
    q, p = as_distribution(q), as_distribution(p)
    w = np.asarray(getattr(w, "mass", w), dtype=float)
    u = np.asarray(u, dtype=float)
    ref = np.outer(q.mass, p.mass).ravel()
    d = kl_divergence(Distribution(w.ravel()), Distribution(ref))
    return kl_legendre(u, q, p) - (float(np.sum(w * u)) - d)
