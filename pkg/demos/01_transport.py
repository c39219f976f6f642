"""Exact discrete transport: plan, value, dual potentials and a duality check.

Moving a fair coin onto a 3:1 coin under 0/1 cost costs exactly the mass that
has to change label, a quarter. The potentials certify that value.
"""
import numpy as np

from otkl import solve_otp, dual_value
from otkl.transport_lp import complementary_slackness_residual, dual_feasibility_violation

q = np.array([0.5, 0.5])
p = np.array([0.75, 0.25])
c = np.array([[0.0, 1.0], [1.0, 0.0]])

sol = solve_otp(q, p, c)
print("plan:\n", sol.plan.mass)
print("value K_c =", sol.value)
print("f (target potentials) =", sol.f + 0.0, " g (source potentials) =", sol.g + 0.0)
print("dual value p.f - q.g =", dual_value(sol, q, p))
print("dual feasibility violation =", dual_feasibility_violation(sol.f, sol.g, c))
print("complementary slackness residual =", complementary_slackness_residual(sol, c))

# a larger random instance: primal and dual values still agree to rounding
rng = np.random.default_rng(1)
q, p = rng.dirichlet(np.ones(20)), rng.dirichlet(np.ones(30))
c = rng.random((20, 30))
big = solve_otp(q, p, c)
print(f"20x30: value {big.value:.12f}, |primal - dual| = {abs(big.value - dual_value(big, q, p)):.2e}")
