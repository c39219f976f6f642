"""Transport with a cap on mutual information, and its link to optimal channels.

At budget 0 the only admissible coupling is the product q x p. As the budget
grows the value falls until it meets the unconstrained transport value.
Transporting onto the optimal channel's own output marginal reproduces that
channel exactly.
"""
import numpy as np

from otkl import check_theorem1, solve_constrained_otp, solve_otp

rng = np.random.default_rng(3)
q, p = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
c = rng.random((4, 4))

print("unconstrained K_c =", solve_otp(q, p, c).value)
for lam in (0.0, 0.05, 0.2, 0.5, 1.0):
    sol = solve_constrained_otp(q, p, c, lam)
    print(f"lam={lam:.2f}  K_c(lam)={sol.value:.10f}  info={sol.info:.10f}  active={sol.active}")

report = check_theorem1(q, c, 0.3)
print(f"\nchannel vs transport onto its output marginal: gap={report.gap:.2e}, "
      f"plan TV={report.plan_distance:.2e}, equal={report.equal}")
