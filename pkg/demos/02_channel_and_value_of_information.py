"""Optimal channels under an information budget and the value of information.

For a fair binary source with Hamming cost the minimal expected cost at a
budget of lam nats has a closed form: the distortion D solving
ln 2 - h(D) = lam. The solver's bisection finds the Lagrange multiplier
beta = ln((1 - D) / D), and V(lam) grows with slope 1/beta.
"""
import math

import numpy as np

from otkl import solve_ocp, value_of_information

q = np.array([0.5, 0.5])
c = np.array([[0.0, 1.0], [1.0, 0.0]])

for lam in (0.0, 0.1, 0.3, 0.5, math.log(2)):
    sol = solve_ocp(q, c, lam)
    print(f"lam={lam:.4f}  R_c={sol.value:.10f}  info={sol.info:.10f}  beta={sol.beta:.6g}")

print("\nvalue of information on a grid (V, and 1/beta as the local slope):")
for pt in value_of_information(q, c, np.linspace(0.05, 0.65, 7)):
    print(f"lam={pt.lam:.3f}  V={pt.v:.8f}  1/beta={1 / pt.beta:.6f}")
