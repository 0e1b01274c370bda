"""
Counting zeros with orientation
===============================

deg_alpha sums the signs of det(I - A^{-1} DF) over the zeros of -A x + F(x)
inside a ball. A cubic field has three zeros whose signs add up to +1, and
the same integer comes back for every resolvent shift mu and from the
translation operator over a short time.
"""

import numpy as np

from transtraj.degree import Ball, deg_alpha, deg_poincare, verify_additivity, verify_mu_independence
from transtraj.mild_solver import IntegratorConfig
from transtraj.nonlinearity import logistic_field
from transtraj.spectral import SpectralOperator, State

op = SpectralOperator(np.array([1.0]))
field = logistic_field(op, rate=2.0)
ball = Ball.at_origin(1, 2.0)

res = deg_alpha(op, field, ball)
print("degree", res.value)
for z in res.zeros:
    print(f"  zero {z.coeffs[0]:+.6f} sign {z.sign:+d}")

subs = [Ball(State([c]), 0.4) for c in (-1.0, 0.0, 1.0)]
print("additivity:", verify_additivity(op, field, ball, subs).details["parts"])

op2 = SpectralOperator(np.array([1.0, 4.0]))
f2 = logistic_field(op2, rate=2.0, alpha=0.5)
b2 = Ball.at_origin(2, 2.0, 0.5)
print("mu independence:", verify_mu_independence(op2, f2, b2, [0.0, 1.0, 10.0]).details["degrees"])

# short-time translation operator gives the same integer
for t in (1e-1, 1e-2, 1e-3):
    print(f"t={t:g}: deg(I - Phi_t) =", deg_poincare(op2, f2, IntegratorConfig(64), b2, t_end=t).value)
