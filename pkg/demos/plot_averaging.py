"""
Small lambda: periodic solutions sit next to the averaged zero
==============================================================

For u' = lam(-u + 1 + cos 2 pi t) the averaged equation has the zero x_hat = 1
and the periodic solution starts at 1 + lam^2/(lam^2 + 4 pi^2). The computed
fixed points of the translation operator reproduce that distance.
"""

import math

import numpy as np

from transtraj.continuation import verify_averaging
from transtraj.degree import Ball
from transtraj.mild_solver import IntegratorConfig
from transtraj.nonlinearity import forced_linear_field
from transtraj.spectral import SpectralOperator

op = SpectralOperator(np.array([1.0]))
field = forced_linear_field(op, a=1.0, b=1.0)
rep = verify_averaging(op, field, Ball.at_origin(1, 3.0), [0.1, 0.05, 0.025], IntegratorConfig(512))

for p in rep.details["points"]:
    lam = p["lambda"]
    closed = lam ** 2 / (lam ** 2 + 4 * math.pi ** 2)
    print(f"lam={lam:<6g} distance {p['distance']:.3e}  closed form {closed:.3e}")
print("degrees at the two smallest lam:", rep.details["deg_poincare_small_lambda"])
print("passed:", rep.passed)
