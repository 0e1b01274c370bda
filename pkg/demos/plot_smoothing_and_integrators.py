"""
Semigroup smoothing and the two ETD schemes
===========================================

The analytic semigroup of the Dirichlet Laplacian gains alpha derivatives at
the price of t**-alpha. We measure the constant and then check the order of
both time steppers on a forced scalar problem with a closed-form answer.
"""

import math

import numpy as np

from transtraj.mild_solver import IntegratorConfig, flow
from transtraj.nonlinearity import forced_linear_field
from transtraj.spectral import (SpectralOperator, dirichlet_laplacian_1d,
                                sharp_smoothing_bound, smoothing_constant)

op = dirichlet_laplacian_1d(16)
t = np.logspace(-4, 1, 200)
for alpha in (0.25, 0.5, 0.75):
    print(f"alpha={alpha}: measured {smoothing_constant(op, alpha, t):.6f}"
          f"  sharp {sharp_smoothing_bound(alpha):.6f}")

# u' = -u + 1 + cos(2 pi t) from u(0) = 0
w = 2 * math.pi
exact = (1 - math.exp(-1)) + (math.cos(w) + w * math.sin(w) - math.exp(-1)) / (1 + w * w)
scalar = SpectralOperator(np.array([1.0]))
field = forced_linear_field(scalar, a=1.0, b=1.0)

for scheme in ("exponential_euler", "etd_midpoint"):
    errs = [abs(flow(scalar, field, IntegratorConfig(n, scheme), np.zeros(1))[0] - exact)
            for n in (32, 64, 128, 256)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    print(scheme, "error ratios under halving:", np.round(ratios, 3))
