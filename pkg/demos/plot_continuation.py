"""
From the averaged problem to a periodic solution at lambda = 1
==============================================================

Reaction-diffusion on (0, pi) with four sine modes,
f = 0.5 u + cos(2 pi t) sin(xi) + 0.2 tanh(u_xi). The averaged equation has
the zero 0, the mean asymptotic slope 0.5 misses the spectrum {1, 4, 9, 16},
and the branch of fixed points is followed in lambda up to 1.
"""

import warnings

from transtraj.continuation import (check_resonance, continue_branch, estimate_r0,
                                    periodicity_defect, solve_averaged)
from transtraj.mild_solver import IntegratorConfig
from transtraj.nonlinearity import gradient_field
from transtraj.spectral import State, dirichlet_laplacian_1d

op = dirichlet_laplacian_1d(4)
field = gradient_field(op, slope=0.5, forcing=1.0, kappa=0.2, alpha=0.75)
cfg = IntegratorConfig(256)

print("resonant modes:", check_resonance(op, field).offending_modes)
x_hat = solve_averaged(op, field, State.zeros(4, 0.75))
print("averaged zero:", x_hat.coeffs)

with warnings.catch_warnings():
    warnings.simplefilter("error")  # a sign flip along the branch would stop the demo
    print("r0 estimate:", estimate_r0(op, field, [0.05, 0.5, 1.0], [0.5, 1, 2, 5, 10], cfg))
    branch = continue_branch(op, field, cfg, 0.05, x_hat)

for p in branch:
    print(f"lam={p.lam:.4f}  |x|_a={p.state.norm(op):.4e}  residual={p.residual:.1e}  sign={p.jac_sign:+d}")
print("periodicity defect:", periodicity_defect(op, field, cfg, branch[-1].state))
