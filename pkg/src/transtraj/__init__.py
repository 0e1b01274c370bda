"""Periodic solutions of u' = -A u + F(t, u) on fractional power spaces.

Averaged-equation solving, topological degree on Galerkin truncations and
continuation of fixed points of the translation operator in lambda.
"""

from .continuation import (BranchPoint, ResonanceReport, check_resonance, continue_branch,
                           estimate_r0, periodicity_defect, solve_averaged, verify_averaging,
                           verify_krasnoselskii)
from .degree import (Ball, DegreeResult, brouwer_degree, deg_alpha, deg_poincare,
                     verify_additivity, verify_mu_independence)
from .errors import *  # noqa: F401,F403
from .mild_solver import (IntegratorConfig, Trajectory, apriori_bound, evolve, poincare,
                          poincare_jacobian)
from .nonlinearity import (NemytskiiSpec, NonlinearField, asymptotic_defect, average, blend,
                           build_nemytskii, evaluate, field_from_config)
from .spectral import (SpectralOperator, State, dirichlet_laplacian_1d, frac_power_apply,
                       operator_from_config, phi1_apply, resolvent_apply, semigroup_apply,
                       smoothing_constant)

__version__ = "0.1.0"
