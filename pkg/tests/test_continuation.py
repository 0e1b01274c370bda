import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transtraj import continuation as cont
from transtraj.continuation import (UnboundedBranchWarning, check_resonance, continue_branch,
                                    estimate_r0, fixed_point, periodicity_defect, solve_averaged,
                                    verify_averaging, verify_krasnoselskii, write_branch_csv)
from transtraj.degree import Ball
from transtraj.errors import (ContinuationStuck, DomainError, NonconvergenceError,
                              StructuralError, UnsupportedOperation)
from transtraj.mild_solver import IntegratorConfig
from transtraj.nonlinearity import (forced_linear_field, forced_tanh_field,
                                    gradient_field, linear_field, logistic_field)
from transtraj.spectral import SpectralOperator, State, dirichlet_laplacian_1d

SCALAR = SpectralOperator(np.array([1.0]))


def periodic_response(lam):
    """u(0) of the periodic solution of u' = lam(-u + 1 + cos 2 pi t)."""
    return 1.0 + lam ** 2 / (lam ** 2 + 4 * math.pi ** 2)


def test_solve_averaged_forced_linear():
    op = dirichlet_laplacian_1d(3)
    f = forced_linear_field(op, a=2.0, b=5.0, slope=0.5, mode=2)
    x = solve_averaged(op, f, State(np.zeros(3)))
    np.testing.assert_allclose(x.coeffs, [0.0, 2.0 / 3.5, 0.0], atol=1e-12)


def test_solve_averaged_nonconvergence():
    f = forced_linear_field(SCALAR, a=1.0, b=0.0, slope=1.0)  # x - (x + 1) = -1
    with pytest.raises(NonconvergenceError) as info:
        solve_averaged(SCALAR, f, State([0.0]))
    assert info.value.last_iterate is not None
    with pytest.raises(StructuralError):
        solve_averaged(SCALAR, f, State([0.0, 0.0]))
    with pytest.raises(DomainError):
        solve_averaged(SCALAR, f, State([np.nan]))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 20.0))
def test_resonance_exactly_at_eigenvalues(slope):
    op = dirichlet_laplacian_1d(4)
    rep = check_resonance(op, gradient_field(op, slope=slope), lambda_grid=[0.1, 1.0])
    hits = [k for k in range(1, 5) if abs(k * k - slope) <= 1e-8 * (1 + slope)]
    assert rep.offending_modes == hits
    assert rep.lambda_sweep_clear == (not hits)
    assert set(rep.per_lambda.values()) == {not hits}


@pytest.mark.parametrize("slope,modes", [(4.0, [2]), (9.0, [3]), (0.5, []), (4.5, [])])
def test_resonance_cases(slope, modes):
    op = dirichlet_laplacian_1d(4)
    rep = check_resonance(op, linear_field(op, slope, amplitude=1.0))
    assert rep.offending_modes == modes and rep.kernel_dim == len(modes)


def test_resonance_needs_asymptotic_slope():
    with pytest.raises(UnsupportedOperation):
        check_resonance(SCALAR, logistic_field(SCALAR))
    with pytest.raises(DomainError):
        check_resonance(SCALAR, linear_field(SCALAR, 0.5), lambda_grid=[0.0])


@pytest.mark.parametrize("lam", [0.05, 0.3, 1.0])
def test_fixed_point_matches_closed_form(lam):
    f = forced_linear_field(SCALAR, 1.0, 1.0)
    p = fixed_point(SCALAR, f, IntegratorConfig(512, lam=lam), State([1.0]))
    assert abs(p.state.coeffs[0] - periodic_response(lam)) < 1e-6 * lam
    assert p.residual <= 1e-10 and p.jac_sign == 1


def test_branch_reaches_one_with_closed_form_points(tmp_path):
    f = forced_linear_field(SCALAR, 1.0, 1.0)
    branch = continue_branch(SCALAR, f, IntegratorConfig(512), 0.05, State([1.0]), n_steps=10)
    assert branch[0].lam == 0.05 and branch[-1].lam == 1.0
    assert all(b.lam > a.lam for a, b in zip(branch, branch[1:]))
    for p in branch:
        assert abs(p.state.coeffs[0] - periodic_response(p.lam)) < 1e-6
    path = tmp_path / "b.csv"
    write_branch_csv(path, branch, SCALAR)
    lines = path.read_text().splitlines()
    assert lines[0] == "lambda,residual,jac_sign,alpha_norm,coeff_1"
    assert len(lines) == len(branch) + 1


def test_branch_step_growth():
    # a linear problem converges in one Newton step, so steps grow by 1.5 each time
    f = forced_linear_field(SCALAR, 1.0, 1.0)
    branch = continue_branch(SCALAR, f, IntegratorConfig(64), 0.05, State([1.0]), n_steps=20)
    steps = np.diff([p.lam for p in branch])
    np.testing.assert_allclose(steps[1:-1] / steps[:-2], 1.5, rtol=1e-12)


def test_branch_stuck_at_fold():
    # the middle averaged zero of this saddle-node family folds near lambda = 0.5
    f = forced_tanh_field(SCALAR, a=0.05, b=10.0, kappa=1.5)
    x_hat = solve_averaged(SCALAR, f, State([-0.1]))
    with pytest.raises(ContinuationStuck) as info:
        continue_branch(SCALAR, f, IntegratorConfig(128), 0.05, x_hat)
    branch = info.value.branch
    assert len(branch) >= 2 and 0.3 < branch[-1].lam < 0.9


def test_continue_branch_domain():
    f = forced_linear_field(SCALAR, 1.0, 1.0)
    with pytest.raises(DomainError):
        continue_branch(SCALAR, f, IntegratorConfig(), 0.0, State([1.0]))
    with pytest.raises(DomainError):
        continue_branch(SCALAR, f, IntegratorConfig(), 0.5, State([1.0]), n_steps=0)


def test_krasnoselskii_report():
    op = SpectralOperator(np.array([1.0, 4.0]))
    rep = verify_krasnoselskii(op, logistic_field(op, rate=2.0, alpha=0.5), Ball.at_origin(2, 2.0, 0.5),
                               [0.1, 0.01, 0.001], IntegratorConfig(64))
    assert rep.passed and rep.details["t_bar"] == 0.1 and rep.details["stable_count"] == 3
    with pytest.raises(UnsupportedOperation):
        verify_krasnoselskii(SCALAR, forced_linear_field(SCALAR, 1.0, 1.0), Ball.at_origin(1, 1.0), [0.1, 0.01])
    with pytest.raises(DomainError):
        verify_krasnoselskii(op, logistic_field(op, alpha=0.5), Ball.at_origin(2, 2.0, 0.5), [0.1])


def test_averaging_report():
    f = forced_linear_field(SCALAR, 1.0, 1.0)
    rep = verify_averaging(SCALAR, f, Ball.at_origin(1, 3.0), [0.2, 0.1, 0.05], IntegratorConfig(256))
    d = rep.details
    assert rep.passed and d["monotone_distances"] and d["deg_alpha_averaged"] == 1
    assert [p["lambda"] for p in d["points"]] == [0.2, 0.1, 0.05]


def test_estimate_r0_bounded_and_unbounded():
    op = dirichlet_laplacian_1d(2)
    f = forced_tanh_field(op, 0.5, 1.0, kappa=0.5, slope=0.5)
    r0 = estimate_r0(op, f, [0.1, 1.0], [0.5, 1.0, 2.0, 5.0], IntegratorConfig(64))
    p = fixed_point(op, f, IntegratorConfig(64), State(np.zeros(2)))
    assert r0 is not None and p.state.norm(op) < r0
    # resonant slope: the whole line through mode 1 is made of periodic solutions
    res = linear_field(op, 1.0)
    with pytest.warns(UnboundedBranchWarning):
        assert estimate_r0(op, res, [1.0], [0.5, 1.0], IntegratorConfig(32)) is None


def test_periodicity_defect_of_fixed_point():
    op = dirichlet_laplacian_1d(3)
    f = gradient_field(op, alpha=0.75)
    cfg = IntegratorConfig(128)
    p = fixed_point(op, f, cfg, State(np.zeros(3), 0.75))
    assert periodicity_defect(op, f, cfg, p.state) < 1e-9
    assert periodicity_defect(op, f, cfg, State(np.ones(3), 0.75)) > 1e-3


def test_max_workers_env(monkeypatch):
    monkeypatch.setenv("TT_THREADS", "3")
    assert cont.max_workers() == 3
    monkeypatch.setenv("TT_THREADS", "bogus")
    assert cont.max_workers() >= 1


def test_sweep_is_order_preserving_and_thread_independent(monkeypatch):
    op = SpectralOperator(np.array([1.0, 4.0]))
    f = logistic_field(op, rate=2.0, alpha=0.5)
    ball = Ball.at_origin(2, 2.0, 0.5)
    ts = [0.1, 0.01, 0.001]
    monkeypatch.setenv("TT_THREADS", "1")
    serial = verify_krasnoselskii(op, f, ball, ts, IntegratorConfig(32)).details["deg_poincare"]
    monkeypatch.setenv("TT_THREADS", "3")
    threaded = verify_krasnoselskii(op, f, ball, ts, IntegratorConfig(32)).details["deg_poincare"]
    assert serial == threaded
