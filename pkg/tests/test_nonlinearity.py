import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transtraj.errors import ConfigError, DomainError, StructuralError, UnsupportedOperation
from transtraj.nonlinearity import (REGISTRY, NemytskiiSpec, SineTransform, asymptotic_defect,
                                    average, averaged_field, blend, build_nemytskii,
                                    constant_field, evaluate, field_from_config, field_jacobian,
                                    forced_linear_field, forced_tanh_field, gradient_field,
                                    linear_field, logistic_field, mean_asymptotic_slope,
                                    sup_growth, zero_field)
from transtraj.spectral import SpectralOperator, State, dirichlet_laplacian_1d

OP = dirichlet_laplacian_1d(4)


def enveloped_fields():
    return [
        zero_field(OP),
        constant_field(OP, [1.0, -2.0, 0.5, 0.0], alpha=0.25),
        linear_field(OP, 0.7, amplitude=0.3, alpha=0.5),
        forced_linear_field(OP, 0.5, 2.0, slope=-1.5, mode=2, alpha=0.25),
        forced_tanh_field(OP, 0.1, 3.0, kappa=1.5, slope=0.5, alpha=0.5),
        gradient_field(OP, slope=0.5, forcing=1.0, kappa=0.2, alpha=0.75),
        gradient_field(OP, slope=-2.0, slope_amplitude=1.0, forcing=0.5, kappa=1.0, alpha=0.6),
    ]


FIELDS = enveloped_fields()
vectors = st.lists(st.floats(-50, 50), min_size=4, max_size=4).map(np.array)


@settings(max_examples=60)
@given(st.sampled_from(range(len(FIELDS))), st.floats(0, 1), vectors)
def test_growth_envelope_holds(i, t, c):
    f = FIELDS[i]
    lhs = np.linalg.norm(f(t, c))
    assert lhs <= f.growth_envelope(t) * (1.0 + OP.norm(c, f.alpha)) * (1 + 1e-12) + 1e-12


@settings(max_examples=60)
@given(st.sampled_from(range(len(FIELDS))), st.floats(0, 1), vectors, vectors)
def test_lipschitz_bound_holds(i, t, a, b):
    f = FIELDS[i]
    lhs = np.linalg.norm(f(t, a) - f(t, b))
    assert lhs <= f.lipschitz_bound * OP.norm(a - b, f.alpha) * (1 + 1e-12) + 1e-12


@settings(max_examples=30)
@given(st.sampled_from(range(len(FIELDS))), vectors)
def test_fields_accept_batches(i, c):
    f = FIELDS[i]
    batch = np.stack([c, 2 * c, -c])
    out = f(0.3, batch)
    for row, x in zip(out, batch):
        np.testing.assert_allclose(row, f(0.3, x), rtol=1e-13, atol=1e-13)


def test_sine_transform_round_trip():
    tr = SineTransform(5, 10)
    c = np.array([1.0, -0.5, 0.25, 2.0, 0.0])
    np.testing.assert_allclose(tr.to_coeffs(tr.to_physical(c)), c, atol=1e-14)
    # synthesis matches the sine series at the nodes
    direct = np.sin(np.outer(tr.nodes, np.arange(1, 6))) @ c
    np.testing.assert_allclose(tr.to_physical(c), direct, atol=1e-13)
    np.testing.assert_allclose(tr.derivative(c), np.cos(np.outer(tr.nodes, np.arange(1, 6))) @ (np.arange(1, 6) * c),
                               atol=1e-13)


def test_analysis_norm_is_spectral_norm():
    tr = SineTransform(3, 12)
    P = np.array([tr.to_coeffs(e) for e in np.eye(12)]).T
    assert np.linalg.norm(P, 2) == pytest.approx(tr.analysis_norm, rel=1e-12)


@pytest.mark.parametrize("m", [8, 32, 128])
def test_gradient_projection_of_sine(m):
    # f = u' with u = sin: (2/pi) int cos(xi) sin(k xi) is 8/(3 pi) for k = 2,
    # 16/(15 pi) for k = 4 and 0 for odd k. cos has a discontinuous odd
    # extension, so the trapezoid projection is only O(k/M^2) accurate.
    op = dirichlet_laplacian_1d(4)
    spec = NemytskiiSpec(f=lambda t, xi, s, y: y, n_nodes=m, autonomous=True)
    out = build_nemytskii(spec, op, 0.75)(0.0, np.array([1.0, 0, 0, 0]))
    exact = np.array([0.0, 8.0 / (3.0 * math.pi), 0.0, 16.0 / (15.0 * math.pi)])
    k = np.arange(1, 5)
    assert np.all(np.abs(out - exact) <= 1.2 * k / m ** 2)
    assert np.all(np.abs(out[::2]) < 1e-10)


def test_nemytskii_preconditions():
    spec = NemytskiiSpec(f=lambda t, xi, s, y: s)
    with pytest.raises(DomainError):
        build_nemytskii(spec, OP, 0.5)
    with pytest.raises(StructuralError):
        build_nemytskii(spec, SpectralOperator(np.array([1.0, 2.0])), 0.75)
    with pytest.raises(DomainError):
        build_nemytskii(NemytskiiSpec(f=spec.f, n_nodes=7), OP, 0.75)


def test_linear_nemytskii_is_diagonal():
    f = build_nemytskii(NemytskiiSpec(f=lambda t, xi, s, y: 3.0 * s), OP, 0.75)
    c = np.array([0.3, -1.0, 2.0, 0.5])
    np.testing.assert_allclose(f(0.0, c), 3.0 * c, atol=1e-13)


def test_evaluate_checks_alpha():
    f = logistic_field(OP, alpha=0.5)
    assert evaluate(f, 0.0, State(np.ones(4), 0.5)).alpha == 0.0
    with pytest.raises(StructuralError):
        evaluate(f, 0.0, State(np.ones(4), 0.25))


def test_average_of_forced_linear():
    f = forced_linear_field(OP, a=0.5, b=2.0, slope=0.25, mode=3)
    x = State(np.array([1.0, 2.0, 3.0, 4.0]))
    expected = 0.25 * x.coeffs + np.array([0, 0, 0.5, 0])
    np.testing.assert_allclose(average(f, x, 16).coeffs, expected, atol=1e-14)


def test_average_of_gradient_field_drops_forcing():
    f = gradient_field(OP)
    c = np.array([0.2, -0.1, 0.05, 0.3])
    expected = gradient_field(OP, forcing=0.0)(0.0, c)
    np.testing.assert_allclose(averaged_field(f)(0.7, c), expected, atol=1e-14)


def test_blend_endpoints_and_domain():
    f = forced_linear_field(OP, 1.0, 1.0)
    assert blend(f, 1.0) is f
    g = blend(f, 0.5)
    c = np.ones(4)
    np.testing.assert_allclose(g(0.0, c), 0.5 * f(0.0, c) + 0.5 * average(f, State(c)).coeffs)
    assert not g.autonomous and blend(f, 0.0).autonomous
    with pytest.raises(DomainError):
        blend(f, 1.5)


def test_blend_envelope_dominates():
    f = forced_tanh_field(OP, 0.0, 3.0, kappa=0.5, slope=1.0)
    g = blend(f, 0.3)
    rng = np.random.default_rng(1)
    for _ in range(50):
        t, c = rng.uniform(), rng.normal(size=4) * 10
        assert np.linalg.norm(g(t, c)) <= g.growth_envelope(t) * (1 + OP.norm(c, 0.0))


def test_asymptotic_slope_and_defect():
    f = gradient_field(OP, slope=0.5, slope_amplitude=0.25)
    assert mean_asymptotic_slope(f) == pytest.approx(0.5, abs=1e-14)
    x = State(np.array([1.0, 0.5, -0.3, 0.2]), 0.75)
    far = State(1e6 * x.coeffs, 0.75)
    assert asymptotic_defect(f, OP, far, 0.2) < 1e-4 * asymptotic_defect(f, OP, x, 0.2)
    with pytest.raises(UnsupportedOperation):
        asymptotic_defect(logistic_field(OP), OP, State(np.ones(4)), 0.0)
    with pytest.raises(UnsupportedOperation):
        sup_growth(logistic_field(OP))


def test_field_jacobian_matches_analytic():
    f = logistic_field(OP, rate=2.0)
    c = np.array([0.5, -1.0, 0.0, 2.0])
    np.testing.assert_allclose(field_jacobian(f, 0.0, c), np.diag(2.0 - 3 * c ** 2), atol=1e-8)


def test_registry_and_config():
    assert set(REGISTRY) == {"zero", "constant", "linear", "forced_linear", "logistic",
                             "forced_tanh", "gradient"}
    f = field_from_config({"kind": "linear", "params": {"slope": 2.0}, "alpha": 0.25}, OP)
    assert f.alpha == 0.25 and f.autonomous
    for bad in ({"kind": "nope"}, {"kind": "linear", "params": {"bogus": 1}},
                {"kind": "gradient", "alpha": 0.25}):
        with pytest.raises(ConfigError):
            field_from_config(bad, OP)
