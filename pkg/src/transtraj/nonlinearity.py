"""Time-periodic nonlinearities F(t, .): X^alpha -> X in coefficient form.

A field's ``func(t, c)`` accepts coefficient arrays of shape ``(..., N)`` and
returns an array of the same shape, so trajectories and finite-difference
Jacobians can be evaluated in batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy import fft

from .errors import ConfigError, DomainError, StructuralError, UnsupportedOperation
from .spectral import SpectralOperator, State

TWO_PI = 2.0 * math.pi
# samples used when a scalar time function has to be maximised or averaged
_TIME_SAMPLES = 512


@dataclass(frozen=True)
class NonlinearField:
    """A T-periodic map F(t, x) together with its declared metadata.

    ``growth_envelope`` and ``lipschitz_bound`` are claims about the field,
    checked by sampling in the tests; ``None`` means no global claim is made.
    ``asymptotic`` is the scalar slope f_inf(t) with F(t, x) ~ f_inf(t) x at
    infinity.
    """

    period: float
    alpha: float
    func: Callable[[float, np.ndarray], np.ndarray]
    growth_envelope: Optional[Callable[[float], float]] = None
    lipschitz_bound: Optional[float] = None
    asymptotic: Optional[Callable[[float], float]] = None
    autonomous: bool = False
    name: str = "custom"

    def __post_init__(self):
        if not self.period > 0:
            raise DomainError("period must be positive")
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError("alpha must lie in [0, 1)")

    def __call__(self, t, coeffs):
        return self.func(t, coeffs)


def _periodic_mean(fn, period, n_quad=_TIME_SAMPLES):
    ts = period * np.arange(n_quad) / n_quad
    return float(np.mean([fn(t) for t in ts]))


def _periodic_max(fn, period, n=_TIME_SAMPLES):
    ts = period * np.arange(n) / n
    return float(max(fn(t) for t in ts))


def evaluate(field: NonlinearField, t: float, x: State) -> State:
    """F(t, x) as an X-valued state (alpha tag 0)."""
    if x.alpha != field.alpha:
        raise StructuralError(f"field consumes alpha={field.alpha}, state has alpha={x.alpha}")
    return State(field.func(t, x.coeffs), 0.0)


def average_coeffs(field: NonlinearField, coeffs, n_quad: int) -> np.ndarray:
    """Periodic trapezoid rule for the time average of F(., c)."""
    if n_quad < 2:
        raise DomainError("n_quad must be at least 2")
    coeffs = np.asarray(coeffs, dtype=float)
    if field.autonomous:
        return np.asarray(field.func(0.0, coeffs), dtype=float)
    acc = np.zeros_like(coeffs)
    for j in range(n_quad):
        acc = acc + field.func(field.period * j / n_quad, coeffs)
    return acc / n_quad


def average(field: NonlinearField, x: State, n_quad: int = 64) -> State:
    """Averaged map (1/T) int_0^T F(tau, x) dtau on n_quad panels."""
    if x.alpha != field.alpha:
        raise StructuralError("alpha mismatch between field and state")
    return State(average_coeffs(field, x.coeffs, n_quad), 0.0)


def averaged_field(field: NonlinearField, n_quad: int = 64) -> NonlinearField:
    """The autonomous field x -> F_hat(x)."""
    return blend(field, 0.0, n_quad)


def blend(field: NonlinearField, mu: float, n_quad: int = 64) -> NonlinearField:
    """mu F(t, x) + (1 - mu) F_hat(x).

    The growth envelope becomes c(t) + mean(c), which dominates both parts.
    """
    if not 0.0 <= mu <= 1.0:
        raise DomainError(f"blend parameter must lie in [0, 1], got {mu}")
    if mu == 1.0 or field.autonomous:
        return field

    def func(t, c):
        avg = average_coeffs(field, c, n_quad)
        if mu == 0.0:
            return avg
        return mu * np.asarray(field.func(t, c)) + (1.0 - mu) * avg

    growth = None
    if field.growth_envelope is not None:
        c_mean = _periodic_mean(field.growth_envelope, field.period)
        growth = lambda t, _c=field.growth_envelope: _c(t) + c_mean

    asym = None
    if field.asymptotic is not None:
        f_mean = _periodic_mean(field.asymptotic, field.period, n_quad)
        f_inf = field.asymptotic
        asym = lambda t: mu * f_inf(t) + (1.0 - mu) * f_mean

    return replace(
        field,
        func=func,
        growth_envelope=growth,
        asymptotic=asym,
        autonomous=(mu == 0.0),
        name=f"blend({field.name}, {mu:g})",
    )


def asymptotic_defect(field: NonlinearField, op: SpectralOperator, x: State, t: float) -> float:
    """||F(t, x) - f_inf(t) x|| / ||x||_alpha."""
    if field.asymptotic is None:
        raise UnsupportedOperation(f"field {field.name!r} has no asymptotic linear part")
    r = x.norm(op)
    if r <= 0:
        raise DomainError("asymptotic defect needs a nonzero state")
    fx = evaluate(field, t, x).coeffs
    return float(np.linalg.norm(fx - field.asymptotic(t) * x.coeffs) / r)


# ---------------------------------------------------------------------------
# Nemytskii operators on (0, pi) with the sine basis


class SineTransform:
    """Sine-series transform between N modes and M interior nodes of (0, pi).

    Nodes are ``xi_j = j pi / (M + 1)``; analysis is the DST-I, which is the
    trapezoid rule for ``(2/pi) int g(xi) sin(k xi) dxi``.
    """

    def __init__(self, n_modes: int, n_nodes: int):
        if n_nodes < n_modes:
            raise DomainError("need at least as many nodes as modes")
        self.n_modes = n_modes
        self.n_nodes = n_nodes
        j = np.arange(1, n_nodes + 1)
        k = np.arange(1, n_modes + 1)
        self.nodes = j * math.pi / (n_nodes + 1)
        self.sin_matrix = np.sin(np.outer(self.nodes, k))
        self.dcos_matrix = np.cos(np.outer(self.nodes, k)) * k

    def to_physical(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        pad = [(0, 0)] * (coeffs.ndim - 1) + [(0, self.n_nodes - self.n_modes)]
        return fft.dst(np.pad(coeffs, pad), type=1, axis=-1) / 2.0

    def derivative(self, coeffs):
        return np.asarray(coeffs, dtype=float) @ self.dcos_matrix.T

    def to_coeffs(self, samples):
        y = fft.dst(np.asarray(samples, dtype=float), type=1, axis=-1)
        return y[..., : self.n_modes] / (self.n_nodes + 1)

    @property
    def analysis_norm(self) -> float:
        """Spectral norm of the sample -> coefficient map."""
        return math.sqrt(2.0 / (self.n_nodes + 1))


@dataclass(frozen=True)
class NemytskiiSpec:
    """Pointwise map f(t, xi, s, y) plus the data needed to discretise it.

    ``f`` must broadcast over arrays. ``growth`` is m(t) with
    |f| <= m(t)(1 + |s|); ``lipschitz`` is the constant L of
    |f(s1, y1) - f(s2, y2)| <= L(|s1 - s2| + |y1 - y2|).
    """

    f: Callable
    period: float = 1.0
    n_nodes: Optional[int] = None
    growth: Optional[Callable[[float], float]] = None
    lipschitz: Optional[float] = None
    f_inf: Optional[Callable[[float], float]] = None
    autonomous: bool = False
    name: str = "nemytskii"


def build_nemytskii(spec: NemytskiiSpec, op: SpectralOperator, alpha: float) -> NonlinearField:
    """Discrete Nemytskii operator u -> f(t, xi, u(xi), u'(xi)).

    Coefficients are synthesised on the collocation nodes together with the
    sine-series derivative, ``f`` is applied pointwise, and the result is
    projected back onto the first N modes.
    """
    if not 0.5 < alpha < 1.0:
        raise DomainError(f"gradient-dependent fields need alpha in (1/2, 1), got {alpha}")
    n = op.n
    expected = np.arange(1, n + 1, dtype=float) ** 2
    if not np.array_equal(op.eigenvalues, expected):
        raise StructuralError("Nemytskii transform needs the Dirichlet Laplacian on (0, pi)")
    m = spec.n_nodes if spec.n_nodes is not None else 2 * n
    if m < 2 * n:
        raise DomainError(f"need n_nodes >= 2N = {2 * n} for anti-aliasing, got {m}")
    tr = SineTransform(n, m)
    xi = tr.nodes
    f = spec.f

    def func(t, c):
        c = np.asarray(c, dtype=float)
        u = tr.to_physical(c)
        du = tr.derivative(c)
        g = np.broadcast_to(f(t, xi, u, du), u.shape)
        return tr.to_coeffs(g)

    inv_w = op.weights(alpha) ** -1.0
    s_norm = np.linalg.norm(tr.sin_matrix * inv_w, 2)
    d_norm = np.linalg.norm(tr.dcos_matrix * inv_w, 2)
    p_norm = tr.analysis_norm

    growth = None
    if spec.growth is not None:
        scale = p_norm * max(math.sqrt(m), s_norm)
        growth = lambda t, _m=spec.growth: scale * _m(t)
    lip = None
    if spec.lipschitz is not None:
        lip = p_norm * spec.lipschitz * (s_norm + d_norm)

    return NonlinearField(
        period=spec.period,
        alpha=alpha,
        func=func,
        growth_envelope=growth,
        lipschitz_bound=lip,
        asymptotic=spec.f_inf,
        autonomous=spec.autonomous,
        name=spec.name,
    )


# ---------------------------------------------------------------------------
# registry


def _harmonic(a, b, period):
    """t -> a + b cos(2 pi t / T)."""
    return lambda t: a + b * math.cos(TWO_PI * t / period)


def zero_field(op, period=1.0, alpha=0.0):
    return NonlinearField(
        period, alpha, lambda t, c: np.zeros_like(np.asarray(c, dtype=float)),
        growth_envelope=lambda t: 0.0, lipschitz_bound=0.0,
        asymptotic=lambda t: 0.0, autonomous=True, name="zero",
    )


def constant_field(op, values, period=1.0, alpha=0.0):
    """F(t, x) = x0, a constant vector."""
    x0 = np.asarray(values, dtype=float).ravel()
    if x0.size != op.n:
        raise StructuralError(f"constant field has {x0.size} entries, operator has {op.n} modes")
    size = float(np.linalg.norm(x0))

    def func(t, c):
        return np.broadcast_to(x0, np.shape(c)).copy()

    return NonlinearField(
        period, alpha, func, growth_envelope=lambda t: size, lipschitz_bound=0.0,
        asymptotic=lambda t: 0.0, autonomous=True, name="constant",
    )


def linear_field(op, slope, amplitude=0.0, period=1.0, alpha=0.0):
    """F(t, x) = f_inf(t) x with f_inf(t) = slope + amplitude cos(2 pi t / T)."""
    f_inf = _harmonic(slope, amplitude, period)
    inv = op.omega ** -alpha

    def func(t, c):
        return f_inf(t) * np.asarray(c, dtype=float)

    return NonlinearField(
        period, alpha, func,
        growth_envelope=lambda t: abs(f_inf(t)) * inv,
        lipschitz_bound=(abs(slope) + abs(amplitude)) * inv,
        asymptotic=f_inf, autonomous=(amplitude == 0.0), name="linear",
    )


def forced_linear_field(op, a, b, slope=0.0, mode=1, period=1.0, alpha=0.0):
    """F(t, x) = slope x + (a + b cos(2 pi t / T)) e_mode."""
    if not 1 <= mode <= op.n:
        raise DomainError(f"forcing mode {mode} outside 1..{op.n}")
    e = np.zeros(op.n)
    e[mode - 1] = 1.0
    force = _harmonic(a, b, period)
    inv = op.omega ** -alpha

    def func(t, c):
        return slope * np.asarray(c, dtype=float) + force(t) * e

    return NonlinearField(
        period, alpha, func,
        growth_envelope=lambda t: max(abs(slope) * inv, abs(force(t))),
        lipschitz_bound=abs(slope) * inv,
        asymptotic=lambda t: slope, autonomous=(b == 0.0), name="forced_linear",
    )


def logistic_field(op, rate=1.0, period=1.0, alpha=0.0):
    """F(x)_k = rate x_k - x_k**3, acting mode by mode.

    Cubic growth: no global growth envelope or asymptotic slope is declared.
    """

    def func(t, c):
        c = np.asarray(c, dtype=float)
        return rate * c - c ** 3

    return NonlinearField(period, alpha, func, autonomous=True, name="logistic")


def forced_tanh_field(op, a=0.0, b=0.0, kappa=1.0, slope=0.0, mode=1, period=1.0, alpha=0.0):
    """F(t, x) = slope x + (a + b cos(2 pi t / T)) e_mode + kappa tanh(x) modewise."""
    if not 1 <= mode <= op.n:
        raise DomainError(f"forcing mode {mode} outside 1..{op.n}")
    e = np.zeros(op.n)
    e[mode - 1] = 1.0
    force = _harmonic(a, b, period)
    inv = op.omega ** -alpha
    sat = abs(kappa) * math.sqrt(op.n)

    def func(t, c):
        c = np.asarray(c, dtype=float)
        return slope * c + force(t) * e + kappa * np.tanh(c)

    return NonlinearField(
        period, alpha, func,
        growth_envelope=lambda t: max(abs(slope) * inv, abs(force(t)) + sat),
        lipschitz_bound=(abs(slope) + abs(kappa)) * inv,
        asymptotic=lambda t: slope, autonomous=(b == 0.0), name="forced_tanh",
    )


def gradient_field(op, slope=0.5, slope_amplitude=0.0, forcing=1.0, kappa=0.2,
                   period=1.0, alpha=0.75, n_nodes=None):
    """Nemytskii field of f = f_inf(t) s + forcing cos(2 pi t/T) sin(xi) + kappa tanh(y)."""
    f_inf = _harmonic(slope, slope_amplitude, period)

    def f(t, xi, s, y):
        return f_inf(t) * s + forcing * math.cos(TWO_PI * t / period) * np.sin(xi) + kappa * np.tanh(y)

    spec = NemytskiiSpec(
        f=f,
        period=period,
        n_nodes=n_nodes,
        growth=lambda t: max(abs(f_inf(t)), abs(forcing) + abs(kappa)),
        lipschitz=max(abs(slope) + abs(slope_amplitude), abs(kappa)),
        f_inf=f_inf,
        autonomous=(slope_amplitude == 0.0 and forcing == 0.0),
        name="gradient",
    )
    return build_nemytskii(spec, op, alpha)


REGISTRY = {
    "zero": zero_field,
    "constant": constant_field,
    "linear": linear_field,
    "forced_linear": forced_linear_field,
    "logistic": logistic_field,
    "forced_tanh": forced_tanh_field,
    "gradient": gradient_field,
}


def field_from_config(config: dict, op: SpectralOperator) -> NonlinearField:
    """Build a field from ``{"kind": ..., "params": {...}, "period": T, "alpha": a}``."""
    kind = config.get("kind")
    if kind not in REGISTRY:
        raise ConfigError(f"unknown field kind {kind!r}; known: {sorted(REGISTRY)}")
    params = dict(config.get("params", {}))
    period = float(config.get("period", 1.0))
    alpha = float(config.get("alpha", 0.0))
    try:
        return REGISTRY[kind](op, period=period, alpha=alpha, **params)
    except TypeError as exc:
        raise ConfigError(f"field.params for kind {kind!r}: {exc}") from exc
    except (DomainError, StructuralError) as exc:
        raise ConfigError(f"field: {exc}") from exc


def sup_growth(field: NonlinearField) -> float:
    """Sampled supremum of the growth envelope over one period."""
    if field.growth_envelope is None:
        raise UnsupportedOperation(f"field {field.name!r} declares no growth envelope")
    return _periodic_max(field.growth_envelope, field.period)


def mean_asymptotic_slope(field: NonlinearField, n_quad: int = _TIME_SAMPLES) -> float:
    """(1/T) int_0^T f_inf(t) dt by the periodic trapezoid rule."""
    if field.asymptotic is None:
        raise UnsupportedOperation(f"field {field.name!r} has no asymptotic linear part")
    return _periodic_mean(field.asymptotic, field.period, n_quad)


def field_jacobian(field: NonlinearField, t: float, coeffs, alpha_weights=None) -> np.ndarray:
    """Central-difference Jacobian of c -> F(t, c), all columns in one batch."""
    c = np.asarray(coeffs, dtype=float)
    n = c.size
    size = np.linalg.norm(c if alpha_weights is None else c * alpha_weights)
    h = np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + size)
    eye = np.eye(n)
    out = np.asarray(field.func(t, np.vstack([c + h * eye, c - h * eye])))
    return (out[:n] - out[n:]).T / (2.0 * h)
