"""Diagonal model of a positive sectorial operator.

Every operator here acts on coefficient vectors in its own eigenbasis, so the
semigroup, fractional powers, resolvents and phi-functions are all plain
elementwise functions of the spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, StructuralError

# Taylor branch radius for phi1; 4 terms keep the truncation below 1e-18 there.
PHI1_TAYLOR_RADIUS = 1e-4
# phi2 cancels twice, so it needs a wider series branch with more terms.
_PHI2_TAYLOR_RADIUS = 0.5
_PHI2_TERMS = 14


@dataclass(frozen=True)
class SpectralOperator:
    """Positive self-adjoint operator given by its sorted eigenvalues."""

    eigenvalues: np.ndarray
    label: str = "explicit"

    def __post_init__(self):
        mu = np.asarray(self.eigenvalues, dtype=float).ravel()
        if mu.size < 1:
            raise DomainError("operator needs at least one eigenvalue")
        if not np.all(np.isfinite(mu)) or np.any(mu <= 0.0):
            raise DomainError("eigenvalues must be finite and strictly positive")
        if np.any(np.diff(mu) < 0.0):
            raise DomainError("eigenvalues must be sorted nondecreasing")
        mu.setflags(write=False)
        object.__setattr__(self, "eigenvalues", mu)

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def omega(self) -> float:
        """Positivity margin: the smallest eigenvalue."""
        return float(self.eigenvalues[0])

    def weights(self, alpha: float) -> np.ndarray:
        """Per-mode factors mu_k**alpha of the alpha-norm."""
        return self.eigenvalues ** alpha

    def norm(self, coeffs, alpha: float):
        """alpha-norm of a coefficient array; reduces over the last axis."""
        return np.linalg.norm(np.asarray(coeffs) * self.weights(alpha), axis=-1)


@dataclass(frozen=True)
class State:
    """Point of X^alpha stored as eigen-coefficients."""

    coeffs: np.ndarray
    alpha: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha}")

    @property
    def dim(self) -> int:
        return self.coeffs.size

    @classmethod
    def zeros(cls, n: int, alpha: float = 0.0) -> "State":
        return cls(np.zeros(n), alpha)

    def norm(self, op: SpectralOperator) -> float:
        _check_dim(op, self)
        return float(op.norm(self.coeffs, self.alpha))

    def with_coeffs(self, coeffs) -> "State":
        return State(coeffs, self.alpha)

    def compatible(self, other: "State") -> bool:
        return self.dim == other.dim and self.alpha == other.alpha


def _check_dim(op: SpectralOperator, x: State) -> None:
    if x.dim != op.n:
        raise StructuralError(f"state has {x.dim} coefficients, operator has {op.n} modes")


def dirichlet_laplacian_1d(modes: int) -> SpectralOperator:
    """-d^2/dxi^2 on (0, pi) with Dirichlet conditions: eigenvalues k**2."""
    if modes < 1:
        raise DomainError("need at least one mode")
    k = np.arange(1, modes + 1, dtype=float)
    return SpectralOperator(k * k, label="dirichlet_laplacian_1d")


def operator_from_config(config: dict) -> SpectralOperator:
    """Build an operator from ``{"kind": ..., ...}`` (the inner "operator" object)."""
    kind = config.get("kind")
    if kind == "dirichlet_laplacian_1d":
        modes = config.get("modes")
        if not isinstance(modes, int) or modes < 1:
            raise ConfigError("operator.modes must be a positive integer")
        return dirichlet_laplacian_1d(modes)
    if kind == "explicit":
        ev = config.get("eigenvalues")
        if not ev:
            raise ConfigError("operator.eigenvalues must be a nonempty list")
        try:
            return SpectralOperator(np.asarray(ev, dtype=float), label=config.get("label", "explicit"))
        except DomainError as exc:
            raise ConfigError(f"operator.eigenvalues: {exc}") from exc
    raise ConfigError(f"unknown operator kind {kind!r}")


def semigroup_apply(op: SpectralOperator, t: float, x: State) -> State:
    """S(t)x = exp(-t A) x."""
    if t < 0:
        raise DomainError("semigroup time must be nonnegative")
    _check_dim(op, x)
    return x.with_coeffs(np.exp(-t * op.eigenvalues) * x.coeffs)


def frac_power_apply(op: SpectralOperator, beta: float, x: State) -> State:
    """A**beta x for any real beta."""
    _check_dim(op, x)
    return x.with_coeffs(op.eigenvalues ** beta * x.coeffs)


def resolvent_apply(op: SpectralOperator, mu: float, x: State) -> State:
    """(mu I + A)^{-1} x, defined for mu > -omega."""
    _check_dim(op, x)
    if not mu > -op.omega:
        raise DomainError(f"mu={mu} is not in the resolvent range (-{op.omega}, inf)")
    return x.with_coeffs(x.coeffs / (mu + op.eigenvalues))


def phi1(z):
    """phi1(z) = (exp(z) - 1)/z with phi1(0) = 1, elementwise."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < PHI1_TAYLOR_RADIUS
    zs = np.where(small, 1.0, z)
    direct = np.expm1(zs) / zs
    series = 1.0 + z / 2.0 + z * z / 6.0 + z ** 3 / 24.0
    return np.where(small, series, direct)


def phi2(z):
    """phi2(z) = (exp(z) - 1 - z)/z**2 with phi2(0) = 1/2, elementwise."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < _PHI2_TAYLOR_RADIUS
    zs = np.where(small, 1.0, z)
    direct = (np.expm1(zs) - zs) / (zs * zs)
    series = np.zeros_like(z)
    for j in range(_PHI2_TERMS - 1, -1, -1):
        series = series * z + 1.0 / math.factorial(j + 2)
    return np.where(small, series, direct)


def phi1_apply(op: SpectralOperator, h: float, lam: float, x: State) -> State:
    """phi1(-lam h A) x, the exponential-Euler weight of the Duhamel integral."""
    if h <= 0 or lam <= 0:
        raise DomainError("h and lambda must be positive")
    _check_dim(op, x)
    return x.with_coeffs(phi1(-lam * h * op.eigenvalues) * x.coeffs)


def smoothing_constant(op: SpectralOperator, alpha: float, t_grid) -> float:
    """max over t of t**alpha * ||A**alpha S(t)||.

    For a diagonal operator the norm is ``max_k mu_k**alpha exp(-t mu_k)``,
    so the result never exceeds ``(alpha/e)**alpha``.
    """
    t = np.asarray(t_grid, dtype=float).ravel()
    if t.size == 0 or np.any(t <= 0):
        raise DomainError("t_grid must be a nonempty list of positive times")
    s = t[:, None] * op.eigenvalues[None, :]
    vals = s ** alpha * np.exp(-s)
    return float(vals.max())


def sharp_smoothing_bound(alpha: float) -> float:
    """(alpha/e)**alpha, with the alpha -> 0 limit equal to 1."""
    if alpha == 0:
        return 1.0
    return (alpha / math.e) ** alpha
