"""Exponential time differencing for u' = -lam A u + lam F(t, u).

Both schemes treat the diagonal linear part exactly and only approximate the
Duhamel integral of the nonlinearity, so the discrete flow of ``F = 0`` is the
semigroup itself.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import DivergenceError, DomainError, StructuralError, UnsupportedOperation
from .nonlinearity import NonlinearField, sup_growth
from .spectral import SpectralOperator, State, phi1, phi2, sharp_smoothing_bound

SCHEMES = ("exponential_euler", "etd_midpoint")
DIVERGENCE_NORM = 1e8


@dataclass(frozen=True)
class IntegratorConfig:
    steps_per_period: int = 256
    scheme: str = "etd_midpoint"
    lam: float = 1.0

    def __post_init__(self):
        if int(self.steps_per_period) != self.steps_per_period or self.steps_per_period < 4:
            raise DomainError("steps_per_period must be an integer >= 4")
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not 0.0 < self.lam <= 1.0:
            raise DomainError(f"lambda must lie in (0, 1], got {self.lam}")

    def with_lambda(self, lam: float) -> "IntegratorConfig":
        return IntegratorConfig(self.steps_per_period, self.scheme, lam)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    coeffs: np.ndarray  # shape (n_t + 1, N)
    alpha: float
    lam: float
    scheme: str

    @property
    def states(self) -> List[State]:
        return [State(c, self.alpha) for c in self.coeffs]

    def alpha_norms(self, op: SpectralOperator) -> np.ndarray:
        return op.norm(self.coeffs, self.alpha)

    def to_csv(self, path, op: SpectralOperator) -> None:
        """Columns t, coeff_1..coeff_N, alpha_norm."""
        n = self.coeffs.shape[1]
        norms = self.alpha_norms(op)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"coeff_{k}" for k in range(1, n + 1)] + ["alpha_norm"])
            for t, c, r in zip(self.times, self.coeffs, norms):
                w.writerow([fmt(t)] + [fmt(v) for v in c] + [fmt(r)])


def fmt(value) -> str:
    """17 significant digits: enough for a bit-exact round trip."""
    return "%.17g" % float(value)


class _Stepper:
    """Precomputed ETD weights for a fixed step h."""

    def __init__(self, op, field, lam, h, scheme):
        self.field = field
        self.h = h
        self.scheme = scheme
        z = -lam * h * op.eigenvalues
        self.decay = np.exp(z)
        if scheme == "exponential_euler":
            self.w = lam * h * phi1(z)
        else:
            zh = 0.5 * z
            self.decay_half = np.exp(zh)
            self.w_half = lam * 0.5 * h * phi1(zh)
            p1, p2 = phi1(z), phi2(z)
            self.b1 = lam * h * (p1 - 2.0 * p2)
            self.b2 = lam * h * 2.0 * p2

    def __call__(self, t, u):
        f = self.field.func
        n0 = f(t, u)
        if self.scheme == "exponential_euler":
            return self.decay * u + self.w * n0
        mid = self.decay_half * u + self.w_half * n0
        return self.decay * u + self.b1 * n0 + self.b2 * f(t + 0.5 * self.h, mid)


def _check(op, field, x0):
    if x0.dim != op.n:
        raise StructuralError(f"state has {x0.dim} coefficients, operator has {op.n} modes")
    if x0.alpha != field.alpha:
        raise StructuralError(f"state alpha {x0.alpha} differs from field alpha {field.alpha}")


def _grid(field, cfg, t_end, n_steps):
    if t_end is None:
        t_end = field.period
    if n_steps is None:
        n_steps = cfg.steps_per_period
    if t_end <= 0 or n_steps < 1:
        raise DomainError("integration horizon and step count must be positive")
    return float(t_end), int(n_steps)


def flow(op, field, cfg, coeffs, t_end=None, n_steps=None, keep=False, strict=True):
    """Integrate a batch of coefficient vectors of shape (..., N).

    Returns the final coefficients, or the whole history (n_steps + 1, ...)
    when ``keep`` is set. A non-finite state or an alpha-norm above
    ``DIVERGENCE_NORM`` raises DivergenceError; with ``strict=False`` the
    offending rows are set to NaN instead and the rest of the batch goes on.
    """
    t_end, n_steps = _grid(field, cfg, t_end, n_steps)
    h = t_end / n_steps
    step = _Stepper(op, field, cfg.lam, h, cfg.scheme)
    u = np.array(coeffs, dtype=float)
    hist = [u] if keep else None
    weights = op.weights(field.alpha)
    for n in range(n_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            u = step(n * h, u)
            size = np.linalg.norm(u * weights, axis=-1)
        bad = ~np.isfinite(size) | (size > DIVERGENCE_NORM)
        if not strict:
            u = np.where(bad[..., None], np.nan, u)
        elif np.any(bad):
            rows = np.flatnonzero(np.atleast_1d(bad))
            err = DivergenceError(f"trajectory diverged at step {n + 1} of {n_steps}", step=n + 1)
            err.rows = rows
            raise err
        if keep:
            hist.append(u)
    return np.stack(hist) if keep else u


def evolve(op: SpectralOperator, field: NonlinearField, cfg: IntegratorConfig, x0: State,
           t_end=None, n_steps=None) -> Trajectory:
    """Discrete mild solution on [0, t_end] (default one period, steps_per_period steps)."""
    _check(op, field, x0)
    t_end, n_steps = _grid(field, cfg, t_end, n_steps)
    hist = flow(op, field, cfg, x0.coeffs, t_end, n_steps, keep=True)
    times = t_end * np.arange(n_steps + 1) / n_steps
    return Trajectory(times, hist, x0.alpha, cfg.lam, cfg.scheme)


def poincare(op, field, cfg, x0: State, t_end=None) -> State:
    """Translation operator x -> u(t_end; x), t_end defaulting to the period."""
    _check(op, field, x0)
    return x0.with_coeffs(flow(op, field, cfg, x0.coeffs, t_end))


def fd_step(op, alpha, coeffs) -> float:
    return math.sqrt(np.finfo(float).eps) * (1.0 + float(op.norm(coeffs, alpha)))


def poincare_jacobian(op, field, cfg, x: State, t_end=None, method="forward") -> np.ndarray:
    """Finite-difference Jacobian of the translation operator at x.

    All perturbed trajectories are integrated as one batch.
    """
    _check(op, field, x)
    n = op.n
    h = fd_step(op, x.alpha, x.coeffs)
    eye = np.eye(n)
    if method == "forward":
        batch = np.vstack([x.coeffs[None, :], x.coeffs + h * eye])
    elif method == "central":
        batch = np.vstack([x.coeffs - h * eye, x.coeffs + h * eye])
    else:
        raise DomainError(f"unknown difference method {method!r}")
    try:
        out = flow(op, field, cfg, batch, t_end)
    except DivergenceError as exc:
        if method == "forward":
            cols = sorted({int(r) - 1 for r in exc.rows if r > 0})
        else:
            cols = sorted({int(r) % n for r in exc.rows})
        raise DivergenceError(f"perturbed trajectory for column(s) {cols} diverged: {exc}",
                              step=exc.step) from exc
    if method == "forward":
        return (out[1:] - out[0]).T / h
    return (out[n:] - out[:n]).T / (2.0 * h)


def apriori_bound(field: NonlinearField, cfg: IntegratorConfig, R: float, n_grid: int = 2048) -> float:
    """Computable bound on sup ||u(t)||_alpha over one period for ||x0||_alpha <= R.

    Uses ||S(t)|| <= 1 and ||A^alpha S(t)|| <= (alpha/e)^alpha t^-alpha, which
    lead to phi(t) <= a + b int_0^t (t - s)^-alpha phi(s) ds with
    a = R + lam^(1-alpha) M K T^(1-alpha)/(1-alpha) and b = lam^(1-alpha) M K,
    K = sup c(t). The equality version is solved on a grid with right-endpoint
    product integration, which over-estimates its nondecreasing solution.
    """
    if R <= 0:
        raise DomainError("R must be positive")
    if field.growth_envelope is None:
        raise UnsupportedOperation(f"field {field.name!r} declares no growth envelope")
    alpha = field.alpha
    beta = 1.0 - alpha
    T = field.period
    K = sup_growth(field)
    m_alpha = sharp_smoothing_bound(alpha)
    b = cfg.lam ** beta * m_alpha * K
    a = R + b * T ** beta / beta
    if b == 0.0:
        return float(a)
    # keep the implicit diagonal weight b h^beta / beta below 1/2
    h_max = (0.5 * beta / b) ** (1.0 / beta)
    n = max(n_grid, int(math.ceil(T / h_max)))
    h = T / n
    m = np.arange(1, n + 1, dtype=float)
    w = h ** beta * (m ** beta - (m - 1.0) ** beta) / beta  # w[m-1] = weight at lag m
    psi = np.empty(n + 1)
    psi[0] = a
    diag = 1.0 - b * w[0]
    for k in range(1, n + 1):
        # panels j = 0..k-2 use psi[j+1] at lag k - j
        hist = psi[1:k]
        lagged = w[k - 1:0:-1] if k > 1 else w[:0]
        psi[k] = (a + b * float(np.dot(lagged, hist))) / diag
    return float(psi[-1])
