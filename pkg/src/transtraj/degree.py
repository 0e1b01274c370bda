"""Brouwer degree on Galerkin truncations and the derived degrees.

The degree of a map g on a ball is the sum of sign det Dg over its zeros,
provided every zero is regular and none sits on the sphere. Zeros are located
by damped Newton from a deterministic set of starts; the boundary is sampled
to certify that g does not vanish there.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import (AdmissibilityError, CoverageError, DegeneracyError, DegreeError,
                     DivergenceError, DomainError, InconclusiveError, StructuralError,
                     UnsupportedOperation)
from .mild_solver import IntegratorConfig, flow, poincare_jacobian
from .nonlinearity import NonlinearField, field_jacobian
from .newton import newton
from .report import Report
from .spectral import SpectralOperator, State

DEFAULT_SEED = 0x5EED
MIN_STARTS = 64
DEDUP_TOL = 1e-8
BOUNDARY_TOL = 1e-6
DET_TOL = 1e-10
NEWTON_TOL = 1e-10


@dataclass(frozen=True)
class Ball:
    """Open ball {x : ||x - center||_alpha < radius}."""

    center: State
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError("ball radius must be positive")

    @classmethod
    def at_origin(cls, n: int, radius: float, alpha: float = 0.0) -> "Ball":
        return cls(State.zeros(n, alpha), radius)


@dataclass
class Zero:
    coeffs: np.ndarray
    sign: int
    det: float

    def to_dict(self):
        return {"coeffs": self.coeffs, "sign": self.sign, "det": self.det}


@dataclass
class DegreeResult:
    value: int
    zeros: List[Zero] = field(default_factory=list)
    method: str = "jacobian_sign_sum"
    min_abs_det: Optional[float] = None
    min_boundary_residual: float = float("nan")
    boundary_samples: int = 0
    direction_certificate: Optional[float] = None

    def to_dict(self):
        return {
            "value": self.value,
            "zeros": [z.to_dict() for z in self.zeros],
            "method": self.method,
            "min_abs_det": self.min_abs_det,
            "min_boundary_residual": self.min_boundary_residual,
            "boundary_samples": self.boundary_samples,
            "direction_certificate": self.direction_certificate,
        }


def _weights(op, ball):
    if op is None:
        return np.ones(ball.center.dim)
    if op.n != ball.center.dim:
        raise StructuralError("ball center dimension differs from operator")
    return op.weights(ball.center.alpha)


def _sobol(n_points, dim, seed):
    if n_points <= 0:
        return np.empty((0, dim))
    m = int(np.ceil(np.log2(max(n_points, 2))))
    return qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(m)[:n_points]


def _ball_points(ball, weights, n_points, seed):
    """Low-discrepancy points filling the ball (cube mapped radially onto it)."""
    v = 2.0 * _sobol(n_points, ball.center.dim, seed) - 1.0
    r2 = np.linalg.norm(v, axis=1)
    scale = np.where(r2 > 0, np.max(np.abs(v), axis=1) / np.where(r2 > 0, r2, 1.0), 0.0)
    z = ball.radius * v * scale[:, None]
    return ball.center.coeffs + z / weights


def sphere_points(ball, weights, n_points, seed):
    """Coordinate poles plus low-discrepancy points on the sphere."""
    n = ball.center.dim
    poles = np.vstack([np.eye(n), -np.eye(n)])
    v = 2.0 * _sobol(max(n_points - 2 * n, 0), n, seed + 1) - 1.0
    v = v[np.linalg.norm(v, axis=1) > 1e-12]
    v = np.vstack([poles, v])
    z = ball.radius * v / np.linalg.norm(v, axis=1)[:, None]
    return ball.center.coeffs + z / weights


def _eval_batch(fn, pts, vectorized):
    if vectorized:
        out = np.asarray(fn(pts), dtype=float)
        if out.shape == pts.shape:
            return out
    return np.array([fn(p) for p in pts], dtype=float)


def _newton(fn, jac, x, norm, center, radius, tol=NEWTON_TOL, max_iter=50):
    """Damped Newton restricted to a neighbourhood of the ball; None on failure."""
    res = newton(fn, jac, x, norm, tol=tol, max_iter=max_iter,
                 escape=lambda y: norm(y - center) > 4.0 * radius)
    return res.x if res.converged else None


def brouwer_degree(fn: Callable, jac: Callable, ball: Ball, seeds: Sequence = (),
                   op: Optional[SpectralOperator] = None, *, seed: int = DEFAULT_SEED,
                   n_boundary: Optional[int] = None, vectorized: bool = True,
                   tol: float = NEWTON_TOL) -> DegreeResult:
    """Degree of ``fn`` on ``ball`` by Jacobian-sign summation.

    ``fn`` and ``jac`` act on coefficient arrays; with ``vectorized`` set,
    ``fn`` is also called on stacks of points (shape (K, N)). Distances use
    the alpha-norm of ``op`` (Euclidean when ``op`` is None).
    """
    w = _weights(op, ball)
    norm = lambda v: float(np.linalg.norm(np.asarray(v) * w))
    center = ball.center.coeffs
    n = ball.center.dim

    starts = [np.asarray(s.coeffs if isinstance(s, State) else s, dtype=float) for s in seeds]
    starts.insert(0, center.copy())
    fill = max(MIN_STARTS - len(starts), 0)
    starts.extend(_ball_points(ball, w, fill, seed))

    found: List[np.ndarray] = []
    for x0 in starts:
        x = _newton(fn, jac, x0, norm, center, ball.radius, tol=tol)
        if x is None:
            continue
        if norm(x - center) > ball.radius + BOUNDARY_TOL:
            continue
        if all(norm(x - z) > DEDUP_TOL for z in found):
            found.append(x)

    for x in found:
        gap = abs(norm(x - center) - ball.radius)
        if gap <= BOUNDARY_TOL:
            raise AdmissibilityError(f"zero {x} lies within {gap:.2e} of the boundary")

    n_boundary = n_boundary if n_boundary is not None else 256 * n
    bpts = sphere_points(ball, w, n_boundary, seed)
    try:
        bvals = _eval_batch(fn, bpts, vectorized)
    except DivergenceError:
        bvals = np.array([_safe_eval(fn, p) for p in bpts])
    bnorms = np.linalg.norm(bvals * w, axis=1)
    finite = np.isfinite(bnorms)
    min_res = float(bnorms[finite].min()) if finite.any() else float("inf")
    if min_res <= tol:
        raise AdmissibilityError(f"map vanishes (|g| = {min_res:.2e}) at a sampled boundary point")

    zeros = []
    for x in found:
        J = np.asarray(jac(x), dtype=float)
        det = float(np.linalg.det(J)) if J.size else 1.0
        if not abs(det) > DET_TOL:
            raise DegeneracyError(f"zero {x} is degenerate: |det| = {abs(det):.2e}")
        zeros.append(Zero(x, 1 if det > 0 else -1, det))

    result = DegreeResult(
        value=sum(z.sign for z in zeros),
        zeros=zeros,
        min_abs_det=min((abs(z.det) for z in zeros), default=None),
        min_boundary_residual=min_res,
        boundary_samples=len(bpts),
    )
    if not zeros:
        # Degree 0 is certified when all boundary values avoid a common half-space:
        # then (1-s) g + s v never vanishes on the sphere.
        unit = bvals[finite] * w / bnorms[finite][:, None]
        v = unit.mean(axis=0)
        if np.linalg.norm(v) > 0:
            v = v / np.linalg.norm(v)
            cert = float((unit @ v).min())
        else:
            cert = -1.0
        if not finite.all() or cert <= 0:
            raise InconclusiveError("no zero found and boundary values admit no direction certificate")
        result.direction_certificate = cert
    return result


def _safe_eval(fn, p):
    try:
        return np.asarray(fn(p), dtype=float)
    except DivergenceError:
        return np.full(p.shape, np.nan)


def _check_ball(op, field_, ball):
    if ball.center.dim != op.n:
        raise StructuralError("ball center dimension differs from operator")
    if ball.center.alpha != field_.alpha:
        raise StructuralError("ball alpha differs from field alpha")


def deg_alpha(op: SpectralOperator, field_: NonlinearField, ball: Ball, mu: float = 0.0,
              seeds: Sequence = (), **kwargs) -> DegreeResult:
    """Degree of -A + F via x -> x - (mu + A)^{-1}(mu x + F(x)).

    With ``mu = 0`` this is the degree of I - A^{-1}F.
    """
    if not field_.autonomous:
        raise UnsupportedOperation("deg_alpha needs an autonomous field; average it first")
    if not mu > -op.omega:
        raise DomainError(f"mu={mu} outside (-{op.omega}, inf)")
    _check_ball(op, field_, ball)
    res = 1.0 / (mu + op.eigenvalues)
    w = op.weights(field_.alpha)

    def g(c):
        c = np.asarray(c, dtype=float)
        return c - res * (mu * c + field_.func(0.0, c))

    def dg(c):
        DF = field_jacobian(field_, 0.0, c, w)
        return np.eye(op.n) - res[:, None] * (mu * np.eye(op.n) + DF)

    return brouwer_degree(g, dg, ball, seeds, op, **kwargs)


def deg_poincare(op: SpectralOperator, field_: NonlinearField, cfg: IntegratorConfig, ball: Ball,
                 t_end: Optional[float] = None, seeds: Sequence = (), **kwargs) -> DegreeResult:
    """Degree of I - Phi, Phi the translation operator over ``t_end`` (default: period)."""
    _check_ball(op, field_, ball)
    alpha = field_.alpha

    def g(c):
        c = np.asarray(c, dtype=float)
        return c - flow(op, field_, cfg, c, t_end)

    def dg(c):
        return np.eye(op.n) - poincare_jacobian(op, field_, cfg, State(c, alpha), t_end)

    return brouwer_degree(g, dg, ball, seeds, op, **kwargs)


def verify_mu_independence(op, field_, ball, mus, **kwargs) -> Report:
    """deg_alpha for several shifts mu; passes iff all values agree."""
    if len(mus) < 2:
        raise DomainError("need at least two values of mu")
    degrees, errors = {}, {}
    for mu in mus:
        try:
            degrees[mu] = deg_alpha(op, field_, ball, mu, **kwargs)
        except DegreeError as exc:
            errors[mu] = f"{type(exc).__name__}: {exc}"
    values = {mu: r.value for mu, r in degrees.items()}
    passed = not errors and len(set(values.values())) == 1
    error_kinds = {e.split(":")[0] for e in errors.values()}
    return Report("mu_independence", passed, {
        "degrees": values,
        "results": degrees,
        "errors": errors,
        "consistent": (len(set(values.values())) <= 1 and (not errors or (len(errors) == len(mus) and len(error_kinds) == 1))),
    })


def verify_additivity(op, field_, ball: Ball, subballs: Sequence[Ball], mu: float = 0.0, **kwargs) -> Report:
    """deg(ball) against the sum over disjoint sub-balls covering all zeros."""
    w = op.weights(ball.center.alpha)
    norm = lambda v: float(np.linalg.norm(v * w))
    for i, b in enumerate(subballs):
        if norm(b.center.coeffs - ball.center.coeffs) + b.radius > ball.radius:
            raise DomainError(f"sub-ball {i} is not contained in the ball")
        for j in range(i):
            o = subballs[j]
            if norm(b.center.coeffs - o.center.coeffs) < b.radius + o.radius:
                raise DomainError(f"sub-balls {j} and {i} overlap")
    whole = deg_alpha(op, field_, ball, mu, **kwargs)
    for z in whole.zeros:
        if not any(norm(z.coeffs - b.center.coeffs) < b.radius for b in subballs):
            raise CoverageError(f"zero {z.coeffs} lies outside every sub-ball")
    parts = [deg_alpha(op, field_, b, mu, **kwargs) for b in subballs]
    total = sum(p.value for p in parts)
    return Report("additivity", whole.value == total, {
        "degree": whole.value,
        "parts": [p.value for p in parts],
        "sum": total,
        "results": {"whole": whole, "parts": parts},
    })


def verify_homotopy(op, field0: NonlinearField, field1: NonlinearField, ball: Ball,
                    n_samples: int = 16, **kwargs) -> Report:
    """Degrees along (1 - s) F0 + s F1 at sampled s; passes iff the end values agree.

    A sampled boundary zero at any s raises AdmissibilityError.
    """
    if not (field0.autonomous and field1.autonomous):
        raise UnsupportedOperation("homotopy check needs autonomous fields")
    values = []
    for s in np.linspace(0.0, 1.0, n_samples):
        f = NonlinearField(
            field0.period, field0.alpha,
            lambda t, c, s=s: (1.0 - s) * field0.func(t, c) + s * field1.func(t, c),
            autonomous=True, name=f"homotopy({s:g})",
        )
        values.append(deg_alpha(op, f, ball, **kwargs).value)
    return Report("homotopy_invariance", values[0] == values[-1], {"samples": values})


def verify_normalization(op, x0, ball: Ball, mus=(0.0,), **kwargs) -> Report:
    """deg_alpha(-A + x0) for a constant field x0 with A^{-1}x0 inside the ball."""
    from .nonlinearity import constant_field

    f = constant_field(op, x0, alpha=ball.center.alpha)
    vals = [deg_alpha(op, f, ball, mu, **kwargs).value for mu in mus]
    return Report("normalization", all(v == 1 for v in vals), {"values": vals})
