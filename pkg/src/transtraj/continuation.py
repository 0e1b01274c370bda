"""From the averaged equation to a T-periodic solution.

The pipeline: solve -A x + F_hat(x) = 0, check that the averaged asymptotic
slope misses the spectrum, then follow fixed points of the translation
operator of u' = -lam A u + lam F(t, u) from small lam up to lam = 1.
"""

from __future__ import annotations

import csv
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .degree import Ball, deg_alpha, deg_poincare, sphere_points
from .errors import (ContinuationStuck, DegreeError, DomainError, NonconvergenceError,
                     StructuralError, UnsupportedOperation)
from .mild_solver import IntegratorConfig, flow, fmt, poincare_jacobian
from .newton import newton
from .nonlinearity import NonlinearField, average_coeffs, averaged_field, field_jacobian
from .report import Report
from .spectral import SpectralOperator, State

NEWTON_TOL = 1e-10
CORRECTOR_MAX_ITER = 30
MIN_LAMBDA_STEP = 1e-4
DEFAULT_LAMBDA_START = 0.05


class BranchWarning(UserWarning):
    """The sign of det(I - DPhi) changed along a branch."""


class UnboundedBranchWarning(UserWarning):
    """No radius in the grid bounds all periodic solutions."""


def max_workers() -> int:
    """Worker cap for parallel sweeps, from TT_THREADS (default: all cores)."""
    raw = os.environ.get("TT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _sweep(fn, items):
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class BranchPoint:
    lam: float
    state: State
    residual: float
    jac_sign: int
    newton_iters: int

    def to_dict(self):
        return {"lambda": self.lam, "coeffs": self.state.coeffs, "residual": self.residual,
                "jac_sign": self.jac_sign, "newton_iters": self.newton_iters}


@dataclass
class ResonanceReport:
    f_inf_mean: float
    offending_modes: List[int]
    lambda_sweep_clear: bool
    kernel_dim: int
    tolerance: float
    per_lambda: dict = field(default_factory=dict)

    def to_dict(self):
        return {"f_inf_mean": self.f_inf_mean, "offending_modes": self.offending_modes,
                "lambda_sweep_clear": self.lambda_sweep_clear, "kernel_dim": self.kernel_dim,
                "tolerance": self.tolerance, "per_lambda": self.per_lambda}


def _alpha_norm(op, alpha):
    w = op.weights(alpha)
    return lambda v: float(np.linalg.norm(np.asarray(v) * w))


def solve_averaged(op: SpectralOperator, field_: NonlinearField, x0_seed: State,
                   tol: float = NEWTON_TOL, n_quad: int = 64, max_iter: int = 50) -> State:
    """Zero of x - A^{-1} F_hat(x), i.e. of -A x + F_hat(x)."""
    if x0_seed.dim != op.n or x0_seed.alpha != field_.alpha:
        raise StructuralError("seed does not match operator/field")
    if not np.all(np.isfinite(x0_seed.coeffs)):
        raise DomainError("seed must be finite")
    inv = 1.0 / op.eigenvalues
    avg = averaged_field(field_, n_quad)
    w = op.weights(field_.alpha)

    def g(c):
        return c - inv * average_coeffs(field_, c, n_quad)

    def dg(c):
        return np.eye(op.n) - inv[:, None] * field_jacobian(avg, 0.0, c, w)

    res = newton(g, dg, x0_seed.coeffs, _alpha_norm(op, field_.alpha), tol=tol, max_iter=max_iter)
    if not res.converged:
        raise NonconvergenceError(
            f"averaged equation: residual {res.residual:.3e} after {res.iterations} iterations",
            last_iterate=State(res.x, field_.alpha))
    return State(res.x, field_.alpha)


def check_resonance(op: SpectralOperator, field_: NonlinearField, T: Optional[float] = None,
                    lambda_grid: Sequence[float] = (1.0,), n_quad: int = 512) -> ResonanceReport:
    """Does the linear periodic problem with the asymptotic slope have nontrivial solutions?

    Nontrivial T-periodic solutions of u' = lam(-A + f_inf(t)) u need
    f_mean + 2 k pi i/(lam T) in the spectrum for some integer k. With a real
    spectrum only k = 0 can match, so the answer does not depend on lam.
    """
    if field_.asymptotic is None:
        raise UnsupportedOperation(f"field {field_.name!r} has no scalar asymptotic slope")
    T = field_.period if T is None else T
    ts = T * np.arange(n_quad) / n_quad
    f_mean = float(np.mean([field_.asymptotic(t) for t in ts]))
    tol = 1e-8 * (1.0 + abs(f_mean))
    offending = [k + 1 for k, mu in enumerate(op.eigenvalues) if abs(mu - f_mean) <= tol]
    per_lambda = {}
    for lam in lambda_grid:
        if not 0 < lam <= 1:
            raise DomainError(f"lambda {lam} outside (0, 1]")
        # imaginary shift 2 k pi/(lam T) is nonzero for k != 0 and the spectrum is real
        per_lambda[float(lam)] = not offending
    return ResonanceReport(f_mean, offending, not offending, len(offending), tol, per_lambda)


def _fixed_point_problem(op, field_, cfg, t_end=None):
    def g(c):
        return c - flow(op, field_, cfg, c, t_end)

    def dg(c):
        return np.eye(op.n) - poincare_jacobian(op, field_, cfg, State(c, field_.alpha), t_end)

    return g, dg


def _jac_sign(dg, c):
    s, _ = np.linalg.slogdet(dg(c))
    return int(np.sign(s))


def fixed_point(op, field_, cfg, x0: State, t_end=None, tol=NEWTON_TOL,
                max_iter=CORRECTOR_MAX_ITER) -> BranchPoint:
    """Newton on x - Phi(x) from x0; raises NonconvergenceError on failure."""
    g, dg = _fixed_point_problem(op, field_, cfg, t_end)
    res = newton(g, dg, x0.coeffs, _alpha_norm(op, field_.alpha), tol=tol, max_iter=max_iter,
                 polish=1)
    if not res.converged:
        raise NonconvergenceError(
            f"fixed point at lambda={cfg.lam}: residual {res.residual:.3e}",
            last_iterate=State(res.x, field_.alpha))
    return BranchPoint(cfg.lam, State(res.x, field_.alpha), res.residual,
                       _jac_sign(dg, res.x), res.iterations)


def verify_krasnoselskii(op: SpectralOperator, field_: NonlinearField, ball: Ball,
                         t_list: Sequence[float], cfg: Optional[IntegratorConfig] = None,
                         **kwargs) -> Report:
    """Compare deg(I - Phi_t) with deg_alpha(-A + F) as t decreases.

    Passes when the degrees agree for every t from some threshold t_bar
    downwards, with at least two agreeing values.
    """
    if not field_.autonomous:
        raise UnsupportedOperation("the small-time degree formula needs an autonomous field")
    cfg = (cfg or IntegratorConfig()).with_lambda(1.0)
    ts = sorted((float(t) for t in t_list), reverse=True)
    if len(ts) < 2 or ts[-1] <= 0:
        raise DomainError("t_list needs at least two positive times")
    base = deg_alpha(op, field_, ball, 0.0, **kwargs)

    def one(t):
        try:
            return deg_poincare(op, field_, cfg, ball, t_end=t, **kwargs)
        except DegreeError as exc:
            return exc

    results = _sweep(one, ts)
    values = {}
    errors = {}
    for t, r in zip(ts, results):
        if isinstance(r, Exception):
            errors[t] = f"{type(r).__name__}: {r}"
        else:
            values[t] = r.value
    tail = 0
    for t in reversed(ts):
        if values.get(t) == base.value:
            tail += 1
        else:
            break
    t_bar = ts[len(ts) - tail] if tail else None
    return Report("krasnoselskii", tail >= 2, {
        "deg_alpha": base.value,
        "deg_poincare": values,
        "errors": errors,
        "t_bar": t_bar,
        "stable_count": tail,
        "results": {"deg_alpha": base, "deg_poincare": [r for r in results if not isinstance(r, Exception)]},
    })


def verify_averaging(op: SpectralOperator, field_: NonlinearField, ball: Ball,
                     lambda_list: Sequence[float], cfg: Optional[IntegratorConfig] = None,
                     n_quad: int = 64, **kwargs) -> Report:
    """Fixed points of Phi^lam_T approach the averaged zero and share its degree."""
    cfg = cfg or IntegratorConfig()
    lams = sorted((float(l) for l in lambda_list), reverse=True)
    if len(lams) < 2:
        raise DomainError("lambda_list needs at least two values")
    x_hat = solve_averaged(op, field_, ball.center, n_quad=n_quad)
    norm = _alpha_norm(op, field_.alpha)
    base = deg_alpha(op, averaged_field(field_, n_quad), ball, 0.0, **kwargs)

    def one(lam):
        try:
            return fixed_point(op, field_, cfg.with_lambda(lam), x_hat)
        except NonconvergenceError as exc:
            return exc

    points = _sweep(one, lams)
    records = []
    dists = []
    for lam, p in zip(lams, points):
        if isinstance(p, Exception):
            records.append({"lambda": lam, "error": str(p)})
            dists.append(None)
        else:
            d = norm(p.state.coeffs - x_hat.coeffs)
            dists.append(d)
            records.append({"lambda": lam, "distance": d, "jac_sign": p.jac_sign,
                            "residual": p.residual, "coeffs": p.state.coeffs})
    ok_dists = [d for d in dists if d is not None]
    monotone = len(ok_dists) == len(dists) and all(
        b <= a + 1e-12 for a, b in zip(ok_dists, ok_dists[1:]))

    smallest = lams[-2:]
    small_degrees = {}
    deg_errors = {}
    for lam in smallest:
        try:
            small_degrees[lam] = deg_poincare(op, field_, cfg.with_lambda(lam), ball,
                                              seeds=[x_hat], **kwargs).value
        except DegreeError as exc:
            deg_errors[lam] = f"{type(exc).__name__}: {exc}"
    degrees_match = not deg_errors and all(v == base.value for v in small_degrees.values())
    return Report("averaging", monotone and degrees_match, {
        "x_hat": x_hat.coeffs,
        "deg_alpha_averaged": base.value,
        "deg_poincare_small_lambda": small_degrees,
        "degree_errors": deg_errors,
        "monotone_distances": monotone,
        "points": records,
        "lambda_0_empirical": lams[0] if monotone and degrees_match else None,
    })


def continue_branch(op: SpectralOperator, field_: NonlinearField, cfg_base: IntegratorConfig,
                    lambda_start: float, x_start: State, n_steps: int = 20,
                    tol: float = NEWTON_TOL, min_step: float = MIN_LAMBDA_STEP) -> List[BranchPoint]:
    """Natural-parameter continuation of fixed points of Phi^lam_T up to lam = 1.

    Secant predictor, Newton corrector, step halving on corrector failure and
    growth by 1.5 after corrections taking at most three iterations.

    A corrected point where sign det(I - DPhi) differs from the previous one
    is rejected like a failed correction: with a natural parameter this is
    what jumping across a fold onto another branch looks like. If the flip
    persists down to ``min_step`` a BranchWarning is issued and the partial
    branch is returned inside ContinuationStuck.
    """
    if not 0 < lambda_start <= 1:
        raise DomainError("lambda_start must lie in (0, 1]")
    if n_steps < 1:
        raise DomainError("n_steps must be positive")
    first = fixed_point(op, field_, cfg_base.with_lambda(lambda_start), x_start, tol=tol)
    branch = [first]
    lam = lambda_start
    step = (1.0 - lambda_start) / n_steps
    while lam < 1.0:
        lam_new = min(1.0, lam + step)
        x = branch[-1].state.coeffs
        if len(branch) >= 2:
            prev = branch[-2]
            x = x + (lam_new - lam) / (lam - prev.lam) * (x - prev.state.coeffs)
        try:
            p = fixed_point(op, field_, cfg_base.with_lambda(lam_new), State(x, field_.alpha), tol=tol)
            flipped = p.jac_sign != branch[-1].jac_sign
        except NonconvergenceError:
            p, flipped = None, False
        if p is None or flipped:
            step *= 0.5
            if step < min_step:
                if flipped:
                    warnings.warn(f"sign of det(I - DPhi) changes between lambda={lam:.6g} and "
                                  f"{lam_new:.6g}", BranchWarning, stacklevel=2)
                raise ContinuationStuck(
                    f"lambda step fell below {min_step:g} at lambda={lam:.6g}", branch=branch)
            continue
        branch.append(p)
        lam = lam_new
        if p.newton_iters <= 3:
            step *= 1.5
    return branch


def write_branch_csv(path, branch: Sequence[BranchPoint], op: SpectralOperator) -> None:
    """Columns lambda, residual, jac_sign, alpha_norm, coeff_1..coeff_N."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "residual", "jac_sign", "alpha_norm"]
                   + [f"coeff_{k}" for k in range(1, op.n + 1)])
        for p in branch:
            w.writerow([fmt(p.lam), fmt(p.residual), str(p.jac_sign), fmt(p.state.norm(op))]
                       + [fmt(v) for v in p.state.coeffs])


def _batched_fixed_points(op, field_, cfg, starts, tol, max_iter):
    """Plain Newton on x - Phi(x) for many starts at once.

    Returns (points, converged); rows whose trajectories blow up or whose
    iteration stalls are reported as not converged.
    """
    n = op.n
    norm_w = op.weights(field_.alpha)
    x = np.array(starts, dtype=float)
    k = x.shape[0]
    active = np.ones(k, dtype=bool)
    done = np.zeros(k, dtype=bool)
    eye = np.eye(n)
    for _ in range(max_iter):
        idx = np.flatnonzero(active & ~done)
        if idx.size == 0:
            break
        xa = x[idx]
        h = np.sqrt(np.finfo(float).eps) * (1.0 + np.linalg.norm(xa * norm_w, axis=1))
        batch = np.concatenate([xa[:, None, :], xa[:, None, :] + h[:, None, None] * eye[None]], axis=1)
        out = flow(op, field_, cfg, batch, strict=False)
        g = xa - out[:, 0]
        r = np.linalg.norm(g * norm_w, axis=1)
        J = eye[None] - (out[:, 1:] - out[:, :1]).transpose(0, 2, 1) / h[:, None, None]
        bad = ~np.isfinite(r) | ~np.all(np.isfinite(J), axis=(1, 2))
        active[idx[bad]] = False
        conv = ~bad & (r <= tol)
        done[idx[conv]] = True
        move = ~bad & ~conv
        for j in np.flatnonzero(move):
            try:
                x[idx[j]] = xa[j] - np.linalg.lstsq(J[j], g[j], rcond=None)[0]
            except np.linalg.LinAlgError:
                active[idx[j]] = False
    return x, done


def estimate_r0(op: SpectralOperator, field_: NonlinearField, lambda_grid: Sequence[float],
                radius_grid: Sequence[float], cfg: Optional[IntegratorConfig] = None,
                n_seeds: int = 32, seed: int = 0x5EED, max_iter: int = 30) -> Optional[float]:
    """Smallest grid radius outside which no fixed point of any Phi^lam_T was found.

    Newton is started from ``n_seeds`` points on each sphere; a radius
    qualifies when every start either fails or lands strictly inside
    R (1 - 1e-3). Returns None, with an UnboundedBranchWarning, when no
    radius qualifies.
    """
    if field_.asymptotic is None:
        raise UnsupportedOperation("estimate_r0 needs a field with an asymptotic slope")
    cfg = cfg or IntegratorConfig()
    norm_w = op.weights(field_.alpha)
    for R in sorted(float(r) for r in radius_grid):
        ball = Ball.at_origin(op.n, R, field_.alpha)
        starts = sphere_points(ball, norm_w, n_seeds, seed)[:n_seeds]
        ok = True
        for lam in lambda_grid:
            pts, conv = _batched_fixed_points(op, field_, cfg.with_lambda(lam), starts,
                                              NEWTON_TOL, max_iter)
            radii = np.linalg.norm(pts[conv] * norm_w, axis=1)
            if np.any(radii >= R * (1.0 - 1e-3)):
                ok = False
                break
        if ok:
            return R
    warnings.warn("no radius in the grid bounds the periodic solutions; the nonresonance "
                  "hypothesis looks violated", UnboundedBranchWarning, stacklevel=2)
    return None


def periodicity_defect(op, field_, cfg, x: State) -> float:
    """max_t ||u(t + T) - u(t)||_alpha along the trajectory from x over [0, 2T]."""
    n = cfg.steps_per_period
    hist = flow(op, field_, cfg, x.coeffs, 2.0 * field_.period, 2 * n, keep=True)
    diff = hist[n:] - hist[: n + 1]
    return float(np.max(op.norm(diff, field_.alpha)))
