"""Damped Newton iteration shared by the zero finders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError


@dataclass
class NewtonResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _try(fn, x):
    try:
        g = np.asarray(fn(x), dtype=float)
    except DivergenceError:
        return None
    return g if np.all(np.isfinite(g)) else None


def newton(fn, jac, x0, norm, tol=1e-10, max_iter=50, polish=3, min_damping=1e-6,
           escape=None) -> NewtonResult:
    """Solve fn(x) = 0 from x0 with backtracking on the residual norm.

    After the residual drops below ``tol``, up to ``polish`` further full
    steps are taken while they keep reducing it. ``escape(x)`` returning True
    aborts the iteration (e.g. when x leaves the region of interest).
    Polishing steps are not counted in ``iterations``.
    """
    x = np.array(x0, dtype=float)
    g = _try(fn, x)
    if g is None:
        return NewtonResult(x, float("inf"), 0, False)
    r = norm(g)
    it = 0
    polished = 0
    while it < max_iter and polished <= polish:
        if r <= tol and (polished >= polish or r == 0.0):
            break
        try:
            J = np.asarray(jac(x), dtype=float)
            dx = np.linalg.lstsq(J, -g, rcond=None)[0]
        except (DivergenceError, np.linalg.LinAlgError):
            break
        if r <= tol:
            polished += 1
            gn = _try(fn, x + dx)
            if gn is None or not norm(gn) < r:
                break
            x, g, r = x + dx, gn, norm(gn)
            continue
        s = 1.0
        while s >= min_damping:
            gn = _try(fn, x + s * dx)
            if gn is not None:
                rn = norm(gn)
                if rn < (1.0 - 1e-4 * s) * r or rn <= tol:
                    break
            s *= 0.5
        else:
            break
        it += 1
        x, g, r = x + s * dx, gn, rn
        if escape is not None and escape(x):
            break
    return NewtonResult(x, r, it, r <= tol)
