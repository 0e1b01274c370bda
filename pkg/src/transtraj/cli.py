"""Command-line front end: JSON scenario in, CSV/JSON artifacts out.

Exit codes: 0 success, 2 Newton nonconvergence, 3 configuration error,
4 failed verification, 5 degenerate degree, 6 resonance, 7 continuation stuck.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from . import continuation as cont
from . import degree as dg
from .errors import (ConfigError, ContinuationStuck, DegeneracyError, DegreeError,
                     DivergenceError, DomainError, NonconvergenceError, StructuralError,
                     TransTrajError, UnsupportedOperation)
from .mild_solver import IntegratorConfig, evolve
from .nonlinearity import REGISTRY, averaged_field, field_from_config
from .report import Report, jsonable
from .spectral import State, operator_from_config

EXIT_OK = 0
EXIT_NONCONVERGENCE = 2
EXIT_CONFIG = 3
EXIT_CHECK_FAILED = 4
EXIT_DEGENERATE = 5
EXIT_RESONANCE = 6
EXIT_STUCK = 7

_num_list = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_pos_list = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["operator", "field"],
    "properties": {
        "operator": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["dirichlet_laplacian_1d", "explicit"]},
                "modes": {"type": "integer", "minimum": 1},
                "eigenvalues": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                                "minItems": 1},
                "label": {"type": "string"},
            },
        },
        "field": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": sorted(REGISTRY)},
                "params": {"type": "object"},
                "period": {"type": "number", "exclusiveMinimum": 0},
                "alpha": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
            },
        },
        "integrator": {
            "type": "object",
            "properties": {
                "steps_per_period": {"type": "integer", "minimum": 4},
                "scheme": {"enum": ["exponential_euler", "etd_midpoint"]},
                "lambda": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "ball": {
            "type": "object",
            "properties": {
                "center": _num_list,
                "radius": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "sweeps": {
            "type": "object",
            "properties": {
                "t_list": _pos_list,
                "lambda_list": _pos_list,
                "mus": _num_list,
                "lambda_grid": _pos_list,
                "radius_grid": _pos_list,
                "subballs": {"type": "array", "items": {
                    "type": "object", "required": ["center", "radius"],
                    "properties": {"center": _num_list,
                                   "radius": {"type": "number", "exclusiveMinimum": 0}}}},
            },
        },
        "continuation": {
            "type": "object",
            "properties": {
                "lambda_start": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "n_steps": {"type": "integer", "minimum": 1},
                "seed_state": _num_list,
            },
        },
        "initial_state": _num_list,
        "n_quad": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
    },
}


@dataclass
class Scenario:
    op: object
    field: object
    cfg: IntegratorConfig
    ball: dg.Ball
    t_list: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    lambda_list: list = field(default_factory=lambda: [0.1, 0.05, 0.025])
    mus: list = field(default_factory=lambda: [0.0, 1.0, 10.0])
    lambda_grid: Optional[list] = None
    radius_grid: list = field(default_factory=lambda: [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0])
    subballs: list = field(default_factory=list)
    lambda_start: float = cont.DEFAULT_LAMBDA_START
    n_steps: int = 20
    seed_state: Optional[np.ndarray] = None
    initial_state: Optional[np.ndarray] = None
    n_quad: int = 64
    seed: int = dg.DEFAULT_SEED


def _path(error) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in error.absolute_path)


def _vector(values, n, where):
    v = np.asarray(values, dtype=float)
    if v.size != n:
        raise ConfigError(f"{where}: expected {n} entries, got {v.size}")
    return v


def load_scenario(config: dict, seed: Optional[int] = None) -> Scenario:
    """Validate a scenario dict and build the library objects it names."""
    errors = sorted(jsonschema.Draft7Validator(SCENARIO_SCHEMA).iter_errors(config),
                    key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"config error at {_path(e)}: {e.message}")
    op = operator_from_config(config["operator"])
    fld = field_from_config(config["field"], op)
    integ = config.get("integrator", {})
    cfg = IntegratorConfig(integ.get("steps_per_period", 256), integ.get("scheme", "etd_midpoint"),
                           integ.get("lambda", 1.0))
    b = config.get("ball", {})
    center = _vector(b["center"], op.n, "$.ball.center") if "center" in b else np.zeros(op.n)
    ball = dg.Ball(State(center, fld.alpha), float(b.get("radius", 10.0)))
    sc = Scenario(op, fld, cfg, ball)
    sw = config.get("sweeps", {})
    for key in ("t_list", "lambda_list", "mus", "lambda_grid", "radius_grid"):
        if key in sw:
            setattr(sc, key, [float(v) for v in sw[key]])
    for i, sb in enumerate(sw.get("subballs", [])):
        c = _vector(sb["center"], op.n, f"$.sweeps.subballs[{i}].center")
        sc.subballs.append(dg.Ball(State(c, fld.alpha), float(sb["radius"])))
    if any(not 0 < v <= 1 for v in sc.lambda_list + (sc.lambda_grid or [])):
        raise ConfigError("config error at $.sweeps: lambda values must lie in (0, 1]")
    co = config.get("continuation", {})
    sc.lambda_start = float(co.get("lambda_start", sc.lambda_start))
    sc.n_steps = int(co.get("n_steps", sc.n_steps))
    if "seed_state" in co:
        sc.seed_state = _vector(co["seed_state"], op.n, "$.continuation.seed_state")
    if "initial_state" in config:
        sc.initial_state = _vector(config["initial_state"], op.n, "$.initial_state")
    sc.n_quad = int(config.get("n_quad", sc.n_quad))
    sc.seed = int(config.get("seed", sc.seed) if seed is None else seed)
    return sc


def _emit(out_dir: Optional[Path], name: str, payload: dict) -> str:
    text = json.dumps(jsonable(payload), sort_keys=True, indent=2) + "\n"
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{name}.json").write_text(text)
    return text


def _seed_state(sc: Scenario) -> State:
    c = sc.seed_state if sc.seed_state is not None else sc.ball.center.coeffs
    return State(c, sc.field.alpha)


def cmd_solve_averaged(sc: Scenario, out_dir):
    try:
        x = cont.solve_averaged(sc.op, sc.field, _seed_state(sc), n_quad=sc.n_quad)
    except NonconvergenceError as exc:
        last = exc.last_iterate.coeffs if exc.last_iterate is not None else None
        return EXIT_NONCONVERGENCE, {"error": str(exc), "last_iterate": last}
    avg = averaged_field(sc.field, sc.n_quad)
    resid = x.coeffs - avg.func(0.0, x.coeffs) / sc.op.eigenvalues
    return EXIT_OK, {"x_hat": x.coeffs, "residual": float(sc.op.norm(resid, sc.field.alpha))}


def _degree_kwargs(sc):
    return {"seed": sc.seed}


def _status_from(report: Report, degenerate: bool):
    if report.passed:
        return EXIT_OK
    return EXIT_DEGENERATE if degenerate else EXIT_CHECK_FAILED


def _mentions_degeneracy(report: Report) -> bool:
    return "DegeneracyError" in json.dumps(jsonable(report.details))


def cmd_verify(sc: Scenario, which: str, out_dir):
    kw = _degree_kwargs(sc)
    try:
        if which == "kras":
            fld = sc.field if sc.field.autonomous else averaged_field(sc.field, sc.n_quad)
            rep = cont.verify_krasnoselskii(sc.op, fld, sc.ball, sc.t_list, sc.cfg, **kw)
        elif which == "avg":
            rep = cont.verify_averaging(sc.op, sc.field, sc.ball, sc.lambda_list, sc.cfg,
                                        n_quad=sc.n_quad, **kw)
        else:
            rep = degree_properties(sc)
    except DegeneracyError as exc:
        return EXIT_DEGENERATE, {"name": which, "passed": False, "error": f"DegeneracyError: {exc}"}
    except (DegreeError, NonconvergenceError) as exc:
        return EXIT_CHECK_FAILED, {"name": which, "passed": False,
                                   "error": f"{type(exc).__name__}: {exc}"}
    return _status_from(rep, _mentions_degeneracy(rep)), rep.to_dict()


def degree_properties(sc: Scenario) -> Report:
    """Existence, mu-independence, normalization and (with sub-balls) additivity
    checks on the (averaged) field."""
    kw = _degree_kwargs(sc)
    fld = sc.field if sc.field.autonomous else averaged_field(sc.field, sc.n_quad)
    checks = {}
    mu_rep = dg.verify_mu_independence(sc.op, fld, sc.ball, sc.mus, **kw)
    checks["mu_independence"] = mu_rep.to_dict()
    existence = all(
        r.value == 0 or len(r.zeros) > 0 for r in mu_rep.details["results"].values())
    checks["existence"] = {"passed": existence and bool(mu_rep.details["results"])}
    # constant field whose zero A^{-1} x0 is the ball center
    x0 = sc.op.eigenvalues * sc.ball.center.coeffs
    norm_rep = dg.verify_normalization(sc.op, x0, sc.ball, mus=tuple(sc.mus), **kw)
    checks["normalization"] = norm_rep.to_dict()
    passed = mu_rep.passed and checks["existence"]["passed"] and norm_rep.passed
    if sc.subballs:
        add_rep = dg.verify_additivity(sc.op, fld, sc.ball, sc.subballs, **kw)
        checks["additivity"] = add_rep.to_dict()
        passed = passed and add_rep.passed
    return Report("degree_props", passed, {"checks": checks})


def cmd_check_resonance(sc: Scenario, out_dir):
    grid = sc.lambda_grid or [sc.lambda_start, 0.5, 1.0]
    rep = cont.check_resonance(sc.op, sc.field, sc.field.period, grid)
    return (EXIT_OK if rep.lambda_sweep_clear else EXIT_RESONANCE), rep.to_dict()


def cmd_evolve(sc: Scenario, out_dir):
    x0 = sc.initial_state if sc.initial_state is not None else sc.ball.center.coeffs
    try:
        traj = evolve(sc.op, sc.field, sc.cfg, State(x0, sc.field.alpha))
    except DivergenceError as exc:
        return EXIT_NONCONVERGENCE, {"error": str(exc), "step": exc.step}
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        traj.to_csv(out_dir / "trajectory.csv", sc.op)
    norms = traj.alpha_norms(sc.op)
    return EXIT_OK, {"final_state": traj.coeffs[-1], "max_alpha_norm": float(norms.max()),
                     "steps": len(traj.times) - 1, "lambda": sc.cfg.lam}


def cmd_periodic(sc: Scenario, out_dir):
    op, fld, cfg = sc.op, sc.field, sc.cfg.with_lambda(1.0)
    lam_grid = sc.lambda_grid or [sc.lambda_start, 0.5, 1.0]
    res = cont.check_resonance(op, fld, fld.period, lam_grid)
    summary = {"f_inf_mean": res.f_inf_mean, "offending_modes": res.offending_modes,
               "kernel_dim": res.kernel_dim}
    if not res.lambda_sweep_clear:
        summary["status"] = "resonant"
        return EXIT_RESONANCE, summary
    try:
        x_hat = cont.solve_averaged(op, fld, _seed_state(sc), n_quad=sc.n_quad)
    except NonconvergenceError as exc:
        summary.update(status="averaged_nonconvergence", error=str(exc))
        return EXIT_NONCONVERGENCE, summary
    summary["x_hat"] = x_hat.coeffs
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        r0 = cont.estimate_r0(op, fld, lam_grid, sc.radius_grid, cfg, seed=sc.seed)
        summary["r0"] = r0
        try:
            branch = cont.continue_branch(op, fld, cfg, sc.lambda_start, x_hat, sc.n_steps)
        except ContinuationStuck as exc:
            branch = exc.branch
            summary.update(status="continuation_stuck", error=str(exc))
        except NonconvergenceError as exc:
            branch = []
            summary.update(status="start_nonconvergence", error=str(exc))
    summary["warnings"] = [str(w.message) for w in caught]
    summary["branch_length"] = len(branch)
    if out_dir is not None and branch:
        out_dir.mkdir(parents=True, exist_ok=True)
        cont.write_branch_csv(out_dir / "branch.csv", branch, op)
    if summary.get("status") == "continuation_stuck":
        summary["last_lambda"] = branch[-1].lam if branch else None
        return EXIT_STUCK, summary
    if summary.get("status") == "start_nonconvergence":
        return EXIT_NONCONVERGENCE, summary
    final = branch[-1]
    signs = {p.jac_sign for p in branch}
    summary.update(
        status="ok",
        x_star=final.state.coeffs,
        final_residual=final.residual,
        final_alpha_norm=final.state.norm(op),
        jac_sign=final.jac_sign,
        jac_sign_constant=len(signs) == 1,
        periodicity_defect=cont.periodicity_defect(op, fld, cfg, final.state),
    )
    if out_dir is not None:
        evolve(op, fld, cfg, final.state).to_csv(out_dir / "trajectory.csv", op)
    return EXIT_OK, summary


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="scenario JSON file")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="seed for the low-discrepancy starts (unsigned 64-bit)")
    parser = argparse.ArgumentParser(prog="transtraj", parents=[common],
                                     description="Periodic solutions of u' = -Au + F(t, u).")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve-averaged", parents=[common], help="zero of -A x + F_hat(x)")
    v = sub.add_parser("verify", parents=[common], help="degree verification suites")
    v.add_argument("which", choices=["kras", "avg", "degree-props"])
    sub.add_parser("check-resonance", parents=[common], help="spectral nonresonance test")
    sub.add_parser("periodic", parents=[common], help="full continuation to lambda = 1")
    sub.add_parser("evolve", parents=[common], help="integrate one period")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config_path = getattr(args, "config", None)
    out_dir = getattr(args, "out", None)
    seed = getattr(args, "seed", None)
    if seed is not None and not 0 <= seed < 2 ** 64:
        print("config error at --seed: must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if config_path is None:
        print("config error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = json.loads(Path(config_path).read_text())
        sc = load_scenario(config, seed % 2 ** 32 if seed is not None else None)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG

    name = args.command
    try:
        if name == "solve-averaged":
            code, payload = cmd_solve_averaged(sc, out_dir)
        elif name == "verify":
            code, payload = cmd_verify(sc, args.which, out_dir)
            name = f"verify-{args.which}"
        elif name == "check-resonance":
            code, payload = cmd_check_resonance(sc, out_dir)
        elif name == "periodic":
            code, payload = cmd_periodic(sc, out_dir)
        else:
            code, payload = cmd_evolve(sc, out_dir)
    except (ConfigError, DomainError, StructuralError, UnsupportedOperation) as exc:
        # arguments the scenario supplied but the chosen command cannot use
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransTrajError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    payload = dict(payload)
    payload["exit_code"] = code
    sys.stdout.write(_emit(out_dir, name, payload))
    return code


if __name__ == "__main__":
    sys.exit(main())
