"""``polarcone`` command line: reproducible experiments with file I/O.

Exit codes: 0 success/pass, 1 certificate or verification failure, 2 solver
non-convergence or infeasibility, 3 I/O or validation error.  Diagnostics go
to stderr as one ``key=value`` line each.  The only environment variable
honored is POLARCONE_THREADS (BLAS/OpenMP cap, applied at package import).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .cone import (
    DiscreteMeasure,
    MonotoneMap1D,
    StickyState,
    evolution_blocks,
    lagrangian_velocity,
    polar_membership_1d,
    polar_residual,
    project_monotone_1d,
    sticky_evolve,
)
from .deformation import check_inequality, monotone_test_family
from .io import (
    _dump,
    _load,
    grid_from_dict,
    load_field_csv,
    load_problem,
    load_result,
    load_sticky_state,
    save_certificate,
    save_field_csv,
    save_problem,
    save_result,
    write_trajectory_csv,
)
from .recovery import (
    InfeasibleError,
    RepresentationProblem,
    SolverOptions,
    instance_from_flow,
    recover_stress,
    riedl_gauge,
    verify_representation,
)


def _diag(**kv):
    for key, val in kv.items():
        print(f"{key}={val}", file=sys.stderr)


def _cmd_simulate(args) -> int:
    state = load_sticky_state(args.input)
    times = np.linspace(0.0, args.t_max, args.steps + 1)
    rows = []
    for t in times:
        if t == 0.0:
            x = state.X0.values
            v = state.V0
            blocks = np.arange(len(state))
            if np.any(np.diff(x) == 0.0) and np.any(np.diff(v) != 0.0):
                _diag(t0_velocity="initial-data (right limit undefined at ties)")
        else:
            x = sticky_evolve(state, t).values
            v = lagrangian_velocity(state, t)
            blocks = evolution_blocks(state, t)
        for i in range(len(state)):
            rows.append((t, i, x[i], v[i], int(blocks[i])))
    write_trajectory_csv(rows, args.output)
    return 0


def _cmd_project(args) -> int:
    data = _load(args.input)
    result = project_monotone_1d(
        np.asarray(data["values"], dtype=np.float64),
        np.asarray(data["weights"], dtype=np.float64),
    )
    _dump(
        {"values": result.values.tolist(), "blocks": result.blocks.tolist()},
        args.output,
    )
    return 0


def _cmd_certify(args) -> int:
    data = _load(args.input)
    if "Y" in data:
        weights = np.asarray(data["weights"], dtype=np.float64)
        atoms = np.asarray(
            data.get("atoms", DiscreteMeasure.uniform(len(weights)).atoms),
            dtype=np.float64,
        )
        m = DiscreteMeasure(atoms, weights)
        Y = np.asarray(data["Y"], dtype=np.float64)
        X = MonotoneMap1D(np.asarray(data["X"], dtype=np.float64))
    else:
        state = load_sticky_state(args.input)
        if args.time is None:
            raise ValueError("certify on a sticky state requires --time")
        m = state.measure
        Y = polar_residual(state, args.time)
        X = sticky_evolve(state, args.time)
    cert = polar_membership_1d(Y, X, m)
    save_certificate(cert, args.output)
    _diag(feasible=str(cert.feasible).lower(), inner_product=repr(cert.inner_product))
    return 0 if cert.feasible else 1


def _solver_options(args) -> SolverOptions:
    opts = SolverOptions()
    if args.tol is not None:
        opts.tol = args.tol
    if args.max_iter is not None:
        opts.max_iter = args.max_iter
    if args.relax is not None:
        opts.relax = args.relax
    return opts


def _build_problem(args):
    grid, F, H, _gamma = load_problem(args.problem)
    problem = RepresentationProblem.build(
        F, H, grid, include_identity_row=not args.no_identity_row
    )
    return problem


def _cmd_recover(args) -> int:
    problem = _build_problem(args)
    family = monotone_test_family(
        problem.grid, max(12, problem.grid.d * (problem.grid.d + 1) // 2 + 1), args.seed
    )
    report = check_inequality(problem.F, problem.H, family)
    _diag(min_G=repr(report.min_G), violations=len(report.violating_members))
    problem.inequality_checked = True
    if report.violating_members:
        _diag(warning="positivity hypothesis violated on sampled family")
    try:
        result = recover_stress(problem, _solver_options(args))
    except InfeasibleError as exc:
        _diag(error="infeasible", detail=str(exc))
        return 2
    csv_name = args.field_csv or os.path.basename(args.output) + ".csv"
    save_result(result, args.output, csv_name)
    save_field_csv(result.M, os.path.join(os.path.dirname(args.output) or ".", csv_name))
    _diag(
        converged=str(result.converged).lower(),
        residual_inf=repr(result.residual_inf),
        total_trace=repr(result.total_trace),
        iterations=result.iterations,
    )
    return 0 if result.converged else 2


def _cmd_verify(args) -> int:
    problem = _build_problem(args)
    problem.inequality_checked = True  # re-check, not a fresh solve
    result = load_result(args.result)
    csv_path = os.path.join(
        os.path.dirname(args.result) or ".", result["field_csv"]
    )
    M = load_field_csv(csv_path, problem.grid)
    report = verify_representation(M, problem, count=args.count, seed=args.seed)
    _diag(
        representation_ok=str(report.representation_ok).lower(),
        psd_ok=str(report.psd_ok).lower(),
        trace_ok=str(report.trace_ok).lower(),
        residual_fresh=repr(report.residual_fresh_inf),
    )
    return 0 if report.passed else 1


def _cmd_gauge(args) -> int:
    problem = _build_problem(args)
    problem.inequality_checked = True
    data = _load(args.field)
    from .deformation import unpack_sym

    packed = np.asarray(data["cells"], dtype=np.float64)
    v = unpack_sym(packed.reshape(problem.grid.ncells, -1), problem.grid.d)
    value = riedl_gauge(problem, v, fast=args.fast)
    print(f"gauge={repr(value)}")
    return 0


def _cmd_gen_instance(args) -> int:
    data = _load(args.flow)
    grid = grid_from_dict(data["grid"])
    shape = tuple(k + 1 for k in grid.n) + (grid.d,)
    f_nodes = np.asarray(data["f_nodes"], dtype=np.float64).reshape(shape)
    h_nodes = np.asarray(data["h_nodes"], dtype=np.float64).reshape(shape)
    e_weights = np.asarray(data["e_weights"], dtype=np.float64).reshape(grid.n)
    rho = DiscreteMeasure(
        np.asarray(data["rho"]["atoms"], dtype=np.float64),
        np.asarray(data["rho"]["weights"], dtype=np.float64),
    )
    F, H = instance_from_flow(
        f_nodes, h_nodes, e_weights, data["gamma"], rho, grid
    )
    save_problem(grid, F, H, args.output, gamma=data["gamma"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarcone",
        description="Sticky-particle transport, monotone-cone projection, "
        "and PSD stress-field recovery.",
    )
    parser.add_argument(
        "--version", action="version", version=f"polarcone {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="evolve a sticky state, write a trajectory CSV")
    p.add_argument("--input", required=True, help="sticky state JSON")
    p.add_argument("--output", required=True, help="trajectory CSV path")
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--steps", type=int, default=20, help="time intervals (default 20)")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("project", help="weighted isotonic projection of a vector")
    p.add_argument("--input", required=True, help='JSON {"values": [...], "weights": [...]}')
    p.add_argument("--output", required=True)
    p.set_defaults(fn=_cmd_project)

    p = sub.add_parser("certify", help="polar-cone membership certificate")
    p.add_argument("--input", required=True, help="sticky state JSON or {Y, X, weights}")
    p.add_argument("--time", type=float, default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=_cmd_certify)

    p = sub.add_parser("recover", help="recover the PSD stress field of a problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--output", required=True, help="result JSON path")
    p.add_argument("--field-csv", default=None, help="field CSV name (default output+.csv)")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--relax", type=float, default=None)
    p.add_argument("--no-identity-row", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_recover)

    p = sub.add_parser("verify", help="re-check a result file against its problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--result", required=True)
    p.add_argument("--count", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-identity-row", action="store_true")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("gauge", help="support gauge of a symmetric cell field")
    p.add_argument("--problem", required=True)
    p.add_argument("--field", required=True, help='JSON {"cells": [[...], ...]}')
    p.add_argument("--fast", action="store_true", help="identity-direction bound")
    p.add_argument("--no-identity-row", action="store_true")
    p.set_defaults(fn=_cmd_gauge)

    p = sub.add_parser("gen-instance", help="build a problem file from flow data")
    p.add_argument("--flow", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(fn=_cmd_gen_instance)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except InfeasibleError as exc:
        _diag(error="infeasible", detail=str(exc))
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        _diag(error="invalid-input", detail=str(exc))
        return 3


if __name__ == "__main__":
    sys.exit(main())
