"""
Command-line front end: analyze, solve, verify and limits.

Reports go to stdout, logs to stderr, files to --out.
Exit codes: 0 ok, 1 usage or I/O error, 2 invalid problem file, 3 numerical
failure, 4 inconsistent BVP, 5 verify FAIL, 6 limits fixture did not converge.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from app.catalog import EXAMPLE_IDS, build_example, default_params
from app.errors import BvpError, ProblemFileError
from app.export import encode_complex, write_json
from app.fredholm import analyze, characteristic_matrix
from app.limits import run_sequence, write_report
from app.matfun import oracle_characteristic_matrix
from app.ode_core import ode_residual
from app.problem_file import Problem, load_example_params, load_problem
from app.solver import SolutionStatus, export_solution, solve_bvp
from app.tolerances import Tolerances, get_profile, tolerances_from_env

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3
EXIT_INCONSISTENT = 4
EXIT_VERIFY_FAIL = 5
EXIT_NOT_CONVERGED = 6

VERIFY_TOL = 1e-6
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _tolerances(args: argparse.Namespace, problem: Problem | None = None) -> Tolerances:
    """Flags over the problem file over the environment profile.

    --profile replaces the profile named in the file or the environment; the
    file's explicit values still apply on top of it.
    """
    if args.profile:
        base = get_profile(args.profile)
        if problem is not None and problem.tolerance_overrides is not None:
            base = base.updated(**problem.tolerance_overrides.model_dump(exclude={"profile"}))
    elif problem is not None:
        base = problem.tolerances
    else:
        base = tolerances_from_env()
    return base.updated(
        rtol=args.tol,
        quad_tol=args.quad_tol,
        rank_tol=args.rank_tol,
        consistency_tol=args.consistency_tol,
    )


def _out_path(args: argparse.Namespace, source: str, suffix: str) -> Path:
    return Path(args.out) / f"{Path(source).stem}.{suffix}"


def cmd_analyze(args: argparse.Namespace) -> int:
    problem = load_problem(args.file)
    tol = _tolerances(args, problem)
    M, report = analyze(problem.system, problem.B, tol)
    m, r, n = problem.system.signature
    print(f"{args.file}: m={m} r={r} n={n} l={problem.B.l} (rm={problem.system.rm})")
    for line in report.statements():
        print(f"  {line}")
    print(f"  singular values: {', '.join(f'{s:.6g}' for s in report.singular_values)}")
    path = write_json(
        {"report": report.to_dict(), "characteristic_matrix": M.to_dict(), "tolerances": tol.to_dict()},
        _out_path(args, args.file, "analyze.json"),
    )
    print(f"Report written to {path}")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    problem = load_problem(args.file)
    if problem.c is None:
        raise ProblemFileError(f"{args.file}: solve needs boundary data 'c'")
    tol = _tolerances(args, problem)
    solution = solve_bvp(problem.system, problem.B, problem.f, problem.c, tol)
    payload = {"solution": solution.to_dict(), "tolerances": tol.to_dict()}
    print(f"status: {solution.status.value}")
    print(f"residual: {solution.residual:.6g}")
    if solution.status is SolutionStatus.INCONSISTENT:
        write_json(payload, _out_path(args, args.file, "solve.json"))
        print("No solution: the boundary data is incompatible with the equation.")
        return EXIT_INCONSISTENT
    grid = problem.system.interval.grid(args.grid)
    ode_gap = ode_residual(problem.system, solution.particular, problem.f, grid)
    print(f"ODE residual on grid: {ode_gap:.6g}")
    if solution.status is SolutionStatus.FAMILY:
        print(f"kernel dimension: {solution.dimension}")
    directory = Path(args.out) / Path(args.file).stem
    xlsx = Path(args.xlsx) if args.xlsx else None
    for path in export_solution(solution, grid, directory, xlsx=xlsx):
        print(f"Wrote {path}")
    payload["ode_residual"] = ode_gap
    write_json(payload, _out_path(args, args.file, "solve.json"))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    example_id = int(args.example_id)
    params = default_params(example_id) if args.params == "default" else load_example_params(args.params)
    tol = _tolerances(args)
    system, B = build_example(example_id, params)
    numeric = characteristic_matrix(system, B, tol).data
    oracle = oracle_characteristic_matrix(example_id, params)
    gaps = np.abs(numeric - oracle)
    worst = float(np.max(gaps)) if gaps.size else 0.0
    passed = worst <= VERIFY_TOL
    print(f"Example {example_id}: M is {numeric.shape[0]}x{numeric.shape[1]}")
    print(f"{'row':>4} {'col':>4} {'|numeric - closed form|':>24}")
    for (i, j), gap in np.ndenumerate(gaps):
        print(f"{i:>4} {j:>4} {gap:>24.3e}")
    print(f"max abs difference: {worst:.3e}  {'PASS' if passed else 'FAIL'}")
    write_json(
        {
            "example_id": example_id,
            "numeric": encode_complex(numeric),
            "closed_form": encode_complex(oracle),
            "max_abs_difference": worst,
            "passed": passed,
        },
        Path(args.out) / f"verify_{example_id}.json",
    )
    return EXIT_OK if passed else EXIT_VERIFY_FAIL


def cmd_limits(args: argparse.Namespace) -> int:
    problem = load_problem(args.file)
    if problem.perturbation is None:
        raise ProblemFileError(f"{args.file}: limits needs a 'perturbation' block")
    tol = _tolerances(args, problem)
    block = problem.perturbation
    report = run_sequence(
        problem.sequence(), problem.norm(), tol,
        convergence_tol=block.convergence_tol, expect_converge=block.expect_converge,
    )
    directory = Path(args.out) / Path(args.file).stem
    xlsx = Path(args.xlsx) if args.xlsx else None
    for path in write_report(report, directory, xlsx=xlsx):
        print(f"Wrote {path}")
    for key, value in sorted(report.verdicts().items()):
        print(f"  {key}: {value}")
    if not report.passed:
        print(f"FAIL: {args.file} is expected to converge but the characteristic matrices do not")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logs.")
    common.add_argument("--out", default=".", help="Directory for report files (default: current directory).")
    common.add_argument("--profile", default=None, help="Tolerance profile: default, strict or loose.")
    common.add_argument("--tol", type=float, default=None, help="Integrator relative tolerance.")
    common.add_argument("--quad-tol", type=float, default=None, help="Quadrature tolerance.")
    common.add_argument("--rank-tol", type=float, default=None, help="Relative rank tolerance.")
    common.add_argument("--consistency-tol", type=float, default=None, help="Solvability tolerance.")

    parser = _Parser(
        prog="bvp-fredholm",
        description="Fredholm analysis and solution of linear ODE boundary-value problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", parents=[common], help="Index, Fredholm numbers and characteristic matrix.")
    p.add_argument("file", help="Problem file (JSON).")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("solve", parents=[common], help="Solve Ly = f, By = c and export trajectories.")
    p.add_argument("file", help="Problem file (JSON) with 'c' and optionally 'f'.")
    p.add_argument("--grid", type=int, default=101, help="Points of the exported trajectory grid (default: 101).")
    p.add_argument("--xlsx", default=None, metavar="PATH", help="Also write an Excel workbook (needs openpyxl).")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", parents=[common], help="Compare numeric M with a closed-form example.")
    p.add_argument("example_id", type=int, choices=EXAMPLE_IDS, help="Example family 1..5.")
    p.add_argument("params", help="Parameter file (JSON) or 'default'.")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("limits", parents=[common], help="Run a perturbation sequence.")
    p.add_argument("file", help="Problem file (JSON) with a 'perturbation' block.")
    p.add_argument("--xlsx", default=None, metavar="PATH", help="Also write an Excel workbook (needs openpyxl).")
    p.set_defaults(func=cmd_limits)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose >= 2 else logging.INFO if args.verbose == 1 else logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    try:
        return args.func(args)
    except ProblemFileError as e:
        print(f"Error: invalid problem file: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except BvpError as e:
        logger.debug("Numerical failure", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
