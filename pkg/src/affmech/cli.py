"""Batch command-line front end.

Four subcommands: ``validate`` (chart axioms), ``flow`` (integrate the
Hamilton equations to CSV), ``hj`` (cocycle and HJ residuals of a dual
section), ``verify`` (two-way theorem check along reduced trajectories).
Models are builtin names (``trivial:<dim>``, ``oscillator``,
``linear:tangent<dim>``, ``rigid:<I1>,<I2>,<I3>``, ``perturbed-so3``) or
paths to model files; reports are ``KEY = value`` lines.

Exit codes: 0 pass, 1 check failed, 2 input error, 3 internal inconsistency.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import expr as ex
from .algebroid import FD_STEP, VALIDATION_TOL, SamplePlan, validate_chart
from .affgebroid import CoSection
from .dynamics import DEFAULT_STEP, integrate
from .hj import (
    POINT_TOL,
    TRAJECTORY_TOL,
    IntegrationFailure,
    NotACocycleError,
    cocycle_residual,
    f_of,
    hj_residual,
    verify_theorem,
)
from .models import ModelBundle, ModelNameError, by_name
from .modelfile import ModelFileError, load_model

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_INCONSISTENT = 3

DEFAULTS = {
    "box": "[-1, 1] per variable",
    "samples": 100,
    "seed": 42,
    "step": DEFAULT_STEP,
    "validation_tol": VALIDATION_TOL,
    "pointwise_tol": POINT_TOL,
    "trajectory_tol": TRAJECTORY_TOL,
    "fd_step": FD_STEP,
    "verify_points": 10,
}


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if "--show-defaults" in argv:
        for key, value in DEFAULTS.items():
            print(f"{key} = {value}")
        return EXIT_OK

    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        bundle = _resolve_model(args.model)
    except (ModelFileError, ModelNameError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return args.handler(bundle, args)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="affmech",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--show-defaults", action="store_true", help="print the defaults table")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate the chart axioms numerically")
    p.add_argument("model")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("flow", help="integrate the Hamilton equations, write CSV")
    p.add_argument("model")
    p.add_argument("--x0", required=True, help="comma-separated base coordinates")
    p.add_argument("--y0", required=True, help="comma-separated fiber coordinates")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    p.add_argument("--thin", type=int, default=1, help="write every k-th row")
    p.set_defaults(handler=cmd_flow)

    p = sub.add_parser("hj", help="cocycle and Hamilton-Jacobi residuals of a section")
    p.add_argument("model")
    p.add_argument("--alpha", required=True, help="section name or inline 'alpha0=..;alphaV=..,..'")
    p.add_argument("--box", action="append", default=[], help="var=lo,hi (repeatable)")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=cmd_hj)

    p = sub.add_parser("verify", help="check the theorem equivalence along trajectories")
    p.add_argument("model")
    p.add_argument("--alpha", required=True)
    p.add_argument("--x0-set", default=None, help="semicolon-separated points 'a,b;c,d'")
    p.add_argument("--points", type=int, default=DEFAULTS["verify_points"],
                   help="number of seeded initial points when --x0-set is absent")
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.set_defaults(handler=cmd_verify)
    return parser


def _resolve_model(spec: str) -> ModelBundle:
    if Path(spec).exists():
        return load_model(spec)
    try:
        return by_name(spec)
    except ModelNameError:
        if any(ch in spec for ch in "/\\.") or spec.endswith(".model"):
            raise ModelFileError(f"model file '{spec}' does not exist") from None
        raise


# ---------------------------------------------------------------- validate


def cmd_validate(bundle: ModelBundle, args) -> int:
    charts = {
        "bidual": bundle.chart.bidual_chart(),
        "vertical": bundle.chart.vertical_chart(),
        "prolongation": bundle.chart.prolongation().chart,
    }
    all_valid = True
    for label, chart in charts.items():
        report = validate_chart(chart, bundle.sample)
        for line in report.lines():
            print(f"{label}_{line}")
        if not report.valid and report.worst_jacobi:
            print(f"{label}_worst = {report.worst_jacobi}")
        all_valid = all_valid and report.valid
    print(f"model_valid = {all_valid}")
    return EXIT_OK if all_valid else EXIT_CHECK_FAILED


# -------------------------------------------------------------------- flow


def _parse_floats(text: str, count: int, what: str) -> list[float]:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if len(parts) != count:
        raise ValueError(f"{what} needs {count} comma-separated values, got {len(parts)}")
    return [float(p) for p in parts]


def cmd_flow(bundle: ModelBundle, args) -> int:
    chart = bundle.chart
    try:
        x0 = _parse_floats(args.x0, chart.m, "--x0")
        y0 = _parse_floats(args.y0, chart.n, "--y0")
        if args.step <= 0 or args.t_end <= args.t0 or args.thin < 1:
            raise ValueError("need step > 0, t-end > t0 and thin >= 1")
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    traj = integrate(bundle.hamiltonian, x0 + y0, args.t0, args.t_end, args.step)
    header = "t," + ",".join(
        [f"x{i+1}" for i in range(chart.m)] + [f"y{a+1}" for a in range(chart.n)]
    )
    rows = [header]
    for k, (t, state) in enumerate(zip(traj.times, traj.states)):
        if k % args.thin == 0 or k == len(traj.times) - 1:
            rows.append(",".join([repr(t)] + [repr(v) for v in state]))
    if not traj.ok:
        rows.append("# ABORTED")
    payload = "\n".join(rows) + "\n"
    if args.out == "-":
        sys.stdout.write(payload)
    else:
        Path(args.out).write_text(payload)
    return EXIT_OK if traj.ok else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------- hj


def _resolve_alpha(bundle: ModelBundle, text: str) -> CoSection:
    if "=" not in text:
        return bundle.section(text)
    parts = dict(
        item.split("=", 1) for item in (p.strip() for p in text.split(";")) if "=" in item
    )
    unknown = set(parts) - {"alpha0", "alphaV"}
    if unknown:
        raise ValueError(f"inline alpha has unknown fields {sorted(unknown)}")
    alpha0 = ex.parse(parts.get("alpha0", "0"))
    if "alphaV" in parts:
        comps = [ex.parse(p.strip()) for p in parts["alphaV"].split(",")]
    else:
        comps = [ex.parse("0")] * bundle.chart.n
    return CoSection(bundle.chart, alpha0, comps)


def _plan_from_args(bundle: ModelBundle, args) -> SamplePlan:
    box = dict(bundle.sample.box)
    for override in args.box:
        if "=" not in override:
            raise ValueError(f"--box expects var=lo,hi, got '{override}'")
        var, bounds = override.split("=", 1)
        lo, hi = (float(p) for p in bounds.split(","))
        box[var.strip()] = (lo, hi)
    return SamplePlan(
        box=box,
        count=args.samples if args.samples is not None else bundle.sample.count,
        seed=args.seed if args.seed is not None else bundle.sample.seed,
    )


def cmd_hj(bundle: ModelBundle, args) -> int:
    try:
        alpha = _resolve_alpha(bundle, args.alpha)
        plan = _plan_from_args(bundle, args)
    except (KeyError, ValueError, ex.ParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    coc = cocycle_residual(alpha, plan)
    for line in coc.lines():
        print(line)

    f = f_of(bundle.hamiltonian, alpha)
    values = [f.value(env) for env in plan.points(bundle.chart.base_vars)]
    print(f"f_min = {min(values):.6e}")
    print(f"f_max = {max(values):.6e}")
    print(f"f_mean = {sum(values)/len(values):.6e}")

    hj = hj_residual(alpha, bundle.hamiltonian, plan)
    for line in hj.lines():
        print(line)
    passed = coc.is_cocycle and hj.is_solution
    print(f"hj_pass = {passed}")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


# ------------------------------------------------------------------ verify


def cmd_verify(bundle: ModelBundle, args) -> int:
    chart = bundle.chart
    try:
        alpha = _resolve_alpha(bundle, args.alpha)
        if args.x0_set:
            points = [
                _parse_floats(p, chart.m, "initial point")
                for p in args.x0_set.split(";")
                if p.strip()
            ]
        else:
            envs = bundle.sample.points(chart.base_vars)[: args.points]
            points = [[env[v] for v in chart.base_vars] for env in envs]
        if not points:
            raise ValueError("no initial points given")
    except (KeyError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    reports = []
    for k, x0 in enumerate(points):
        try:
            report = verify_theorem(
                alpha, bundle.hamiltonian, x0, args.horizon, args.step, bundle.sample
            )
        except NotACocycleError as err:
            print(f"error: {err}", file=sys.stderr)
            print(f"cocycle_residual = {err.report.max_residual:.3e}")
            return EXIT_INPUT_ERROR
        except IntegrationFailure as err:
            print(f"error: {err}", file=sys.stderr)
            return EXIT_CHECK_FAILED
        reports.append(report)
        coords = ",".join(f"{v:.6g}" for v in x0)
        print(
            f"point_{k} = ({coords}) max_r = {report.trajectory_max:.3e} "
            f"hj = {report.hj_max:.3e}"
        )

    traj_max = max(r.trajectory_max for r in reports)
    hj_max = max(r.hj_max for r in reports)
    holds_i = all(r.holds_along_trajectory for r in reports)
    holds_ii = all(r.holds_pointwise for r in reports)
    print(f"trajectory_residual_max = {traj_max:.3e}")
    print(f"hj_residual_max = {hj_max:.3e}")
    print(f"condition_i_holds = {holds_i}")
    print(f"condition_ii_holds = {holds_ii}")
    if holds_i != holds_ii:
        print("verdict = (i) and (ii) DISAGREE")
        return EXIT_INCONSISTENT
    print("verdict = (i) and (ii) AGREE")
    return EXIT_OK if holds_i else EXIT_CHECK_FAILED
