"""Command line entry point.

Verbs: solve, certify, sweep, xcheck, simulate, report.  Problem data come
from a flat key = value config file (see `ergohj.model.load_spec`); flags
override solver knobs.  Exit codes: 0 success, 1 numerical failure
(non-convergence, rejected certificate, failed comparison), 2 usage errors.
Outputs are written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, certificates
from .control_sim import SimConfig, compare_lambda, feedback_control, simulate
from .grids import GridOptions, build_grid
from .model import ProblemSpec, load_spec
from .linear_xcheck import colehopf_compare, linear_lambda
from .solver import (
    DEFAULT_LADDER,
    SolverError,
    SolverOptions,
    estimate_lambda_extrapolated,
    solve_newton,
)
from .sweep import (
    SweepReport,
    default_report_name,
    read_report,
    run_sweep,
    write_report,
)

USAGE_ERROR = 2
NUMERICAL_ERROR = 1


class UsageError(Exception):
    pass


def parse_beta_range(text: str) -> list[float]:
    """`start:stop:xFACTOR` geometric ranges, or comma lists, or one value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3 or not parts[2].lower().startswith("x"):
            raise UsageError(f"bad beta range {text!r}; expected start:stop:xFACTOR")
        try:
            start, stop = float(parts[0]), float(parts[1])
            factor = float(parts[2][1:])
        except ValueError as exc:
            raise UsageError(f"bad beta range {text!r}: {exc}") from None
        if start <= 0 or stop < start or factor <= 1:
            raise UsageError("beta range needs 0 < start <= stop and factor > 1")
        out = []
        b = start
        while b <= stop * (1 + 1e-12):
            out.append(b)
            b *= factor
        return out
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"bad beta list {text!r}: {exc}") from None


def _ladder(args) -> tuple:
    if args.grid_n is None and args.rmax_mult is None:
        return DEFAULT_LADDER
    n = args.grid_n or 2048
    mult = args.rmax_mult or 8.0
    return ((n // 4, mult / 2.0), (n // 2, 0.75 * mult), (n, mult))


def _grid_opts(args, n_default=2048, mult_default=8.0) -> GridOptions:
    return GridOptions(
        n=args.grid_n or n_default, rmax_mult=args.rmax_mult or mult_default
    )


def _write_out(args, payload: dict, default_name: str) -> Path:
    out = Path(args.out) if args.out else Path(default_name)
    from .sweep import _atomic_write, dumps

    _atomic_write(out, dumps(payload))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ergohj",
        description="Eigenvalue laboratory for ergodic viscous Hamilton-Jacobi problems",
    )
    p.add_argument("--version", action="version", version=f"ergohj {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, beta=True):
        sp.add_argument("--config", required=True, help="flat key=value problem file")
        if beta:
            sp.add_argument("--beta", type=float, required=True)
        sp.add_argument("--out", help="output path (default: derived name)")
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--grid-n", type=int, help="finest grid intervals (default 2048)")
        sp.add_argument("--rmax-mult", type=float, help="domain multiple of the feature radius")
        sp.add_argument("--tol", type=float, help="Newton residual tolerance factor")

    sp = sub.add_parser("solve", help="extrapolated eigenvalue at one beta")
    common(sp)

    sp = sub.add_parser("certify", help="certified lower bound at one beta")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float,
                    help="verify this candidate level instead of constructing one")
    sp.add_argument("--epsilon", type=float, help="strong-drift margin override")
    sp.add_argument("--strict", action="store_true",
                    help="fail (exit 1) instead of falling back to the trivial bound")

    sp = sub.add_parser("sweep", help="beta sweep with fits and checks")
    common(sp, beta=False)
    sp.add_argument("--betas", required=True,
                    help="start:stop:xFACTOR geometric range or comma list")
    sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                    help="concurrent row solves (default: logical cores)")

    sp = sub.add_parser("xcheck", help="m=2 linear route vs nonlinear solver")
    common(sp)

    sp = sub.add_parser("simulate", help="Monte Carlo control-cost validation")
    common(sp)
    sp.add_argument("--seed", type=int, default=20260809)
    sp.add_argument("--paths", type=int, default=48)
    sp.add_argument("--horizon", type=float, default=1500.0)
    sp.add_argument("--dt", type=float, default=2e-3)

    sp = sub.add_parser("report", help="re-emit / convert a stored report")
    sp.add_argument("input", help="existing JSON or CSV report")
    sp.add_argument("--out", help="output path")
    sp.add_argument("--format", choices=("json", "csv"), default="csv")
    return p


def cmd_solve(args, spec: ProblemSpec) -> int:
    ex = estimate_lambda_extrapolated(
        spec, args.beta, ladder=_ladder(args),
        solver_opts=SolverOptions(tol=args.tol) if args.tol else None,
    )
    sol = ex.finest
    payload = {
        "lambda": ex.lambda_,
        "error_estimate": ex.error_estimate,
        "beta": args.beta,
        "spec": spec.to_dict(),
        "finest": sol.to_dict() if args.format == "json" else sol.grid.descriptor(),
    }
    if args.format == "csv":
        out = Path(args.out) if args.out else Path("solution.csv")
        sol.write_csv(out)
    else:
        out = _write_out(args, payload, "solution.json")
    print(f"lambda = {ex.lambda_:.12g} +/- {ex.error_estimate:.3g} -> {out}")
    return 0


def cmd_certify(args, spec: ProblemSpec) -> int:
    if args.lam is not None:
        coeffs_grid = np.concatenate(
            [np.linspace(0.0, spec.R, 1200),
             np.geomspace(spec.R, 1e4 * spec.R, 4000)[1:]]
        )
        from .model import build_coefficients

        profile = certificates.build_phi0(spec, coeffs_grid)
        outcome = certificates.verify_subsolution(
            args.lam, profile, build_coefficients(spec), args.beta, spec.m, spec.d,
            regime=certificates.certificate_regime(spec), spec_echo=spec.to_dict(),
        )
        if isinstance(outcome, certificates.Rejection):
            print(
                f"rejected: residual {outcome.max_residual:.6g} > 0 at "
                f"r = {outcome.worst_radius:.6g}",
                file=sys.stderr,
            )
            return NUMERICAL_ERROR
        cert = outcome
    else:
        try:
            cert = certificates.lower_bound(
                spec, args.beta, epsilon=args.epsilon, strict=args.strict
            )
        except certificates.SubsolutionRejected as exc:
            print(f"certificate rejected: {exc}", file=sys.stderr)
            return NUMERICAL_ERROR
    out = _write_out(args, cert.to_dict(), "certificate.json")
    print(f"lambda_lower = {cert.lambda_lower:.12g} ({cert.candidate}) -> {out}")
    return 0


def cmd_sweep(args, spec: ProblemSpec) -> int:
    betas = parse_beta_range(args.betas)
    report = run_sweep(
        spec,
        betas,
        ladder=_ladder(args),
        grid_opts=None,
        tol=args.tol,
        jobs=max(1, args.jobs),
    )
    out = Path(args.out) if args.out else Path(default_report_name(spec, args.format))
    write_report(report, out, args.format)
    failures = [r for r in report.rows if r.failure]
    print(f"{len(report.rows)} rows ({len(failures)} failed) -> {out}")
    return NUMERICAL_ERROR if failures else 0


def cmd_xcheck(args, spec: ProblemSpec) -> int:
    if spec.m != 2.0:
        raise UsageError("xcheck requires an m = 2 spec")
    ladder = _ladder(args)
    reports = []
    carry = None
    for n, mult in ladder:
        g = build_grid(spec, args.beta, GridOptions(n=n, rmax_mult=mult))
        nl = solve_newton(spec, args.beta, g, init=carry)
        if not nl.converged:
            print("nonlinear solve failed to converge", file=sys.stderr)
            return NUMERICAL_ERROR
        li = linear_lambda(spec, args.beta, g)
        rep = colehopf_compare(nl, li).to_dict()
        rep["grid"] = g.descriptor()
        reports.append(rep)
        carry = nl
    nls = np.array([r["lambda_nonlinear"] for r in reports])
    lis = np.array([r["lambda_linear"] for r in reports])
    extrap_nl = nls[-1] + (nls[-1] - nls[-2]) / 3.0 if len(nls) > 1 else nls[-1]
    extrap_li = lis[-1] + (lis[-1] - lis[-2]) / 3.0 if len(lis) > 1 else lis[-1]
    payload = {
        "beta": args.beta,
        "spec": spec.to_dict(),
        "rungs": reports,
        "lambda_nonlinear_extrap": float(extrap_nl),
        "lambda_linear_extrap": float(extrap_li),
        "lambda_diff_extrap": float(abs(extrap_nl - extrap_li)),
    }
    out = _write_out(args, payload, "xcheck.json")
    print(
        f"nonlinear {extrap_nl:.10g} vs linear {extrap_li:.10g} "
        f"(diff {abs(extrap_nl - extrap_li):.3g}) -> {out}"
    )
    return 0


def cmd_simulate(args, spec: ProblemSpec) -> int:
    ex = estimate_lambda_extrapolated(spec, args.beta, ladder=_ladder(args))
    sol = ex.finest
    cfg = SimConfig(dt=args.dt, T=args.horizon, n_paths=args.paths, seed=args.seed)
    ctrl = feedback_control(sol, spec)
    est = simulate(spec, args.beta, sol, cfg)
    perturbed = tuple(
        simulate(spec, args.beta, sol, cfg, control=ctrl.scaled(s)) for s in (1.5, 0.5)
    )
    rep = compare_lambda(est, sol, perturbed)
    payload = {"spec": spec.to_dict(), "beta": args.beta, "config": vars(args) | {},
               "comparison": rep.to_dict(), "estimate": est.to_dict()}
    payload["config"] = {k: v for k, v in payload["config"].items()
                         if isinstance(v, (int, float, str, bool, type(None)))}
    out = _write_out(args, payload, "simulate.json")
    status = "pass" if (rep.passed and rep.perturbed_ok) else "FAIL"
    print(
        f"MC {est.mean:.6g} +/- {est.std_error:.2g} vs lambda {sol.lambda_:.6g} "
        f"[{status}] -> {out}"
    )
    return 0 if (rep.passed and rep.perturbed_ok) else NUMERICAL_ERROR


def cmd_report(args) -> int:
    report = read_report(args.input)
    fmt = args.format
    out = Path(args.out) if args.out else Path(args.input).with_suffix(f".{fmt}")
    write_report(report, out, fmt)
    print(f"{len(report.rows)} rows -> {out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb == "report":
            return cmd_report(args)
        try:
            spec = load_spec(args.config)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}")
        except ValueError as exc:
            raise UsageError(f"bad config: {exc}")
        handler = {
            "solve": cmd_solve,
            "certify": cmd_certify,
            "sweep": cmd_sweep,
            "xcheck": cmd_xcheck,
            "simulate": cmd_simulate,
        }[args.verb]
        return handler(args, spec)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (SolverError, certificates.SubsolutionRejected) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
