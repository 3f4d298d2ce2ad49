"""Command-line entry point: ``covmatch <subcommand> ...``.

Exit codes: 0 success, 1 input error, 2 capacity error, 3 failed ``--check``.
Every output starts with the fully resolved configuration (a ``# config:``
line for CSV, a ``config`` key for JSON) so runs can be reproduced.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._numbers import format_scalar, jsonable, parse_scalar
from .covariance import load_scheme, save_scheme, scheme_to_dict
from .errors import CapacityError, CovmatchError, InputError
from .moments import DEFAULT_MAX_ORDER, certify_order, enumerate_indices

EXIT_OK, EXIT_INPUT, EXIT_CAPACITY, EXIT_CHECK = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _default_seed() -> int:
    raw = os.environ.get("FK_SEED", "0")
    try:
        return int(raw)
    except ValueError as exc:
        raise InputError(f"FK_SEED must be an integer, got {raw!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from exc
    return lo, hi


def _common(p: argparse.ArgumentParser, fmt: str):
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default=fmt, help=f"output format (default {fmt})")
    p.add_argument("--threads", type=int, default=1, help="cap on worker threads (default 1)")
    p.add_argument("--check", action="store_true", help="exit 3 if the run's acceptance check fails")
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="covmatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("enumerate", help="list Diophantine indices with d and n")
    p.add_argument("--mu", type=int, required=True, help="list indices for mu = 1..MU")
    _common(p, "csv")

    p = sub.add_parser("certify", help="certify the convergence order of a scheme")
    p.add_argument("scheme", help="scheme JSON path or builtin:<name>")
    p.add_argument("--order", type=int, required=True, help="highest order to check")
    p.add_argument("--tol", type=float, default=1e-10, help="coefficient tolerance for float schemes")
    p.add_argument("--max-order", type=int, default=DEFAULT_MAX_ORDER, help="capacity cap on n + d")
    p.add_argument("--polynomials", action="store_true", help="include both polynomials per condition")
    p.add_argument("--expect", type=int, help="with --check, the certified order required (default --order)")
    _common(p, "json")

    p = sub.add_parser("oracle", help="cross-check moments: Isserlis vs moment polynomials")
    p.add_argument("scheme", help="'brownian', a scheme JSON path, or builtin:<name>")
    p.add_argument("--mu", type=int, required=True, help="check all indices with mu = 1..MU")
    p.add_argument("--tol", type=float, default=1e-12, help="tolerance for float schemes")
    _common(p, "csv")

    p = sub.add_parser("design", help="search for a scheme of a given order")
    p.add_argument("--nq", type=int, required=True, help="number of quadrature knots")
    p.add_argument("--nnu", type=int, required=True, help="number of bridge functions")
    p.add_argument("--order", type=int, required=True, help="target order")
    p.add_argument("--starts", type=int, default=32, help="number of random starts (default 32)")
    p.add_argument("--seed", type=int, default=None, help="seed (default FK_SEED or 0)")
    p.add_argument("--knots", help="pin the upper knots, comma-separated (p/q allowed)")
    p.add_argument("--parities", help="sym/anti per bridge function, comma-separated")
    p.add_argument("--tol", type=float, default=1e-10, help="residual tolerance (default 1e-10)")
    p.add_argument("--max-nfev", type=int, default=200, help="evaluations per start")
    p.add_argument("--log", help="write the per-start log CSV here")
    p.add_argument("--out", help="write the best scheme JSON here")
    p.add_argument("--threads", type=int, default=1, help="cap on worker threads (default 1)")
    p.add_argument("--check", action="store_true", help="exit 3 unless the result certifies")
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")

    p = sub.add_parser("trotter", help="Lie-Trotter convergence against an analytic kernel")
    p.add_argument("--scheme", required=True, help="scheme JSON path or builtin:<name>")
    p.add_argument("--potential", default="harmonic:omega=1", help="harmonic:omega=W | quartic:a=A | constant:c=C | free | table:file.csv")
    p.add_argument("--beta", type=float, default=1.0, help="inverse temperature")
    p.add_argument("--n", type=_int_list, default=[3, 7, 15, 31, 63], help="comma-separated n values")
    p.add_argument("--grid", default=None, help="x_min:x_max:N (default -8sqrt(beta):8sqrt(beta):512)")
    p.add_argument("--x", type=float, default=0.0, help="left coordinate")
    p.add_argument("--xp", type=float, default=0.0, help="right coordinate")
    p.add_argument("--gh-level", type=int, default=8, help="Gauss-Hermite nodes per bridge variable")
    p.add_argument("--summary", help="write the JSON summary here (default: trailing '# summary:' line)")
    p.add_argument("--expect-slope", type=_range, help="with --check, required slope range lo:hi")
    _common(p, "csv")

    p = sub.add_parser("sample", help="Levy-Ciesielski paths and sampling statistics")
    p.add_argument("--mode", choices=("paths", "covariance", "tail", "discretization"), default="paths",
                   help="what to emit (default paths)")
    p.add_argument("--seed", type=int, default=None, help="seed (default FK_SEED or 0)")
    p.add_argument("--streams", type=int, default=1, help="number of independent substreams")
    p.add_argument("--k", type=_int_list, default=[4], help="dyadic level(s), comma-separated")
    p.add_argument("--samples", type=int, default=None, help="number of samples")
    p.add_argument("--scheme", help="scheme for tail/discretization modes")
    p.add_argument("--u", type=float, default=0.25, help="first time for covariance mode")
    p.add_argument("--tau", type=float, default=0.75, help="second time for covariance mode")
    p.add_argument("--potential", default="harmonic:omega=1", help="potential for discretization mode")
    p.add_argument("--beta", type=float, default=1.0, help="inverse temperature for discretization mode")
    p.add_argument("--x", type=float, default=0.0, help="left coordinate for discretization mode")
    p.add_argument("--xp", type=float, default=0.0, help="right coordinate for discretization mode")
    _common(p, "csv")
    return parser


# output helpers

def _config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose",)}
    return json.loads(json.dumps(cfg, default=str))


def _csv_text(args, header, rows, trailer: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(_config(args), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    if trailer is not None:
        buf.write("# summary: " + json.dumps(trailer, sort_keys=True) + "\n")
    return buf.getvalue()


def _cell(v):
    if isinstance(v, bool) or isinstance(v, str):
        return str(v).lower() if isinstance(v, bool) else v
    if isinstance(v, (int, Fraction, float, np.floating)):
        return format_scalar(v if not isinstance(v, np.floating) else float(v))
    if v is None:
        return ""
    return str(v)


def _json_text(args, payload: dict) -> str:
    return json.dumps({"config": _config(args), **payload}, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _log(args, msg):
    if getattr(args, "verbose", False):
        print(msg, file=sys.stderr)


def _write(args, header, rows, payload_key, trailer=None):
    if args.format == "json":
        items = [dict(zip(header, (jsonable(v) if not isinstance(v, (str, bool)) and v is not None else v for v in r))) for r in rows]
        payload = {payload_key: items}
        if trailer is not None:
            payload["summary"] = trailer
        _emit(_json_text(args, payload), args.out)
    else:
        _emit(_csv_text(args, header, rows, trailer), args.out)


# subcommands

def cmd_enumerate(args) -> int:
    if args.mu < 1:
        raise InputError(f"--mu must be >= 1, got {args.mu}")
    rows = []
    for mu in range(1, args.mu + 1):
        for z in enumerate_indices(mu):
            rows.append([str(z), mu, z.d, z.n])
    _write(args, ["zeta", "mu", "d", "n"], rows, "indices")
    return EXIT_OK


def cmd_certify(args) -> int:
    scheme = load_scheme(args.scheme)
    report = certify_order(scheme, args.order, tol=args.tol, max_order=args.max_order, threads=args.threads)
    if args.format == "json":
        _emit(_json_text(args, report.to_json(polynomials=args.polynomials)), args.out)
    else:
        rows = [[c.n, c.d, c.max_residual, c.passed] for c in report.conditions]
        trailer = {"scheme": report.scheme, "certified_order": report.certified_order}
        _emit(_csv_text(args, ["n", "d", "max_residual", "pass"], rows, trailer), args.out)
    expected = args.expect if args.expect is not None else args.order
    return EXIT_CHECK if args.check and report.certified_order != expected else EXIT_OK


def cmd_oracle(args) -> int:
    from .wick import cross_validate

    if args.mu < 1:
        raise InputError(f"--mu must be >= 1, got {args.mu}")
    scheme = None if args.scheme == "brownian" else load_scheme(args.scheme)
    rows, ok = [], True
    for mu in range(1, args.mu + 1):
        for z in enumerate_indices(mu):
            cv = cross_validate(z, scheme)
            exact = isinstance(cv.diff, Fraction)
            ok &= (cv.diff == 0) if exact else abs(cv.diff) <= args.tol
            rows.append([str(z), mu, z.d, z.n, cv.direct, cv.polynomial, cv.diff])
            _log(args, f"{z}: diff {cv.diff}")
    header = ["zeta", "mu", "d", "n", "direct_value", "polynomial_value", "diff"]
    _write(args, header, rows, "rows")
    return EXIT_CHECK if args.check and not ok else EXIT_OK


def cmd_design(args) -> int:
    from .designer import DesignProblem, design_scheme
    from .sampling import RandomStream

    seed = args.seed if args.seed is not None else _default_seed()
    args.seed = seed
    knots = tuple(parse_scalar(v.strip()) for v in args.knots.split(",")) if args.knots else None
    parities = tuple(p.strip() for p in args.parities.split(",")) if args.parities else None
    problem = DesignProblem(args.nq, args.nnu, args.order, knots=knots, parities=parities)
    result = design_scheme(problem, starts=args.starts, stream=RandomStream(seed), tol=args.tol,
                           max_nfev=args.max_nfev, threads=args.threads)
    if args.out:
        save_scheme(result.scheme, args.out)
    if args.log:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["start", "iterations", "residual"])
        for entry in result.log:
            w.writerow([entry.start, entry.iterations, format_scalar(entry.residual)])
        Path(args.log).write_text(buf.getvalue(), encoding="utf-8")
    payload = {
        "scheme": scheme_to_dict(result.scheme),
        "residual_norm": result.residual_norm,
        "certified_order": result.certified_order,
        "certified": result.certified,
        "exact": result.exact,
    }
    sys.stdout.write(json.dumps({"config": _config(args), **payload}, indent=2, sort_keys=True) + "\n")
    return EXIT_CHECK if args.check and not result.certified else EXIT_OK


def cmd_trotter(args) -> int:
    from .trotter import (
        PhysicalParams,
        SpatialGrid,
        estimate_convergence_order,
        free_particle_kernel,
        parse_potential,
        reference_harmonic_kernel,
        trotter_compose,
    )

    scheme = load_scheme(args.scheme)
    potential = parse_potential(args.potential)
    params = PhysicalParams(args.beta)
    grid = SpatialGrid.parse(args.grid) if args.grid else SpatialGrid.default(args.beta)
    if potential.kind == "harmonic":
        ref = float(reference_harmonic_kernel(args.x, args.xp, args.beta, potential.omega))
    elif potential.kind == "constant":
        ref = float(free_particle_kernel(args.x, args.xp, params)) * float(np.exp(-args.beta * potential.v0))
    else:
        raise InputError(f"no analytic reference for potential kind {potential.kind!r}")
    rows, errors, warnings = [], [], []
    for n in args.n:
        res = trotter_compose(scheme, potential, params, n, grid, level=args.gh_level)
        value = res.at(args.x, args.xp)
        err = abs(value - ref)
        rows.append([n, value, ref, err])
        errors.append((n, err))
        if res.boundary_warning:
            warnings.append(n)
        _log(args, f"n={n}: {value!r} (error {err:.3e})")
    summary = {"scheme": scheme.name, "reference": ref, "boundary_warning_n": warnings}
    ok = True
    if len(errors) >= 4:
        fit = estimate_convergence_order(errors)
        summary.update(slope=fit.slope, slope_stderr=fit.stderr, excluded=[n for n, _ in fit.excluded])
        if args.expect_slope:
            lo, hi = args.expect_slope
            ok = lo <= fit.slope <= hi
    elif args.check and args.expect_slope:
        raise InputError("slope check needs at least 4 values of n")
    header = ["n", "value", "reference", "abs_error"]
    if args.summary:
        Path(args.summary).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        _write(args, header, rows, "rows")
    else:
        _write(args, header, rows, "rows", trailer=summary)
    return EXIT_CHECK if args.check and not ok else EXIT_OK


def cmd_sample(args) -> int:
    from . import sampling
    from .trotter import PhysicalParams, parse_potential, reference_harmonic_kernel, free_particle_kernel, standard_discretization_mc

    seed = args.seed if args.seed is not None else _default_seed()
    args.seed = seed
    stream = sampling.RandomStream(seed)
    if any(k < 1 for k in args.k):
        raise InputError(f"levels must be >= 1, got {args.k}")
    ok = True
    if args.mode == "paths":
        samples = args.samples or 1
        rows = []
        for k in args.k:
            paths = sampling.levy_ciesielski_paths(k, samples, stream)
            for s in range(samples):
                for j, value in enumerate(paths[s]):
                    rows.append([k, s, j, Fraction(j, 2**k), value])
        _write(args, ["k", "sample", "j", "u", "value"], rows, "rows")
    elif args.mode == "covariance":
        samples = args.samples or 100_000
        rows = []
        for k in args.k:
            grid = np.arange(2**k + 1) / 2**k
            i = int(np.searchsorted(grid, args.u))
            j = int(np.searchsorted(grid, args.tau))
            if i > 2**k or j > 2**k or grid[i] != args.u or grid[j] != args.tau:
                raise InputError(f"u and tau must be dyadic points of level {k}")
            paths = sampling.levy_ciesielski_paths(k, samples, stream)
            est, se = sampling.empirical_covariance(paths, i, j)
            expected = min(args.u, args.tau) - args.u * args.tau
            endpoints = bool(np.all(paths[:, 0] == 0) and np.all(paths[:, -1] == 0))
            passed = abs(est - expected) <= 3 * se and endpoints
            ok &= passed
            rows.append([k, samples, args.u, args.tau, est, se, expected, endpoints, passed])
        _write(args, ["k", "samples", "u", "tau", "estimate", "stderr", "expected", "endpoints_zero", "pass"], rows, "rows")
    elif args.mode == "tail":
        if not args.scheme:
            raise InputError("tail mode needs --scheme")
        scheme = load_scheme(args.scheme)
        samples = args.samples or 10_000
        rows = []
        for k in args.k:
            st = sampling.tail_sup_statistic(scheme, k, samples, stream, args.streams, args.threads)
            ok &= st.within_bound
            rows.append([k, samples, st.estimate, st.stderr, st.bound, st.within_bound])
        _write(args, ["k", "samples", "estimate", "stderr", "bound", "pass"], rows, "rows")
    else:
        if not args.scheme:
            raise InputError("discretization mode needs --scheme")
        scheme = load_scheme(args.scheme)
        potential = parse_potential(args.potential)
        params = PhysicalParams(args.beta)
        samples = args.samples or 100_000
        ratio = None
        if potential.kind == "harmonic":
            ratio = float(reference_harmonic_kernel(args.x, args.xp, args.beta, potential.omega)
                          / free_particle_kernel(args.x, args.xp, params))
        rows = []
        for k in args.k:
            est = standard_discretization_mc(scheme, potential, args.x, args.xp, params, k, samples,
                                             stream, streams=args.streams, threads=args.threads)
            passed = ratio is None or abs(est.mean - ratio) <= 3 * est.stderr
            ok &= passed
            rows.append([k, samples, est.mean, est.stderr, ratio, passed])
        _write(args, ["k", "samples", "mean", "stderr", "reference_ratio", "pass"], rows, "rows")
    return EXIT_CHECK if args.check and not ok else EXIT_OK


COMMANDS = {
    "enumerate": cmd_enumerate,
    "certify": cmd_certify,
    "oracle": cmd_oracle,
    "design": cmd_design,
    "trotter": cmd_trotter,
    "sample": cmd_sample,
}


def run(argv=None) -> int:
    """Parse ``argv`` and dispatch; returns the exit code instead of raising."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise InputError("--threads must be >= 1")
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except CapacityError as exc:
        print(f"error: kind=capacity reason={exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except CovmatchError as exc:
        print(f"error: kind={exc.kind} reason={exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: kind=input reason={exc.strerror}: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
