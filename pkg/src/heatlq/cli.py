"""Command-line entry point: ``heatlq <subcommand> --config FILE [options]``.

Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure or a
failed check, 3 I/O failure.  Every run writes ``run_manifest.json``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, _backend
from .assembly import dump_operators
from .closedloop import path_rng, reconstruct_u, simulate_full, simulate_spectral
from .convergence import sweep_N
from .errors import BlowupError, DomainError, ParseError, ValidationError
from .model import load_spec, spec_to_dict
from .montecarlo import Check, compare_solution, full_plant_second_moment, sample_spectral, summarize
from .riccati import solve_spec
from .validation import run_suite

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
FMT = "%.17g"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heatlq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", required=True, help="JSON problem configuration")
        p.add_argument("--seed", type=int, help="override discretization.seed")
        p.add_argument("--paths", type=int, help="override discretization.mc_paths")
        p.add_argument("--modes", type=int, help="override discretization.N")
        p.add_argument("--out-dir", default=".", help="directory for outputs")
        p.add_argument("--workers", type=int, default=1, help="Monte Carlo threads")
        return p

    p = common(sub.add_parser("solve", help="Riccati gains and optimal value"))
    p.add_argument("--dump-operators", action="store_true",
                   help="also write every augmented block as CSV")
    p = common(sub.add_parser("simulate", help="one spectral closed-loop path"))
    p.add_argument("--path-index", type=int, default=0)
    p.add_argument("--field", action="store_true", help="also write u_field.csv")
    p.add_argument("--field-every", type=int, default=10, help="time subsampling of u_field")
    common(sub.add_parser("montecarlo", help="Monte Carlo vs Riccati vs moment ODE"))
    p = common(sub.add_parser("full-sim", help="original PDE+SDE plant under the feedback"))
    p.add_argument("--field-every", type=int, default=10)
    p.add_argument("--tolerance", type=float, default=0.15,
                   help="relative E|X_T|^2 agreement required with the spectral loop")
    p = common(sub.add_parser("converge", help="sweep the number of modes"))
    p.add_argument("--Ns", default="2,4,8,16", help="comma-separated mode counts")
    p.add_argument("--n-ref", type=int, default=32)
    common(sub.add_parser("validate", help="run the oracle suite"))
    return parser


def _resolve_spec(args):
    spec = load_spec(args.config)
    over = {}
    if args.seed is not None:
        over["disc__seed"] = args.seed
    if args.paths is not None:
        over["disc__mc_paths"] = args.paths
    if args.modes is not None:
        over["disc__N"] = args.modes
    return spec.replace(**over) if over else spec


def _write_csv(path: Path, header: list[str], rows) -> Path:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    np.savetxt(path, rows, delimiter=",", header=",".join(header), comments="", fmt=FMT)
    return path


def _write_checks(path: Path, checks: list[Check]) -> Path:
    with open(path, "w") as fh:
        fh.write("check,observed,reference,tolerance,passed\n")
        for c in checks:
            fh.write(f"{c.name},{c.observed:.17g},{c.reference:.17g},{c.tolerance:.17g},"
                     f"{int(c.passed)}\n")
    return path


def _print_checks(checks: list[Check]) -> None:
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}: observed={c.observed:.6g} reference={c.reference:.6g} "
              f"tol={c.tolerance:.3g}")


def _trajectory_rows(times, X, U, V, z):
    return np.column_stack([times, X, U, V, z])


def _traj_header(d, n_modes):
    return (["t"] + [f"X_{i}" for i in range(d)] + ["U", "V"]
            + [f"z_{n}" for n in range(n_modes)])


def cmd_solve(spec, args, out: Path):
    sol = solve_spec(spec)
    dim = sol.ops.dim
    files = [_write_csv(out / "gains.csv", ["t"] + [f"K_{i}" for i in range(dim)],
                        np.column_stack([sol.sched.times, sol.sched.K]))]
    path = out / "value.txt"
    path.write_text(f"value {sol.value:.17g}\nu0 {sol.u0:.17g}\n")
    files.append(path)
    if args.dump_operators:
        files.extend(dump_operators(sol.ops, out / "operators"))
    print(f"value {sol.value:.10g}")
    print(f"u0 {sol.u0:.10g}")
    return [], files


def cmd_simulate(spec, args, out: Path):
    sol = solve_spec(spec)
    path = simulate_spectral(sol.ops, sol.sched, sol.Z0, spec.disc.sim_dt,
                             rng=path_rng(spec.disc.seed, args.path_index))
    d = sol.ops.d
    files = [_write_csv(out / "trajectory.csv", _traj_header(d, sol.ops.n_modes),
                        _trajectory_rows(path.times, path.X, path.U, path.V, path.z_coeffs))]
    if args.field:
        xs = np.linspace(0.0, 1.0, spec.disc.fd_grid_points)
        fields = reconstruct_u(sol.basis, path, spec.pde.c, spec.control.mu, xs)
        rows = [(t, x, u) for k, (t, g) in enumerate(zip(path.times, fields))
                if k % args.field_every == 0 or k == len(fields) - 1
                for x, u in zip(g.xs, g.values)]
        files.append(_write_csv(out / "u_field.csv", ["t", "x", "u"], rows))
    print(f"running_cost {path.running_cost:.10g}")
    print(f"terminal_cost {path.terminal_cost:.10g}")
    return [], files


def cmd_montecarlo(spec, args, out: Path):
    sol = solve_spec(spec)
    rep = compare_solution(sol, spec.disc.sim_dt, spec.disc.mc_paths, spec.disc.seed,
                           args.workers)
    print(f"mean {rep.estimate.mean:.10g}")
    print(f"std_err {rep.estimate.std_err:.10g}")
    print(f"riccati_value {rep.riccati_value:.10g}")
    print(f"moment_ode_value {rep.moment_value:.10g}")
    _print_checks(rep.checks)
    return rep.checks, [_write_checks(out / "compare.csv", rep.checks)]


def cmd_full_sim(spec, args, out: Path):
    sol = solve_spec(spec)
    seed, paths = spec.disc.seed, spec.disc.mc_paths
    one = simulate_full(spec, sol.sched, sol.basis, sol.u0, rng=path_rng(seed, 0))
    files = [_write_csv(out / "trajectory.csv", _traj_header(sol.ops.d, sol.ops.n_modes),
                        _trajectory_rows(one.times, one.X_path, one.U_path, one.V_path,
                                         one.z_path))]
    rows = [(t, x, u) for k, t in enumerate(one.times)
            if k % args.field_every == 0 or k == len(one.times) - 1
            for x, u in zip(one.u.xs, one.u_path[k])]
    files.append(_write_csv(out / "u_field.csv", ["t", "x", "u"], rows))

    full_x2, full_cost = full_plant_second_moment(spec, sol, paths, seed, args.workers)
    ZT, costs = sample_spectral(sol.ops, sol.sched, sol.Z0, spec.disc.sim_dt, paths, seed,
                                args.workers)
    spec_x2 = summarize((ZT[:, :sol.ops.d] ** 2).sum(axis=1), seed)
    spec_cost = summarize(costs, seed)
    rel = abs(full_x2.mean - spec_x2.mean) / abs(spec_x2.mean)
    checks = [Check("full_vs_spectral_EXT2", full_x2.mean, spec_x2.mean, args.tolerance,
                    rel <= args.tolerance)]
    with open(out / "full_compare.csv", "w") as fh:
        fh.write("quantity,full_plant,spectral,full_std_err,spectral_std_err\n")
        fh.write(f"E_XT2,{full_x2.mean:.17g},{spec_x2.mean:.17g},{full_x2.std_err:.17g},"
                 f"{spec_x2.std_err:.17g}\n")
        fh.write(f"cost,{full_cost.mean:.17g},{spec_cost.mean:.17g},{full_cost.std_err:.17g},"
                 f"{spec_cost.std_err:.17g}\n")
    files.append(out / "full_compare.csv")
    print(f"full_plant E|X_T|^2 {full_x2.mean:.10g} +- {full_x2.std_err:.3g}")
    print(f"spectral   E|X_T|^2 {spec_x2.mean:.10g} +- {spec_x2.std_err:.3g}")
    _print_checks(checks)
    return checks, files


def cmd_converge(spec, args, out: Path):
    try:
        Ns = [int(s) for s in args.Ns.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--Ns must be comma-separated integers, got {args.Ns!r}") from None
    rep = sweep_N(spec, Ns, args.n_ref)
    rows = list(rep.rows()) + [(rep.N_ref, rep.ref_value, rep.ref_u0, 0.0, 0.0)]
    files = [_write_csv(out / "convergence.csv",
                        ["N", "value", "u0_opt", "gain_dist", "semigroup_err"], rows)]
    gaps = [abs(v - rep.ref_value) for v in rep.values]
    decreasing = all(a > b for a, b in zip(gaps, gaps[1:]))
    sg_decreasing = all(a > b for a, b in zip(rep.semigroup_errs, rep.semigroup_errs[1:]))
    checks = [
        Check("value_gap_decreasing", float(decreasing), 1.0, 0.0, decreasing),
        Check("semigroup_err_decreasing", float(sg_decreasing), 1.0, 0.0, sg_decreasing),
    ]
    for row in rows:
        print("N={:<4d} value={:.10g} u0={:.10g} gain_dist={:.3e} semigroup_err={:.3e}".format(
            int(row[0]), *row[1:]))
    _print_checks(checks)
    return checks, files


def cmd_validate(spec, args, out: Path):
    checks = run_suite(spec, workers=args.workers)
    _print_checks(checks)
    return checks, [_write_checks(out / "validate.csv", checks)]


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "montecarlo": cmd_montecarlo,
    "full-sim": cmd_full_sim,
    "converge": cmd_converge,
    "validate": cmd_validate,
}


def _manifest(args, spec, out: Path) -> Path:
    data = {
        "command": args.command,
        "version": __version__,
        "backend": _backend.NAME,
        "seed": spec.disc.seed,
        "config": spec_to_dict(spec),
    }
    path = out / "run_manifest.json"
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def run(argv=None) -> tuple[int, list[Path]]:
    """Execute one subcommand; returns (exit code, written files)."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT, []
    try:
        spec = _resolve_spec(args)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = [_manifest(args, spec, out)]
        checks, written = COMMANDS[args.command](spec, args, out)
        files.extend(written)
    except (ParseError, ValidationError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT, []
    except (BlowupError, DomainError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC, []
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO, []
    return (EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERIC), files


def main(argv=None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
