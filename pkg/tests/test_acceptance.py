"""End-to-end acceptance criteria at the shipped parameters.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary.
"""
import filecmp
import os
import time

import numpy as np
import pytest

from heatlq.cli import run
from heatlq.closedloop import zero_schedule
from heatlq.convergence import sweep_N
from heatlq.montecarlo import compare_solution, estimate_cost, full_plant_second_moment, summarize
from heatlq.montecarlo import sample_spectral
from heatlq.riccati import solve_spec
from heatlq.validation import (
    em_order,
    gram_check,
    rho_checks,
    rk4_order,
    stabilization_ratio,
    structure_checks,
)

from .conftest import ACCEPTANCE_LINES, DEFAULT_CONFIG

WORKERS = max(1, min(8, os.cpu_count() or 1))


def report(number, name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def test_criterion_1_tri_oracle(base_spec, base_sol):
    t0 = time.perf_counter()
    rep = compare_solution(base_sol, base_spec.disc.sim_dt, 10_000, base_spec.disc.seed,
                           workers=WORKERS)
    elapsed = time.perf_counter() - t0
    ok = rep.passed and elapsed < 120.0
    c_rm, c_mc = rep.checks
    detail = (f"riccati={rep.riccati_value:.6f} moment={rep.moment_value:.6f} "
              f"(|diff|={abs(c_rm.observed - c_rm.reference):.2e} <= {c_rm.tolerance:.2e}); "
              f"MC={rep.estimate.mean:.3f}+-{rep.estimate.std_err:.3f} "
              f"(|diff|={abs(c_mc.observed - c_mc.reference):.3f} <= {c_mc.tolerance:.3f}); "
              f"{elapsed:.1f}s < 120s")
    assert report(1, "tri-oracle cost agreement", ok, detail)


def test_criterion_2_stabilization(base_sol):
    ratio = stabilization_ratio(base_sol)
    assert report(2, "stabilization", ratio <= 0.1,
                  f"closed/open E[X_T^2] = {ratio:.4f} <= 0.1")


def test_criterion_3_convergence(base_spec):
    t0 = time.perf_counter()
    rep = sweep_N(base_spec, [2, 4, 8, 16], N_ref=32)
    elapsed = time.perf_counter() - t0
    gaps = [abs(v - rep.ref_value) for v in rep.values]
    dec = all(a > b for a, b in zip(gaps, gaps[1:]))
    v16 = gaps[-1] < 0.02 * abs(rep.ref_value)
    u16 = abs(rep.u0s[-1] - rep.ref_u0) < 0.05 * (1 + abs(rep.ref_u0))
    sg = all(a > b for a, b in zip(rep.semigroup_errs, rep.semigroup_errs[1:]))
    ok = dec and v16 and u16 and sg and elapsed < 60.0
    detail = (f"gaps={['%.3g' % g for g in gaps]} v32={rep.ref_value:.4f} "
              f"|u0_16-u0_32|={abs(rep.u0s[-1] - rep.ref_u0):.2e} "
              f"semigroup={['%.3g' % e for e in rep.semigroup_errs]} {elapsed:.1f}s < 60s")
    assert report(3, "convergence in N", ok, detail)


def test_criterion_4_method_orders(base_sol, base_spec):
    rk = rk4_order(base_sol.ops, base_spec.cost.T)
    em = em_order(paths=1000, seed=base_spec.disc.seed)
    ok = abs(rk - 4.0) <= 0.5 and 0.4 <= em <= 0.6
    assert report(4, "numerical orders", ok,
                  f"RK4 order {rk:.3f} (4 +- 0.5); EM strong slope {em:.3f} in [0.4, 0.6]")


def test_criterion_5_structure(base_spec, base_sol):
    checks = structure_checks(base_sol) + [gram_check(32)]
    checks += [c for c in rho_checks(base_spec.pde.c, base_spec.control.mu)
               if c.name == "rho_bvp_residual"]
    ok = all(c.passed for c in checks)
    detail = "; ".join(f"{c.name}={c.observed:.3g}" for c in checks)
    assert report(5, "structural invariants", ok, detail)


@pytest.mark.slow
def test_criterion_6_full_plant(base_spec):
    spec = base_spec.replace(disc__N=8, disc__fd_grid_points=256, disc__mc_paths=10_000)
    t0 = time.perf_counter()
    sol = solve_spec(spec)
    full_x2, _ = full_plant_second_moment(spec, sol, 10_000, spec.disc.seed, WORKERS)
    ZT, _ = sample_spectral(sol.ops, sol.sched, sol.Z0, spec.disc.sim_dt, 10_000,
                            spec.disc.seed, WORKERS)
    spec_x2 = summarize(ZT[:, 0] ** 2, spec.disc.seed)
    elapsed = time.perf_counter() - t0
    rel = abs(full_x2.mean - spec_x2.mean) / abs(spec_x2.mean)
    ok = rel <= 0.15 and elapsed < 600.0
    detail = (f"full E[X_T^2]={full_x2.mean:.4f}+-{full_x2.std_err:.3f} "
              f"spectral={spec_x2.mean:.4f}+-{spec_x2.std_err:.3f} rel={rel:.4f} <= 0.15; "
              f"{elapsed:.1f}s < 600s")
    assert report(6, "full-plant cross-check", ok, detail)


def test_criterion_7_determinism(tmp_path, base_spec, base_sol):
    dirs = [tmp_path / "a", tmp_path / "b"]
    codes = [run(["validate", "--config", str(DEFAULT_CONFIG), "--out-dir", str(d)])[0]
             for d in dirs]
    names = sorted(p.name for p in dirs[0].iterdir())
    _, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
    same_files = not mismatch and not errors and "validate.csv" in names
    one = estimate_cost(base_spec, base_sol.ops, base_sol.sched, paths=10_000, workers=1)
    many = estimate_cost(base_spec, base_sol.ops, base_sol.sched, paths=10_000,
                         workers=max(WORKERS, 4))
    diff = abs(one.mean - many.mean)
    ok = same_files and diff <= 1e-12 and codes == [0, 0]
    assert report(7, "determinism", ok,
                  f"validate outputs byte-identical={same_files} ({', '.join(names)}); "
                  f"exit codes {codes}; |mean_1 - mean_{max(WORKERS, 4)}|={diff:.1e} <= 1e-12")
