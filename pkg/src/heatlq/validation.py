"""Oracle suite behind the ``validate`` subcommand.

Every check returns :class:`~heatlq.montecarlo.Check` rows so the CLI and the
tests report the same numbers.
"""
from __future__ import annotations

import math

import numpy as np

from .assembly import AugmentedOperators, assemble, initial_state
from .closedloop import path_increments, spectral_batch, zero_schedule
from .montecarlo import Check, compare_solution, moment_ode
from .riccati import Solution, solve_riccati, solve_spec, value
from .spectral import GridFunction, build_basis, eval_phi, h1_inner, rho_deriv, rho_eval

RK4_STEPS = (200, 400, 800)
EM_LEVELS = (6, 7, 8, 9, 10)


def _check(name, observed, reference, tol, passed) -> Check:
    return Check(name, float(observed), float(reference), float(tol), bool(passed))


def rho_checks(c: float, mu: float, n: int = 10_001) -> list[Check]:
    xs = np.linspace(0.0, 1.0, n)
    h = xs[1] - xs[0]
    rho = rho_eval(c, mu, xs)
    second = (rho[:-2] - 2.0 * rho[1:-1] + rho[2:]) / (h * h)
    resid = np.abs(-second + (mu - c) * rho[1:-1]).max()
    slope = np.gradient(rho, xs, edge_order=2)
    return [
        _check("rho_bvp_residual", resid, 0.0, 1e-6, resid < 1e-6),
        _check("rho_slope_at_0", abs(slope[0]), 0.0, 1e-6, abs(slope[0]) < 1e-6),
        _check("rho_slope_at_1", abs(slope[-1] - 1.0), 0.0, 1e-6, abs(slope[-1] - 1.0) < 1e-6),
        _check("rho_exact_slope_at_1", abs(rho_deriv(c, mu, 1.0) - 1.0), 0.0, 1e-15,
               abs(rho_deriv(c, mu, 1.0) - 1.0) <= 1e-15),
    ]


def gram_matrix(N: int, n_grid: int = 100_001) -> np.ndarray:
    """H^1 Gram matrix of the sampled basis using grid-function quadrature."""
    basis = build_basis(N)
    xs = np.linspace(0.0, 1.0, n_grid)
    funcs = [GridFunction(xs, eval_phi(basis, n, xs)) for n in range(N + 1)]
    G = np.empty((N + 1, N + 1))
    for i in range(N + 1):
        for j in range(i, N + 1):
            G[i, j] = G[j, i] = h1_inner(funcs[i], funcs[j])
    return G


def gram_check(N: int = 32) -> Check:
    err = np.abs(gram_matrix(N) - np.eye(N + 1)).max()
    return _check("basis_gram_identity", err, 0.0, 1e-6, err < 1e-6)


def rk4_order(ops: AugmentedOperators, T: float, steps=RK4_STEPS) -> float:
    P = [solve_riccati(ops, T, s).Pi[0] for s in steps]
    return math.log2(np.linalg.norm(P[0] - P[1]) / np.linalg.norm(P[1] - P[2]))


def scalar_sde_ops(a: float, c_noise: float) -> AugmentedOperators:
    """dX = a X dt + c_noise X dW with no control, as a 1-dim augmented system."""
    return AugmentedOperators(dim=1, d=1, Atot=[[a]], Ctot=[[c_noise]], Bvec=[0.0],
                              Qmat=[[0.0]], Gmat=[[0.0]], Lrho=[0.0], M0=[1.0], delta=1.0)


def em_strong_errors(paths: int = 1000, seed: int = 7, a: float = 2.0, c_noise: float = 1.0,
                     x0: float = 1.0, levels=EM_LEVELS, backend=None):
    """Mean |X_T^EM - X_T| at dt = 2^-level, T = 1, against the exact path.

    Coarse increments are sums of the finest ones, so all levels share one
    Brownian path per sample.
    """
    ops = scalar_sde_ops(a, c_noise)
    sched = zero_schedule(1, 1.0)
    fine = max(levels)
    n_fine = 2 ** fine
    idx = list(range(paths))
    dW = path_increments(seed, idx, n_fine, 1.0 / n_fine)
    exact = x0 * np.exp((a - 0.5 * c_noise ** 2) + c_noise * dW.sum(axis=1))
    dts, errs = [], []
    for lev in levels:
        block = 2 ** (fine - lev)
        coarse = dW.reshape(paths, 2 ** lev, block).sum(axis=2)
        ZT, _, _ = spectral_batch(ops, sched, [x0], 2.0 ** -lev, seed, idx,
                                  backend=backend, dW=coarse)
        dts.append(2.0 ** -lev)
        errs.append(float(np.mean(np.abs(ZT[:, 0] - exact))))
    return np.array(dts), np.array(errs)


def em_order(**kw) -> float:
    dts, errs = em_strong_errors(**kw)
    return float(np.polyfit(np.log2(dts), np.log2(errs), 1)[0])


def structure_checks(sol: Solution) -> list[Check]:
    Pi = sol.sched.Pi
    asym = max(np.abs(P - P.T).max() for P in Pi)
    eigmin = min(np.linalg.eigvalsh(P).min() for P in Pi)
    term_exact = bool(np.array_equal(Pi[-1], sol.ops.Gmat))
    out = [
        _check("pi_symmetry", asym, 0.0, 1e-10, asym < 1e-10),
        _check("pi_eigmin", eigmin, 0.0, 1e-8, eigmin >= -1e-8),
        _check("pi_terminal_equals_G", 0.0 if term_exact else 1.0, 0.0, 0.0, term_exact),
    ]
    F0 = value(sol.sched, sol.Z0)
    worst = math.inf
    for h in (0.1, 0.01, -0.1, -0.01):
        worst = min(worst, value(sol.sched, initial_state(sol.ops, sol.u0 + h)) - F0)
    out.append(_check("optimal_u0_variational", worst, 0.0, 0.0, worst >= 0.0))
    return out


def stabilization_ratio(sol: Solution) -> float:
    """Closed-loop E|X_T|^2 over the open-loop value (K = 0, U0 = 0)."""
    d = sol.ops.d
    closed = moment_ode(sol.ops, sol.sched, sol.Z0).M[-1]
    opened = moment_ode(sol.ops, sol.sched, sol.ops.M0, gains=np.zeros_like(sol.sched.K)).M[-1]
    return float(np.trace(closed[:d, :d]) / np.trace(opened[:d, :d]))


def run_suite(spec, paths: int | None = None, seed: int | None = None, workers: int = 1,
              backend=None) -> list[Check]:
    """All oracle checks for ``spec``; fast enough for routine use."""
    paths = spec.disc.mc_paths if paths is None else paths
    seed = spec.disc.seed if seed is None else seed
    sol = solve_spec(spec)
    checks = rho_checks(spec.pde.c, spec.control.mu)
    checks.append(gram_check())
    order = rk4_order(assemble(spec, build_basis(spec.disc.N)), spec.cost.T)
    checks.append(_check("rk4_order", order, 4.0, 0.5, abs(order - 4.0) <= 0.5))
    slope = em_order(seed=seed, backend=backend)
    checks.append(_check("em_strong_order", slope, 0.5, 0.1, 0.4 <= slope <= 0.6))
    checks.extend(structure_checks(sol))
    ratio = stabilization_ratio(sol)
    checks.append(_check("stabilization_ratio", ratio, 0.0, 0.1, ratio <= 0.1))
    report = compare_solution(sol, spec.disc.sim_dt, paths, seed, workers, backend)
    checks.extend(report.checks)
    return checks
