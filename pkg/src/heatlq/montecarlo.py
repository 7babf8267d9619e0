"""Expected cost of the closed loop: Monte Carlo estimate and moment-ODE oracle.

For dZ = A_cl(t) Z dt + C Z dW with A_cl = Atot - Bvec K(t), the second
moment M = E[Z Z^T] obeys dM/dt = A_cl M + M A_cl^T + C M C^T, so the
expected cost tr[(Q + delta K^T K) M] integrated plus tr[G M(T)] needs no
sampling.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assembly import AugmentedOperators, initial_state
from .closedloop import full_batch, full_plant_setup, spectral_batch
from .errors import BlowupError
from .riccati import GainSchedule, Solution, optimal_u0, solve_spec, value

CHUNK = 256
MOMENT_BLOWUP = 1e12


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    std_err: float
    paths: int
    seed: int


@dataclass(frozen=True, eq=False)
class MomentSolution:
    times: np.ndarray
    M: np.ndarray  # (steps+1, dim, dim)
    cost: float


def _chunks(paths: int):
    return [list(range(s, min(s + CHUNK, paths))) for s in range(0, paths, CHUNK)]


def run_paths(batch_fn, paths: int, workers: int = 1):
    """Apply ``batch_fn(indices)`` over all path indices; concatenate results in index order.

    ``batch_fn`` returns a tuple of arrays whose leading axis follows ``indices``.
    """
    chunks = _chunks(paths)
    if workers <= 1:
        parts = [batch_fn(ix) for ix in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(batch_fn, chunks))
    return tuple(np.concatenate(cols) for cols in zip(*parts))


def summarize(samples, seed: int) -> CostEstimate:
    """Mean and standard error; exactly rounded sums so order cannot matter."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 2 or np.all(x == x[0]):
        return CostEstimate(float(x[0]), 0.0, n, seed)
    mean = math.fsum(x) / n
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return CostEstimate(mean, math.sqrt(var / n), n, seed)


def sample_spectral(ops: AugmentedOperators, sched: GainSchedule, Z0, dt: float, paths: int,
                    seed: int, workers: int = 1, backend=None):
    """Per-path (Z_T, total cost) of the spectral closed loop."""
    def fn(ix):
        return spectral_batch(ops, sched, Z0, dt, seed, ix, backend=backend)

    try:
        ZT, run, term = run_paths(fn, paths, workers)
    except BlowupError as exc:
        raise BlowupError(f"Monte Carlo path {exc.path_index} diverged: {exc}",
                          path_index=exc.path_index) from exc
    return ZT, run + term


def estimate_cost(spec, ops: AugmentedOperators, sched: GainSchedule, paths: int | None = None,
                  seed: int | None = None, Z0=None, workers: int = 1, backend=None) -> CostEstimate:
    """Sample mean of the realized J_delta integrand over independent paths."""
    paths = spec.disc.mc_paths if paths is None else paths
    seed = spec.disc.seed if seed is None else seed
    if paths < 2:
        raise ValueError("need at least 2 paths for a standard error")
    if Z0 is None:
        Z0 = initial_state(ops, _u0_for(spec, ops, sched))
    _, costs = sample_spectral(ops, sched, Z0, spec.disc.sim_dt, paths, seed, workers, backend)
    return summarize(costs, seed)


def _u0_for(spec, ops, sched):
    if spec.control.u0_mode == "fixed":
        return spec.control.u0_value
    return optimal_u0(sched, ops)


def moment_ode(ops: AugmentedOperators, sched: GainSchedule, Z0, gains=None) -> MomentSolution:
    """Second moment of the closed loop under ``gains`` (default: the schedule's K).

    RK4 on the schedule grid; midpoint gains are the average of the two
    bracketing nodes, matching linear interpolation.
    """
    K = sched.K if gains is None else np.asarray(gains, dtype=float)
    times = sched.times
    A, C, b = ops.Atot, ops.Ctot, ops.Bvec
    Z0 = np.asarray(Z0, dtype=float)
    M = np.outer(Z0, Z0)
    out = np.empty((len(times), ops.dim, ops.dim))
    out[0] = M

    def f(M, k):
        Acl = A - np.outer(b, k)
        AM = Acl @ M
        return AM + AM.T + C @ M @ C.T

    for i in range(len(times) - 1):
        h = times[i + 1] - times[i]
        kmid = 0.5 * (K[i] + K[i + 1])
        k1 = f(M, K[i])
        k2 = f(M + 0.5 * h * k1, kmid)
        k3 = f(M + 0.5 * h * k2, kmid)
        k4 = f(M + h * k3, K[i + 1])
        M = M + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        M = 0.5 * (M + M.T)
        if not np.all(np.isfinite(M)) or np.abs(M).max() > MOMENT_BLOWUP:
            raise BlowupError(f"second moment diverged at t={times[i + 1]:.6g}")
        out[i + 1] = M

    integrand = (np.einsum("ij,tji->t", ops.Qmat, out)
                 + ops.delta * np.einsum("ti,tij,tj->t", K, out, K))
    running = float(np.trapezoid(integrand, times))
    terminal = float(np.trace(ops.Gmat @ out[-1]))
    return MomentSolution(times=times, M=out, cost=running + terminal)


def moment_ode_cost(ops: AugmentedOperators, sched: GainSchedule, Z0=None, gains=None) -> float:
    if Z0 is None:
        Z0 = initial_state(ops, optimal_u0(sched, ops))
    return moment_ode(ops, sched, Z0, gains).cost


# -- three-way comparison -------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    observed: float
    reference: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class OracleReport:
    riccati_value: float
    moment_value: float
    estimate: CostEstimate
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def compare_solution(sol: Solution, dt: float, paths: int, seed: int, workers: int = 1,
                     backend=None) -> OracleReport:
    ops, sched = sol.ops, sol.sched
    v = value(sched, sol.Z0)
    mom = moment_ode_cost(ops, sched, sol.Z0)
    ZT, costs = sample_spectral(ops, sched, sol.Z0, dt, paths, seed, workers, backend)
    est = summarize(costs, seed)
    tol_rm = 1e-3 * abs(mom)
    tol_mc = 3.0 * est.std_err + 0.05 * abs(mom)
    checks = [
        Check("riccati_vs_moment", v, mom, tol_rm, abs(v - mom) <= tol_rm),
        Check("montecarlo_vs_moment", est.mean, mom, tol_mc, abs(est.mean - mom) <= tol_mc),
    ]
    return OracleReport(v, mom, est, checks)


def compare_oracles(spec, paths: int | None = None, seed: int | None = None, workers: int = 1,
                    backend=None) -> OracleReport:
    """Riccati value, moment-ODE cost and Monte Carlo mean, with pass/fail per pair."""
    sol = solve_spec(spec)
    return compare_solution(sol, spec.disc.sim_dt,
                            spec.disc.mc_paths if paths is None else paths,
                            spec.disc.seed if seed is None else seed, workers, backend)


def full_plant_second_moment(spec, sol: Solution, paths: int, seed: int, workers: int = 1,
                             backend=None) -> tuple[CostEstimate, CostEstimate]:
    """Estimates of E[|X_T|^2] and of the realized cost for the original plant."""
    setup = full_plant_setup(spec, sol.basis)

    def fn(ix):
        return full_batch(spec, sol.sched, sol.basis, sol.u0, seed, ix, setup=setup,
                          backend=backend)

    XT, _, run, term = run_paths(fn, paths, workers)
    return summarize((XT ** 2).sum(axis=1), seed), summarize(run + term, seed)
