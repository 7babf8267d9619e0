"""Closed-loop simulation of the spectral model and of the original plant.

Brownian increments for path ``i`` come from its own generator seeded with
``SeedSequence([seed, i])``, drawn in time order.  A path therefore sees the
same noise whichever batch or thread simulates it, and the spectral and
full-plant simulators can be driven by matched increments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .assembly import AugmentedOperators
from .errors import BlowupError, DomainError
from .riccati import GainSchedule, gains_on
from .spectral import GridFunction, H1Vector, SpectralBasis, projection_matrix, reconstruct, rho_eval


def path_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def path_increments(seed: int, indices, n_steps: int, dt: float) -> np.ndarray:
    """Wiener increments, shape (len(indices), n_steps), one stream per path index."""
    sq = math.sqrt(dt)
    out = np.empty((len(indices), n_steps))
    for row, idx in enumerate(indices):
        out[row] = path_rng(seed, idx).standard_normal(n_steps) * sq
    return out


def time_grid(T: float, dt: float) -> np.ndarray:
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-12 * max(1.0, T):
        raise DomainError(f"dt={dt} does not divide T={T}")
    return np.linspace(0.0, T, n + 1)


def zero_schedule(dim: int, T: float, steps: int = 2) -> GainSchedule:
    """Open-loop schedule (K = 0, Pi = 0)."""
    return GainSchedule(times=np.linspace(0.0, T, steps + 1),
                        Pi=np.zeros((steps + 1, dim, dim)), K=np.zeros((steps + 1, dim)))


def _raise_on_blowup(status, indices, what):
    bad = np.flatnonzero(status >= 0)
    if bad.size:
        j = int(bad[0])
        raise BlowupError(f"{what}: path {indices[j]} exceeded 1e9 at step {int(status[j])}",
                          path_index=int(indices[j]))


@dataclass(frozen=True, eq=False)
class PathResult:
    times: np.ndarray
    Z: np.ndarray          # (n+1, dim)
    V: np.ndarray          # (n+1,)
    integrand: np.ndarray  # Z^T Qmat Z + delta V^2 at each node
    running_cost: float
    terminal_cost: float
    d: int

    @property
    def X(self) -> np.ndarray:
        return self.Z[:, :self.d]

    @property
    def U(self) -> np.ndarray:
        return self.Z[:, self.d]

    @property
    def z_coeffs(self) -> np.ndarray:
        return self.Z[:, self.d + 1:]

    def running_cost_between(self, i: int, j: int) -> float:
        """Trapezoid of the integrand over nodes i..j."""
        f = self.integrand[i:j + 1]
        dt = self.times[1] - self.times[0]
        return float(dt * (0.5 * f[0] + f[1:-1].sum() + 0.5 * f[-1])) if j > i else 0.0


def simulate_spectral(ops: AugmentedOperators, sched: GainSchedule, Z0, dt: float,
                      rng: np.random.Generator | None = None, dW=None,
                      backend=None) -> PathResult:
    """One Euler-Maruyama path of the spectral closed loop.

    Noise comes from ``dW`` when given, else ``rng.standard_normal`` scaled
    by sqrt(dt).
    """
    times = time_grid(sched.T, dt)
    n = len(times) - 1
    if dW is None:
        if rng is None:
            raise ValueError("need rng or dW")
        dW = rng.standard_normal(n) * math.sqrt(dt)
    dW = np.asarray(dW, dtype=float).reshape(1, n)
    kern = _backend.resolve(backend)
    ZT, run, term, status, traj, V, f = kern.em_batch(
        ops.Atot, ops.Bvec, ops.Ctot, ops.Qmat, ops.Gmat, ops.delta, gains_on(sched, times),
        np.asarray(Z0, dtype=float).reshape(1, -1), dt, dW, True)
    _raise_on_blowup(status, [0], "spectral simulation")
    return PathResult(times=times, Z=traj[0], V=V[0], integrand=f[0],
                      running_cost=float(run[0]), terminal_cost=float(term[0]), d=ops.d)


def spectral_batch(ops: AugmentedOperators, sched: GainSchedule, Z0, dt: float, seed: int,
                   indices, backend=None, dW=None):
    """Final states and costs for the listed path indices: (Z_T, running, terminal)."""
    times = time_grid(sched.T, dt)
    n = len(times) - 1
    if dW is None:
        dW = path_increments(seed, indices, n, dt)
    Z0s = np.repeat(np.asarray(Z0, dtype=float)[None, :], len(indices), axis=0)
    kern = _backend.resolve(backend)
    ZT, run, term, status, *_ = kern.em_batch(
        ops.Atot, ops.Bvec, ops.Ctot, ops.Qmat, ops.Gmat, ops.delta,
        gains_on(sched, times), Z0s, dt, dW, False)
    _raise_on_blowup(status, indices, "spectral simulation")
    return ZT, run, term


def reconstruct_u(basis: SpectralBasis, path: PathResult, c: float, mu: float, xs) -> list[GridFunction]:
    """u(t, .) = sum_n z_n(t) phi_n + rho U(t) at every stored time."""
    xs = np.asarray(xs, dtype=float)
    rho = rho_eval(c, mu, xs)
    out = []
    for zc, U in zip(path.z_coeffs, path.U):
        z = reconstruct(basis, H1Vector(zc), xs)
        out.append(GridFunction(xs, z.values + rho * U))
    return out


# -- full plant ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FullPlantSetup:
    """Grid, factored Crank-Nicolson matrix and projection weights."""

    xs: np.ndarray
    h: float
    cprime: np.ndarray
    inv_den: np.ndarray
    lower: np.ndarray
    W: np.ndarray
    Wrho: np.ndarray
    u_init: np.ndarray


def crank_nicolson_factors(m: int, dt: float, h: float):
    """Thomas coefficients of I - dt/2 L, L the ghost-point Neumann Laplacian."""
    lam = dt / (h * h)
    diag = np.full(m, 1.0 + lam)
    lower = np.full(m, -0.5 * lam)
    upper = np.full(m, -0.5 * lam)
    lower[0] = 0.0
    upper[-1] = 0.0
    upper[0] = -lam
    lower[-1] = -lam
    cprime = np.zeros(m)
    inv_den = np.empty(m)
    inv_den[0] = 1.0 / diag[0]
    cprime[0] = upper[0] * inv_den[0]
    for i in range(1, m):
        inv_den[i] = 1.0 / (diag[i] - lower[i] * cprime[i - 1])
        cprime[i] = upper[i] * inv_den[i]
    return cprime, inv_den, lower


def full_plant_setup(spec, basis: SpectralBasis, dt: float | None = None) -> FullPlantSetup:
    dt = spec.disc.sim_dt if dt is None else dt
    m = spec.disc.fd_grid_points
    xs = np.linspace(0.0, 1.0, m)
    h = xs[1] - xs[0]
    cprime, inv_den, lower = crank_nicolson_factors(m, dt, h)
    W = projection_matrix(basis, xs)
    rho = rho_eval(spec.pde.c, spec.control.mu, xs)
    u0 = spec.pde.u0
    if isinstance(u0, GridFunction):
        u_init = np.interp(xs, u0.xs, u0.values)
    else:
        u_init = np.full(m, float(u0))
    return FullPlantSetup(xs=xs, h=h, cprime=cprime, inv_den=inv_den, lower=lower,
                          W=W, Wrho=W @ rho, u_init=u_init)


@dataclass(frozen=True, eq=False)
class FullPlantState:
    """Final plant state of one path, with its recorded trajectory and realized cost."""

    u: GridFunction
    X: np.ndarray
    U: float
    times: np.ndarray
    X_path: np.ndarray
    U_path: np.ndarray
    V_path: np.ndarray
    z_path: np.ndarray
    u_path: np.ndarray
    running_cost: float
    terminal_cost: float

    @property
    def cost(self) -> float:
        return self.running_cost + self.terminal_cost


def _full_call(spec, sched, setup, U0, dW, record, backend):
    sde = spec.sde
    times = time_grid(sched.T, spec.disc.sim_dt)
    kern = _backend.resolve(backend)
    return times, kern.full_batch(
        sde.A, sde.B[:, 0], sde.C, sde.D[:, 0], sde.X0, setup.u_init, float(U0),
        spec.control.mu, spec.pde.c, spec.disc.sim_dt, setup.h, setup.cprime, setup.inv_den,
        setup.lower, setup.W, setup.Wrho, gains_on(sched, times), spec.cost.Q, spec.cost.r,
        spec.cost.G, spec.cost.delta, dW, record)


def simulate_full(spec, sched: GainSchedule, basis: SpectralBasis, U0: float,
                  rng: np.random.Generator | None = None, dW=None, setup=None,
                  backend=None) -> FullPlantState:
    """One path of the original PDE + SDE plant under the spectral feedback."""
    setup = setup or full_plant_setup(spec, basis)
    n = len(time_grid(sched.T, spec.disc.sim_dt)) - 1
    if dW is None:
        if rng is None:
            raise ValueError("need rng or dW")
        dW = rng.standard_normal(n) * math.sqrt(spec.disc.sim_dt)
    dW = np.asarray(dW, dtype=float).reshape(1, n)
    times, (XT, UT, run, term, status, rec) = _full_call(spec, sched, setup, U0, dW, True, backend)
    _raise_on_blowup(status, [0], "full-plant simulation")
    return FullPlantState(
        u=GridFunction(setup.xs, rec["u"][-1]), X=XT[0], U=float(UT[0]), times=times,
        X_path=rec["X"], U_path=rec["U"], V_path=rec["V"], z_path=rec["z"], u_path=rec["u"],
        running_cost=float(run[0]), terminal_cost=float(term[0]))


def full_batch(spec, sched: GainSchedule, basis: SpectralBasis, U0: float, seed: int, indices,
               setup=None, backend=None):
    """Final (X_T, U_T, running, terminal) of the full plant for the listed paths."""
    setup = setup or full_plant_setup(spec, basis)
    n = len(time_grid(sched.T, spec.disc.sim_dt)) - 1
    dW = path_increments(seed, indices, n, spec.disc.sim_dt)
    _, (XT, UT, run, term, status, _) = _full_call(spec, sched, setup, U0, dW, False, backend)
    _raise_on_blowup(status, indices, "full-plant simulation")
    return XT, UT, run, term
