"""Empirical convergence in the number of modes N against a large-N reference.

Smaller-N quantities are compared to the N_ref solve by zero-padding the
z-block (X and Y coordinates are shared by every N).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HeatLQError
from .riccati import Solution, solve_spec
from .spectral import H1Vector, SpectralBasis, heat_semigroup_coeffs, rho_coeffs


@dataclass(frozen=True)
class ConvergenceReport:
    Ns: list[int]
    values: list[float]
    u0s: list[float]
    gain_dists: list[float]
    semigroup_errs: list[float]
    N_ref: int
    ref_value: float
    ref_u0: float

    def rows(self):
        return zip(self.Ns, self.values, self.u0s, self.gain_dists, self.semigroup_errs)


def embed(P: np.ndarray, dim_ref: int) -> np.ndarray:
    """Zero-pad a smaller augmented matrix into the reference dimension."""
    out = np.zeros((dim_ref, dim_ref))
    k = P.shape[0]
    out[:k, :k] = P
    return out


def semigroup_tail_error(basis: SpectralBasis, probe: H1Vector, N: int, times) -> float:
    """sup_t || S(t) probe - P_N^* S_N(t) P_N probe || for a probe in the reference span.

    Both semigroups are diagonal in the eigenbasis, so the difference is the
    decayed tail beyond mode N.
    """
    worst = 0.0
    for t in times:
        tail = heat_semigroup_coeffs(basis, float(t), probe).coeffs[N + 1:]
        worst = max(worst, float(np.linalg.norm(tail)))
    return worst


def sweep_N(spec, Ns, N_ref: int, n_times: int = 201) -> ConvergenceReport:
    Ns = [int(n) for n in Ns]
    if N_ref <= max(Ns):
        raise ValueError("N_ref must exceed every N in the sweep")

    def solve(N) -> Solution:
        try:
            return solve_spec(spec.replace(disc__N=N))
        except HeatLQError as exc:
            raise type(exc)(f"N={N}: {exc}") from exc

    ref = solve(N_ref)
    w = ref.Z0 / np.linalg.norm(ref.Z0)
    ref_Pw = ref.sched.Pi[0] @ w
    basis_ref: SpectralBasis = ref.basis
    rho_ref = rho_coeffs(basis_ref, spec.pde.c, spec.control.mu).coeffs
    probe = H1Vector(rho_ref / np.linalg.norm(rho_ref))
    times = np.linspace(0.0, spec.cost.T, n_times)

    values, u0s, dists, sg = [], [], [], []
    for N in Ns:
        sol = solve(N)
        values.append(sol.value)
        u0s.append(sol.u0)
        dists.append(float(np.linalg.norm(ref_Pw - embed(sol.sched.Pi[0], ref.ops.dim) @ w)))
        sg.append(semigroup_tail_error(basis_ref, probe, N, times))
    return ConvergenceReport(Ns=Ns, values=values, u0s=u0s, gain_dists=dists,
                             semigroup_errs=sg, N_ref=N_ref, ref_value=ref.value,
                             ref_u0=ref.u0)

