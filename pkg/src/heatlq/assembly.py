"""Finite-dimensional augmented system for the state Z = (X, Y, z-coefficients).

Y carries the boundary control U and z = u - rho U is expanded in the first
N + 1 basis functions.  With u(t, 0) = z(t, 0) + rho(0) U the drift is::

    Atot = [[A, B rho(0), B g0^T],     Ctot = [[C, D rho(0), D g0^T],
            [0, mu,       0     ],             [0, 0,        0     ],
            [0, 0,   c I - L_N  ]]             [0, 0,        0     ]]

with g0 = (phi_n(0))_n, L_N = diag(lambda_n) and input Bvec = (0, 1, -rho^N).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import ProblemSpec
from .spectral import (
    GridFunction,
    SpectralBasis,
    gamma0_coeffs,
    project,
    rho_coeffs,
    rho_eval,
)


@dataclass(frozen=True, eq=False)
class AugmentedOperators:
    dim: int
    d: int
    Atot: np.ndarray
    Ctot: np.ndarray
    Bvec: np.ndarray
    Qmat: np.ndarray
    Gmat: np.ndarray
    Lrho: np.ndarray
    M0: np.ndarray
    delta: float

    def __post_init__(self):
        for name in ("Atot", "Ctot", "Bvec", "Qmat", "Gmat", "Lrho", "M0"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_modes(self) -> int:
        return self.dim - self.d - 1


def project_initial_profile(basis: SpectralBasis, u0) -> np.ndarray:
    if isinstance(u0, GridFunction):
        return project(basis, u0).coeffs
    # <v, phi_n>_{H^1} = v * delta_{n0}
    coeffs = np.zeros(basis.N + 1)
    coeffs[0] = float(u0)
    return coeffs


def assemble(spec: ProblemSpec, basis: SpectralBasis) -> AugmentedOperators:
    if basis.N != spec.disc.N:
        raise ValueError(f"basis has N={basis.N}, spec requests N={spec.disc.N}")
    sde = spec.sde
    c, mu = spec.pde.c, spec.control.mu
    d = sde.d
    m = basis.N + 1
    dim = d + 1 + m
    X, Y, z = slice(0, d), d, slice(d + 1, dim)

    rho0 = float(rho_eval(c, mu, 0.0))
    rho_n = rho_coeffs(basis, c, mu).coeffs
    g0 = gamma0_coeffs(basis).coeffs
    B = sde.B[:, 0]
    D = sde.D[:, 0]

    Atot = np.zeros((dim, dim))
    Atot[X, X] = sde.A
    Atot[X, Y] = B * rho0
    Atot[X, z] = np.outer(B, g0)
    Atot[Y, Y] = mu
    Atot[z, z] = np.diag(c - basis.lambdas)

    Ctot = np.zeros((dim, dim))
    Ctot[X, X] = sde.C
    Ctot[X, Y] = D * rho0
    Ctot[X, z] = np.outer(D, g0)

    Bvec = np.zeros(dim)
    Bvec[Y] = 1.0
    Bvec[z] = -rho_n

    Qmat = np.zeros((dim, dim))
    Qmat[X, X] = spec.cost.Q
    Qmat[Y, Y] = spec.cost.r
    Gmat = np.zeros((dim, dim))
    Gmat[X, X] = spec.cost.G

    M0 = np.zeros(dim)
    M0[X] = sde.X0
    M0[z] = project_initial_profile(basis, spec.pde.u0)

    return AugmentedOperators(
        dim=dim, d=d, Atot=Atot, Ctot=Ctot, Bvec=Bvec, Qmat=Qmat, Gmat=Gmat,
        Lrho=Bvec.copy(), M0=M0, delta=spec.cost.delta,
    )


def initial_state(ops: AugmentedOperators, u0_value: float) -> np.ndarray:
    """Z_0 = Lrho * U_0 + M0, i.e. (X_0, U_0, P_N(u_0 - rho U_0))."""
    return ops.Lrho * u0_value + ops.M0


def dump_operators(ops: AugmentedOperators, out_dir) -> list[Path]:
    """Write every block as ``<name>.csv``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in ("Atot", "Ctot", "Bvec", "Qmat", "Gmat", "Lrho", "M0"):
        path = out / f"{name}.csv"
        np.savetxt(path, np.atleast_2d(getattr(ops, name)), delimiter=",", fmt="%.17g")
        written.append(path)
    return written
