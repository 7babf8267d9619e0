"""Neumann-Laplacian cosine basis on [0, 1], orthonormal in H^1.

The eigenpairs of -u'' with u'(0) = u'(1) = 0 are lambda_n = (n pi)^2 and
cos(n pi x).  Scaled by A_n = sqrt(2 / (1 + lambda_n)) (and A_0 = 1) they form
an orthonormal system for <u, v> = int u v + int u' v'.

Also provides the lifting profile rho solving -rho'' + (mu - c) rho = 0,
rho'(0) = 0, rho'(1) = 1, i.e. rho(x) = cosh(kx) / (k sinh k), k = sqrt(mu - c).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class SpectralBasis:
    N: int
    lambdas: np.ndarray
    norm_coeffs: np.ndarray

    @property
    def size(self) -> int:
        return self.N + 1


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a function on a strictly increasing grid covering [0, 1]."""

    xs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if xs.ndim != 1 or xs.shape != vals.shape:
            raise ValueError("xs and values must be 1-d arrays of equal length")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", vals)

    def derivative(self) -> np.ndarray:
        """Centered differences inside, second-order one-sided at the ends."""
        return np.gradient(self.values, self.xs, edge_order=2)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.xs, self.values]), delimiter=",",
                   header="x,value", comments="", fmt="%.17g")


@dataclass(frozen=True)
class BasisFunction:
    basis: SpectralBasis
    n: int

    def __call__(self, x):
        return eval_phi(self.basis, self.n, x)

    def deriv(self, x):
        return eval_phi_deriv(self.basis, self.n, x)


@dataclass(frozen=True)
class Rho:
    c: float
    mu: float

    def __call__(self, x):
        return rho_eval(self.c, self.mu, x)

    def deriv(self, x):
        return rho_deriv(self.c, self.mu, x)


Analytic = Union[BasisFunction, Rho]


@dataclass(frozen=True)
class H1Vector:
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def build_basis(N: int) -> SpectralBasis:
    if N < 0:
        raise DomainError("N must be non-negative")
    n = np.arange(N + 1, dtype=float)
    lambdas = (math.pi * n) ** 2
    norm_coeffs = np.sqrt(2.0 / (1.0 + lambdas))
    # constant mode: ||1||_{H^1} = 1 already
    norm_coeffs[0] = 1.0
    lambdas.setflags(write=False)
    norm_coeffs.setflags(write=False)
    return SpectralBasis(N=N, lambdas=lambdas, norm_coeffs=norm_coeffs)


def _check_mode(basis: SpectralBasis, n: int) -> None:
    if not 0 <= n <= basis.N:
        raise IndexError(f"mode {n} outside 0..{basis.N}")


def eval_phi(basis: SpectralBasis, n: int, x):
    _check_mode(basis, n)
    return basis.norm_coeffs[n] * np.cos(n * math.pi * np.asarray(x, dtype=float))


def eval_phi_deriv(basis: SpectralBasis, n: int, x):
    _check_mode(basis, n)
    return -basis.norm_coeffs[n] * n * math.pi * np.sin(n * math.pi * np.asarray(x, dtype=float))


def _trapz(y, x) -> float:
    return float(np.trapezoid(y, x))


def _sample(f, xs):
    """Values and derivative of ``f`` on ``xs``."""
    if isinstance(f, GridFunction):
        if f.xs.shape != xs.shape or not np.array_equal(f.xs, xs):
            raise DomainError("grid functions live on different grids")
        return f.values, f.derivative()
    return np.asarray(f(xs), dtype=float), np.asarray(f.deriv(xs), dtype=float)


def h1_inner(f, g, n_quad: int = 20001) -> float:
    """H^1 inner product of two functions on [0, 1].

    Arguments are GridFunctions or analytic objects (:class:`BasisFunction`,
    :class:`Rho`).  Basis/basis and rho/basis pairs use closed forms; any pair
    involving a grid function uses the trapezoid rule on that grid, with
    finite-difference derivatives for the sampled side.  Two generic analytic
    functions are integrated on a uniform ``n_quad`` grid.
    """
    if isinstance(f, BasisFunction) and isinstance(g, BasisFunction):
        return 1.0 if f.n == g.n else 0.0
    if isinstance(f, Rho) and isinstance(g, BasisFunction):
        f, g = g, f
    if isinstance(f, BasisFunction) and isinstance(g, Rho):
        return float(rho_coeffs(f.basis, g.c, g.mu).coeffs[f.n])

    if isinstance(f, GridFunction):
        xs = f.xs
    elif isinstance(g, GridFunction):
        xs = g.xs
    else:
        xs = np.linspace(0.0, 1.0, n_quad)
    if len(xs) < 3:
        raise DomainError("grid functions need at least 3 points")
    if xs[0] != 0.0 or xs[-1] != 1.0:
        raise DomainError("grid must cover [0, 1]")
    fv, fd = _sample(f, xs)
    gv, gd = _sample(g, xs)
    return _trapz(fv * gv, xs) + _trapz(fd * gd, xs)


def _k(c: float, mu: float) -> float:
    if not mu > c:
        raise DomainError("mu must exceed c")
    return math.sqrt(mu - c)


def rho_eval(c: float, mu: float, x):
    k = _k(c, mu)
    return np.cosh(k * np.asarray(x, dtype=float)) / (k * math.sinh(k))


def rho_deriv(c: float, mu: float, x):
    k = _k(c, mu)
    return np.sinh(k * np.asarray(x, dtype=float)) / math.sinh(k)


def rho_coeffs(basis: SpectralBasis, c: float, mu: float) -> H1Vector:
    """<rho, phi_n>_{H^1} in closed form.

    Integrating by parts with rho'' = k^2 rho and phi_n'' = -lambda_n phi_n gives
    <rho, phi_n> = (1 - k^2) phi_n(1) / (k^2 + lambda_n) + phi_n(1).
    """
    k2 = _k(c, mu) ** 2
    n = np.arange(basis.N + 1)
    phi_at_1 = basis.norm_coeffs * np.where(n % 2 == 0, 1.0, -1.0)
    return H1Vector((1.0 - k2) * phi_at_1 / (k2 + basis.lambdas) + phi_at_1)


def gamma0_coeffs(basis: SpectralBasis) -> H1Vector:
    """Coordinates of point evaluation at x = 0: phi_n(0) = A_n."""
    return H1Vector(np.array(basis.norm_coeffs))


def projection_matrix(basis: SpectralBasis, xs) -> np.ndarray:
    """Matrix W with ``W @ values == project(basis, GridFunction(xs, values)).coeffs``."""
    xs = np.asarray(xs, dtype=float)
    m = len(xs)
    w = np.zeros(m)
    h = np.diff(xs)
    w[:-1] += h / 2
    w[1:] += h / 2
    diff_op = np.gradient(np.eye(m), xs, axis=0, edge_order=2)
    W = np.empty((basis.N + 1, m))
    for n in range(basis.N + 1):
        W[n] = w * eval_phi(basis, n, xs) + diff_op.T @ (w * eval_phi_deriv(basis, n, xs))
    return W


def project(basis: SpectralBasis, f: GridFunction) -> H1Vector:
    return H1Vector([h1_inner(f, BasisFunction(basis, n)) for n in range(basis.N + 1)])


def reconstruct(basis: SpectralBasis, z: H1Vector, xs) -> GridFunction:
    xs = np.asarray(xs, dtype=float)
    modes = np.arange(basis.N + 1)
    table = basis.norm_coeffs[:, None] * np.cos(np.outer(modes, xs) * math.pi)
    return GridFunction(xs, z.coeffs @ table)


def heat_semigroup_coeffs(basis: SpectralBasis, t: float, z: H1Vector) -> H1Vector:
    if t < 0:
        raise DomainError("t must be non-negative")
    return H1Vector(np.exp(-basis.lambdas * t) * z.coeffs)
