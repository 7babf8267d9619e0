"""Backward matrix Riccati equation for the augmented LQ problem.

    dPi/dt = -(Pi A + A^T Pi + C^T Pi C + Q - delta^{-1} Pi b b^T Pi),  Pi(T) = G

integrated with fixed-step RK4 from T down to 0.  The optimal feedback is
V = -K(t) Z with K(t) = delta^{-1} b^T Pi(t).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import AugmentedOperators, initial_state
from .errors import BlowupError, DomainError

BLOWUP_NORM = 1e12
# RK4 stability interval on the negative real axis is about [-2.78, 0].
RK4_STABILITY = 2.0


@dataclass(frozen=True, eq=False)
class GainSchedule:
    times: np.ndarray
    Pi: np.ndarray  # (M+1, dim, dim), forward in time
    K: np.ndarray   # (M+1, dim)

    @property
    def T(self) -> float:
        return float(self.times[-1])


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def riccati_rhs(ops: AugmentedOperators, Pi: np.ndarray) -> np.ndarray:
    A, C = ops.Atot, ops.Ctot
    PiB = Pi @ ops.Bvec
    R = Pi @ A + A.T @ Pi + C.T @ Pi @ C + ops.Qmat - np.outer(PiB, PiB) / ops.delta
    return -_sym(R)


def stable_steps(ops: AugmentedOperators, T: float, requested: int = 2) -> int:
    """Smallest step count >= ``requested`` keeping RK4 inside its stability region.

    The linear part of the Riccati flow has eigenvalues lambda_i + lambda_j of
    Atot, so the stiffest mode is twice the most negative eigenvalue.
    """
    stiff = 2.0 * max(0.0, -float(np.linalg.eigvals(ops.Atot).real.min()))
    return max(int(requested), math.ceil(T * stiff / RK4_STABILITY))


def solve_riccati(ops: AugmentedOperators, T: float, steps: int) -> GainSchedule:
    if steps < 2:
        raise DomainError("steps must be >= 2")
    times = np.linspace(0.0, T, steps + 1)
    h = T / steps
    Pi = np.empty((steps + 1, ops.dim, ops.dim))
    P = np.array(ops.Gmat)
    Pi[steps] = P

    def f(M):
        return riccati_rhs(ops, M)

    for i in range(steps, 0, -1):
        # stepping backward: dt = -h
        k1 = f(P)
        k2 = f(_sym(P - 0.5 * h * k1))
        k3 = f(_sym(P - 0.5 * h * k2))
        k4 = f(_sym(P - h * k3))
        P = _sym(P - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        if not np.all(np.isfinite(P)) or np.abs(P).sum(axis=1).max() > BLOWUP_NORM:
            raise BlowupError(f"Riccati solution diverged at t={times[i - 1]:.6g}")
        Pi[i - 1] = P

    K = (Pi @ ops.Bvec) / ops.delta
    Pi.setflags(write=False)
    K.setflags(write=False)
    return GainSchedule(times=times, Pi=Pi, K=K)


def _locate(times: np.ndarray, t):
    t = np.asarray(t, dtype=float)
    T = times[-1]
    slack = 1e-12 * max(1.0, T)
    if np.any(t < times[0] - slack) or np.any(t > T + slack):
        raise DomainError(f"t outside [0, {T}]")
    t = np.clip(t, times[0], T)
    i = np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2)
    w = (t - times[i]) / (times[i + 1] - times[i])
    return i, w


def gain_at(sched: GainSchedule, t: float) -> np.ndarray:
    """Feedback row K(t), linearly interpolated between stored nodes."""
    i, w = _locate(sched.times, t)
    i, w = int(i), float(w)
    if w == 0.0:
        return np.array(sched.K[i])
    if w == 1.0:
        return np.array(sched.K[i + 1])
    return (1.0 - w) * sched.K[i] + w * sched.K[i + 1]


def gains_on(sched: GainSchedule, ts) -> np.ndarray:
    """``gain_at`` evaluated at every time in ``ts``; shape (len(ts), dim)."""
    i, w = _locate(sched.times, ts)
    w = w[:, None]
    out = (1.0 - w) * sched.K[i] + w * sched.K[i + 1]
    exact = w[:, 0] == 0.0
    out[exact] = sched.K[i[exact]]
    return out


def value(sched: GainSchedule, Z0) -> float:
    Z0 = np.asarray(Z0, dtype=float)
    return float(Z0 @ sched.Pi[0] @ Z0)


def optimal_u0(sched: GainSchedule, ops: AugmentedOperators) -> float:
    """Minimizer of U0 -> value(Lrho U0 + M0); 0 when the quadratic is flat."""
    P0 = sched.Pi[0]
    PL = P0 @ ops.Lrho
    denom = float(ops.Lrho @ PL)
    eps = 1e-10 * np.abs(P0).sum(axis=1).max() * float(ops.Lrho @ ops.Lrho)
    if denom > eps:
        return -float(PL @ ops.M0) / denom
    return 0.0


def chosen_u0(spec, sched: GainSchedule, ops: AugmentedOperators) -> float:
    if spec.control.u0_mode == "fixed":
        return spec.control.u0_value
    return optimal_u0(sched, ops)


@dataclass(frozen=True, eq=False)
class Solution:
    """Everything downstream consumers need from one Riccati solve."""

    basis: object
    ops: AugmentedOperators
    sched: GainSchedule
    u0: float
    Z0: np.ndarray

    @property
    def value(self) -> float:
        return value(self.sched, self.Z0)


def solve_spec(spec, basis=None) -> Solution:
    """Assemble and solve for ``spec`` with a stability-safe step count."""
    from .assembly import assemble
    from .spectral import build_basis

    basis = basis or build_basis(spec.disc.N)
    ops = assemble(spec, basis)
    steps = stable_steps(ops, spec.cost.T, spec.disc.riccati_steps)
    sched = solve_riccati(ops, spec.cost.T, steps)
    U0 = chosen_u0(spec, sched, ops)
    return Solution(basis, ops, sched, U0, initial_state(ops, U0))
