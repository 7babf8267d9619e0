"""Pure numpy implementations of the path-stepping kernels.

Paths are vectorized along the leading axis.  Matrix-vector products are
written as fixed-order column sums so that each path's arithmetic does not
depend on how many paths share the batch.
"""
import numpy as np

BLOWUP_STATE = 1e9


def _matvec(M, Z):
    """Row-wise ``M @ z`` for each row z of Z, in fixed column order."""
    out = Z[:, 0:1] * M[:, 0]
    for j in range(1, M.shape[1]):
        out = out + Z[:, j:j + 1] * M[:, j]
    return out


def _rowdot(Z, k):
    out = Z[:, 0] * k[0]
    for j in range(1, len(k)):
        out = out + Z[:, j] * k[j]
    return out


def _quad(Z, M):
    return _rowdot(Z * _matvec(M, Z), np.ones(Z.shape[1]))


def em_batch(Atot, Bvec, Ctot, Qmat, Gmat, delta, gains, Z0, dt, dW, record=False):
    """Euler-Maruyama for dZ = (Atot Z + Bvec V) dt + Ctot Z dW, V = -gains[k] . Z.

    Returns (Z_T, running, terminal, status, traj, V, integrand).  ``status``
    holds -1 for finite paths or the first step index where ``|Z| > 1e9``.
    ``traj``/``V``/``integrand`` are None unless ``record``.
    """
    P, n = dW.shape
    dim = Atot.shape[0]
    Z = np.array(Z0, dtype=float)
    status = np.full(P, -1, dtype=np.int64)
    traj = np.empty((P, n + 1, dim)) if record else None
    Vrec = np.empty((P, n + 1)) if record else None
    frec = np.empty((P, n + 1)) if record else None

    V = -_rowdot(Z, gains[0])
    f = _quad(Z, Qmat) + delta * V * V
    running = 0.5 * f
    for k in range(n):
        if record:
            traj[:, k] = Z
            Vrec[:, k] = V
            frec[:, k] = f
        drift = _matvec(Atot, Z) + V[:, None] * Bvec
        noise = _matvec(Ctot, Z) * dW[:, k:k + 1]
        Z = Z + drift * dt + noise
        bad = (status < 0) & ~(np.abs(Z).max(axis=1) <= BLOWUP_STATE)
        status[bad] = k + 1
        V = -_rowdot(Z, gains[k + 1])
        f = _quad(Z, Qmat) + delta * V * V
        running = running + (0.5 * f if k == n - 1 else f)
    if record:
        traj[:, n] = Z
        Vrec[:, n] = V
        frec[:, n] = f
    running = running * dt
    terminal = _quad(Z, Gmat)
    return Z, running, terminal, status, traj, Vrec, frec


def full_batch(A, B, C, D, X0, u_init, U0, mu, c, dt, h, cprime, inv_den, lower,
               W, Wrho, gains, Q, r, G, delta, dW, record=False):
    """Closed loop of the original PDE + SDE plant, one batch of paths.

    The PDE is stepped by Crank-Nicolson in diffusion (ghost-point Neumann
    conditions, u_x(1) = U) with explicit reaction; the SDE by Euler-Maruyama
    driven by u(t, 0); U by explicit Euler of dU = (mu U + V) dt.  The
    tridiagonal left-hand side is pre-factored: ``cprime``/``inv_den`` are the
    Thomas forward-sweep coefficients and ``lower`` its sub-diagonal.

    Returns (X_T, U_T, running, terminal, status, rec) where ``rec`` is None
    or a dict with per-step arrays for the first path.
    """
    P, n = dW.shape
    m = len(u_init)
    d = len(X0)
    u = np.repeat(np.asarray(u_init, dtype=float)[:, None], P, axis=1)  # (m, P)
    X = np.repeat(np.asarray(X0, dtype=float)[None, :], P, axis=0)
    U = np.full(P, float(U0))
    status = np.full(P, -1, dtype=np.int64)
    lam = dt / (h * h)
    kx, ky, kz = gains[:, :d], gains[:, d], gains[:, d + 1:]
    rec = None
    if record:
        rec = {"X": np.empty((n + 1, d)), "U": np.empty(n + 1), "V": np.empty(n + 1),
               "z": np.empty((n + 1, W.shape[0])), "u": np.empty((n + 1, m))}

    def control(k):
        zc = _matvec(W, u.T) - U[:, None] * Wrho
        V = -(_rowdot(X, kx[k]) + ky[k] * U + _rowdot(zc, kz[k]))
        f = _quad(X, Q) + r * U * U + delta * V * V
        return zc, V, f

    zc, V, f = control(0)
    running = 0.5 * f
    rhs = np.empty_like(u)
    for k in range(n):
        if record:
            rec["X"][k], rec["U"][k], rec["V"][k] = X[0], U[0], V[0]
            rec["z"][k], rec["u"][k] = zc[0], u[:, 0]
        trace = u[0]
        dw = dW[:, k]
        Xn = X + (_matvec(A, X) + trace[:, None] * B) * dt \
            + (_matvec(C, X) + trace[:, None] * D) * dw[:, None]
        Un = U + (mu * U + V) * dt
        # explicit half: u + dt/2 L u + dt c u
        rhs[0] = u[0] + lam * (u[1] - u[0]) + dt * c * u[0]
        rhs[1:-1] = u[1:-1] + 0.5 * lam * (u[:-2] - 2.0 * u[1:-1] + u[2:]) + dt * c * u[1:-1]
        rhs[-1] = u[-1] + lam * (u[-2] - u[-1]) + dt * c * u[-1] + (dt / h) * (U + Un)
        # Thomas solve with the pre-factored matrix
        rhs[0] = rhs[0] * inv_den[0]
        for i in range(1, m):
            rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) * inv_den[i]
        for i in range(m - 2, -1, -1):
            rhs[i] = rhs[i] - cprime[i] * rhs[i + 1]
        u, rhs = rhs, u
        X, U = Xn, Un
        bad = (status < 0) & ~((np.abs(X).max(axis=1) <= 1e9) & (np.abs(U) <= 1e9)
                               & (np.abs(u).max(axis=0) <= 1e9))
        status[bad] = k + 1
        zc, V, f = control(k + 1)
        running = running + (0.5 * f if k == n - 1 else f)
    if record:
        rec["X"][n], rec["U"][n], rec["V"][n] = X[0], U[0], V[0]
        rec["z"][n], rec["u"][n] = zc[0], u[:, 0]
    return X, U, running * dt, _quad(X, G), status, rec
