# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path-stepping kernels; same contract as ``_kernels_py``.

Each path runs sequentially without the GIL, so Monte Carlo chunks can be
spread across threads.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef double BLOWUP_STATE = 1e9


cdef inline void matvec(const double[:, ::1] M, const double[::1] z, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, n = M.shape[0], m = M.shape[1]
    cdef double acc
    for i in range(n):
        acc = z[0] * M[i, 0]
        for j in range(1, m):
            acc = acc + z[j] * M[i, j]
        out[i] = acc


cdef inline double dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t j
    cdef double acc = a[0] * b[0]
    for j in range(1, a.shape[0]):
        acc = acc + a[j] * b[j]
    return acc


cdef inline double quad(const double[:, ::1] M, const double[::1] z, double[::1] tmp) noexcept nogil:
    matvec(M, z, tmp)
    return dot(z, tmp)


def em_batch(Atot, Bvec, Ctot, Qmat, Gmat, double delta, gains, Z0, double dt, dW,
             bint record=False):
    cdef const double[:, ::1] A = np.ascontiguousarray(Atot, dtype=float)
    cdef const double[::1] b = np.ascontiguousarray(Bvec, dtype=float)
    cdef const double[:, ::1] Cm = np.ascontiguousarray(Ctot, dtype=float)
    cdef const double[:, ::1] Q = np.ascontiguousarray(Qmat, dtype=float)
    cdef const double[:, ::1] G = np.ascontiguousarray(Gmat, dtype=float)
    cdef const double[:, ::1] K = np.ascontiguousarray(gains, dtype=float)
    cdef const double[:, ::1] Z0v = np.ascontiguousarray(Z0, dtype=float)
    cdef const double[:, ::1] W = np.ascontiguousarray(dW, dtype=float)
    cdef Py_ssize_t P = W.shape[0], n = W.shape[1], dim = A.shape[0]
    cdef Py_ssize_t p, k, i

    ZT_arr = np.empty((P, dim))
    run_arr = np.empty(P)
    term_arr = np.empty(P)
    status_arr = np.full(P, -1, dtype=np.int64)
    cdef double[:, ::1] ZT = ZT_arr
    cdef double[::1] running = run_arr
    cdef double[::1] terminal = term_arr
    cdef cnp.int64_t[::1] status = status_arr

    cdef Py_ssize_t nrec = n + 1 if record else 0
    traj_arr = np.empty((P if record else 0, nrec, dim))
    V_arr = np.empty((P if record else 0, nrec))
    f_arr = np.empty((P if record else 0, nrec))
    cdef double[:, :, ::1] traj = traj_arr
    cdef double[:, ::1] Vrec = V_arr
    cdef double[:, ::1] frec = f_arr

    cdef double[::1] z = np.empty(dim)
    cdef double[::1] az = np.empty(dim)
    cdef double[::1] cz = np.empty(dim)
    cdef double[::1] tmp = np.empty(dim)
    cdef double V, f, acc, dw, biggest

    with nogil:
        for p in range(P):
            for i in range(dim):
                z[i] = Z0v[p, i]
            V = -dot(z, K[0])
            f = quad(Q, z, tmp) + delta * V * V
            acc = 0.5 * f
            for k in range(n):
                if record:
                    for i in range(dim):
                        traj[p, k, i] = z[i]
                    Vrec[p, k] = V
                    frec[p, k] = f
                matvec(A, z, az)
                matvec(Cm, z, cz)
                dw = W[p, k]
                biggest = 0.0
                for i in range(dim):
                    z[i] = z[i] + (az[i] + V * b[i]) * dt + cz[i] * dw
                    if not fabs(z[i]) <= biggest:
                        biggest = fabs(z[i])
                if status[p] < 0 and not biggest <= BLOWUP_STATE:
                    status[p] = k + 1
                V = -dot(z, K[k + 1])
                f = quad(Q, z, tmp) + delta * V * V
                if k == n - 1:
                    acc = acc + 0.5 * f
                else:
                    acc = acc + f
            if record:
                for i in range(dim):
                    traj[p, n, i] = z[i]
                Vrec[p, n] = V
                frec[p, n] = f
            running[p] = acc * dt
            terminal[p] = quad(G, z, tmp)
            for i in range(dim):
                ZT[p, i] = z[i]

    if not record:
        return ZT_arr, run_arr, term_arr, status_arr, None, None, None
    return ZT_arr, run_arr, term_arr, status_arr, traj_arr, V_arr, f_arr


def full_batch(A_, B_, C_, D_, X0_, u_init, double U0, double mu, double c, double dt,
               double h, cprime_, inv_den_, lower_, W_, Wrho_, gains, Q_, double r, G_,
               double delta, dW, bint record=False):
    cdef const double[:, ::1] A = np.ascontiguousarray(A_, dtype=float)
    cdef const double[::1] B = np.ascontiguousarray(B_, dtype=float)
    cdef const double[:, ::1] Cm = np.ascontiguousarray(C_, dtype=float)
    cdef const double[::1] D = np.ascontiguousarray(D_, dtype=float)
    cdef const double[::1] X0 = np.ascontiguousarray(X0_, dtype=float)
    cdef const double[::1] uinit = np.ascontiguousarray(u_init, dtype=float)
    cdef const double[::1] cprime = np.ascontiguousarray(cprime_, dtype=float)
    cdef const double[::1] inv_den = np.ascontiguousarray(inv_den_, dtype=float)
    cdef const double[::1] lower = np.ascontiguousarray(lower_, dtype=float)
    cdef const double[:, ::1] Wp = np.ascontiguousarray(W_, dtype=float)
    cdef const double[::1] Wrho = np.ascontiguousarray(Wrho_, dtype=float)
    cdef const double[:, ::1] K = np.ascontiguousarray(gains, dtype=float)
    cdef const double[:, ::1] Q = np.ascontiguousarray(Q_, dtype=float)
    cdef const double[:, ::1] G = np.ascontiguousarray(G_, dtype=float)
    cdef const double[:, ::1] Wn = np.ascontiguousarray(dW, dtype=float)
    cdef Py_ssize_t P = Wn.shape[0], n = Wn.shape[1]
    cdef Py_ssize_t m = uinit.shape[0], d = X0.shape[0], nm = Wp.shape[0]
    cdef Py_ssize_t p, k, i
    cdef double lam = dt / (h * h)

    XT_arr = np.empty((P, d))
    UT_arr = np.empty(P)
    run_arr = np.empty(P)
    term_arr = np.empty(P)
    status_arr = np.full(P, -1, dtype=np.int64)
    cdef double[:, ::1] XT = XT_arr
    cdef double[::1] UT = UT_arr
    cdef double[::1] running = run_arr
    cdef double[::1] terminal = term_arr
    cdef cnp.int64_t[::1] status = status_arr

    nrec = n + 1 if record else 0
    rX = np.empty((nrec, d))
    rU = np.empty(nrec)
    rV = np.empty(nrec)
    rz = np.empty((nrec, nm))
    ru = np.empty((nrec, m))
    cdef double[:, ::1] recX = rX
    cdef double[::1] recU = rU
    cdef double[::1] recV = rV
    cdef double[:, ::1] recz = rz
    cdef double[:, ::1] recu = ru

    cdef double[::1] u = np.empty(m)
    cdef double[::1] rhs = np.empty(m)
    cdef double[::1] X = np.empty(d)
    cdef double[::1] Xn = np.empty(d)
    cdef double[::1] ax = np.empty(d)
    cdef double[::1] cx = np.empty(d)
    cdef double[::1] zc = np.empty(nm)
    cdef double[::1] tmp = np.empty(d)
    cdef double U, Un, V, f, acc, trace, dw, s
    cdef bint bad

    with nogil:
        for p in range(P):
            for i in range(m):
                u[i] = uinit[i]
            for i in range(d):
                X[i] = X0[i]
            U = U0
            k = 0
            while True:
                # feedback from the projected augmented state
                matvec(Wp, u, zc)
                for i in range(nm):
                    zc[i] = zc[i] - U * Wrho[i]
                s = dot(X, K[k, :d]) + K[k, d] * U
                for i in range(nm):
                    s = s + zc[i] * K[k, d + 1 + i]
                V = -s
                f = quad(Q, X, tmp) + r * U * U + delta * V * V
                if k == 0 or k == n:
                    acc = (0.5 * f) if k == 0 else acc + 0.5 * f
                else:
                    acc = acc + f
                if record and p == 0:
                    for i in range(d):
                        recX[k, i] = X[i]
                    recU[k] = U
                    recV[k] = V
                    for i in range(nm):
                        recz[k, i] = zc[i]
                    for i in range(m):
                        recu[k, i] = u[i]
                if k == n:
                    break
                trace = u[0]
                dw = Wn[p, k]
                matvec(A, X, ax)
                matvec(Cm, X, cx)
                for i in range(d):
                    Xn[i] = X[i] + (ax[i] + trace * B[i]) * dt + (cx[i] + trace * D[i]) * dw
                Un = U + (mu * U + V) * dt
                rhs[0] = u[0] + lam * (u[1] - u[0]) + dt * c * u[0]
                for i in range(1, m - 1):
                    rhs[i] = u[i] + 0.5 * lam * (u[i - 1] - 2.0 * u[i] + u[i + 1]) + dt * c * u[i]
                rhs[m - 1] = (u[m - 1] + lam * (u[m - 2] - u[m - 1]) + dt * c * u[m - 1]
                              + (dt / h) * (U + Un))
                rhs[0] = rhs[0] * inv_den[0]
                for i in range(1, m):
                    rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) * inv_den[i]
                for i in range(m - 2, -1, -1):
                    rhs[i] = rhs[i] - cprime[i] * rhs[i + 1]
                bad = not (fabs(Un) <= BLOWUP_STATE)
                for i in range(m):
                    u[i] = rhs[i]
                    if not fabs(u[i]) <= BLOWUP_STATE:
                        bad = True
                for i in range(d):
                    X[i] = Xn[i]
                    if not fabs(X[i]) <= BLOWUP_STATE:
                        bad = True
                U = Un
                if bad and status[p] < 0:
                    status[p] = k + 1
                k = k + 1
            running[p] = acc * dt
            terminal[p] = quad(G, X, tmp)
            for i in range(d):
                XT[p, i] = X[i]
            UT[p] = U

    rec = None
    if record:
        rec = {"X": rX, "U": rU, "V": rV, "z": rz, "u": ru}
    return XT_arr, UT_arr, run_arr, term_arr, status_arr, rec
