# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled node-wise kernels; same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


cdef inline double _gdot(const double[:, ::1] G, double* a, double* b, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double s = 0.0, r
    for i in range(d):
        r = 0.0
        for j in range(d):
            r += G[i, j] * b[j]
        s += a[i] * r
    return s


cdef void _jacobi_minmax(double* A, Py_ssize_t m, double* lo, double* hi) noexcept nogil:
    """Eigenvalue extremes of a small symmetric matrix by cyclic Jacobi sweeps."""
    cdef Py_ssize_t p, q, k, sweep
    cdef double apq, app, aqq, theta, t, c, s, akp, akq, off
    for sweep in range(50):
        off = 0.0
        for p in range(m):
            for q in range(p + 1, m):
                off += A[p * m + q] * A[p * m + q]
        if off < 1e-30:
            break
        for p in range(m):
            for q in range(p + 1, m):
                apq = A[p * m + q]
                if apq == 0.0:
                    continue
                app = A[p * m + p]
                aqq = A[q * m + q]
                theta = (aqq - app) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(m):
                    akp = A[k * m + p]
                    akq = A[k * m + q]
                    A[k * m + p] = c * akp - s * akq
                    A[k * m + q] = s * akp + c * akq
                for k in range(m):
                    akp = A[p * m + k]
                    akq = A[q * m + k]
                    A[p * m + k] = c * akp - s * akq
                    A[q * m + k] = s * akp + c * akq
    lo[0] = A[0]
    hi[0] = A[0]
    for k in range(1, m):
        if A[k * m + k] < lo[0]:
            lo[0] = A[k * m + k]
        if A[k * m + k] > hi[0]:
            hi[0] = A[k * m + k]


def adapted_frames(E, G, T, double cond_max=1e8):
    cdef double[:, :, ::1] Ev = np.ascontiguousarray(E, dtype=np.float64)
    cdef double[:, :, ::1] Gv = np.ascontiguousarray(G, dtype=np.float64)
    cdef double[:, :, ::1] Tv = np.ascontiguousarray(T, dtype=np.float64)
    cdef Py_ssize_t N = Ev.shape[0], n = Ev.shape[1], d = Ev.shape[2], m = Tv.shape[1]
    tau_a = np.empty((N, n, d))
    nu_a = np.empty((N, m, d))
    cond_a = np.empty(N)
    status_a = np.zeros(N, dtype=np.int8)
    cdef double[:, :, ::1] tau = tau_a
    cdef double[:, :, ::1] nu = nu_a
    cdef double[::1] cond = cond_a
    cdef signed char[::1] status = status_a
    cdef double[::1] w = np.empty(d)
    cdef double[:, ::1] P = np.empty((m, d))
    cdef double[::1] gram = np.empty(m * m)
    cdef Py_ssize_t p, k, j, a, b, i
    cdef double q, coef, lo, hi
    with nogil:
        for p in range(N):
            for k in range(n):
                for i in range(d):
                    w[i] = Ev[p, k, i]
                for j in range(k):
                    coef = _gdot(Gv[p], &w[0], &tau[p, j, 0], d)
                    for i in range(d):
                        w[i] -= coef * tau[p, j, i]
                q = _gdot(Gv[p], &w[0], &w[0], d)
                if q <= 0.0:
                    status[p] = 1
                    q = 1.0
                q = sqrt(q)
                for i in range(d):
                    tau[p, k, i] = w[i] / q
            for a in range(m):
                for i in range(d):
                    P[a, i] = Tv[p, a, i]
                for k in range(n):
                    coef = _gdot(Gv[p], &P[a, 0], &tau[p, k, 0], d)
                    for i in range(d):
                        P[a, i] -= coef * tau[p, k, i]
            for a in range(m):
                for b in range(m):
                    gram[a * m + b] = -_gdot(Gv[p], &P[a, 0], &P[b, 0], d)
            _jacobi_minmax(&gram[0], m, &lo, &hi)
            if lo > 0.0:
                cond[p] = hi / lo
            else:
                cond[p] = INFINITY
            if status[p] == 0 and not (cond[p] <= cond_max):
                status[p] = 2
            for a in range(m):
                for i in range(d):
                    w[i] = P[a, i]
                for b in range(a):
                    coef = _gdot(Gv[p], &w[0], &nu[p, b, 0], d)
                    for i in range(d):
                        w[i] += coef * nu[p, b, i]
                q = -_gdot(Gv[p], &w[0], &w[0], d)
                if q <= 0.0:
                    q = 1.0
                q = sqrt(q)
                for i in range(d):
                    nu[p, a, i] = w[i] / q
    return tau_a, nu_a, cond_a, status_a


def radial_rhs(R, H, double h):
    cdef double[::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef double[::1] Hv = np.ascontiguousarray(H, dtype=np.float64)
    cdef Py_ssize_t N = Hv.shape[0], k
    out_a = np.zeros(N)
    cdef double[::1] out = out_a
    cdef double Hp, Hpp, num, den, hmin = INFINITY, hpmin = INFINITY
    with nogil:
        for k in range(1, N - 1):
            Hp = (Hv[k + 1] - Hv[k - 1]) / (2.0 * h)
            Hpp = (Hv[k + 1] - 2.0 * Hv[k] + Hv[k - 1]) / (h * h)
            num = Rv[k] * Hv[k] * Hpp + 2.0 * Rv[k] * Hp * Hp - 2.0 * Hv[k] * Hp
            den = 2.0 * Rv[k] * Hv[k] * Hp
            out[k] = num / den
            if Hv[k] < hmin:
                hmin = Hv[k]
            if Hp < hpmin:
                hpmin = Hp
    return out_a, hmin, hpmin
