# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fixed-step loops for affine systems ``xdot = A x + Bu u(t)``."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline void _affine(const double[:, ::1] A, const double[:, ::1] Bu, const double[::1] x,
                         const double[::1] u, double[::1] out, Py_ssize_t n, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += A[i, j] * x[j]
        for j in range(m):
            acc += Bu[i, j] * u[j]
        out[i] = acc


def rk4_affine(A, Bu, U_halfsteps, x0, double dt, Py_ssize_t nsteps):
    """Classical RK4; ``U_halfsteps[k]`` is the input at ``t0 + k dt / 2``."""
    cdef const double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(Bu, dtype=np.float64)
    cdef const double[:, ::1] U = np.ascontiguousarray(U_halfsteps, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[1]
    out_arr = np.empty((nsteps + 1, n))
    cdef double[:, ::1] X = out_arr
    cdef double[::1] x = np.array(x0, dtype=np.float64).reshape(n)
    cdef double[::1] k1 = np.empty(n), k2 = np.empty(n), k3 = np.empty(n), k4 = np.empty(n)
    cdef double[::1] tmp = np.empty(n)
    cdef Py_ssize_t s, i
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0
    with nogil:
        for i in range(n):
            X[0, i] = x[i]
        for s in range(nsteps):
            _affine(a, b, x, U[2 * s], k1, n, m)
            for i in range(n):
                tmp[i] = x[i] + h2 * k1[i]
            _affine(a, b, tmp, U[2 * s + 1], k2, n, m)
            for i in range(n):
                tmp[i] = x[i] + h2 * k2[i]
            _affine(a, b, tmp, U[2 * s + 1], k3, n, m)
            for i in range(n):
                tmp[i] = x[i] + dt * k3[i]
            _affine(a, b, tmp, U[2 * s + 2], k4, n, m)
            for i in range(n):
                x[i] = x[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                X[s + 1, i] = x[i]
    return out_arr


def midpoint_affine(P, Qm, Umid, x0, Py_ssize_t nsteps):
    """``x_{k+1} = P x_k + Qm Umid[k]`` with the midpoint propagators precomputed."""
    cdef const double[:, ::1] p = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[:, ::1] q = np.ascontiguousarray(Qm, dtype=np.float64)
    cdef const double[:, ::1] U = np.ascontiguousarray(Umid, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], m = q.shape[1]
    out_arr = np.empty((nsteps + 1, n))
    cdef double[:, ::1] X = out_arr
    cdef double[::1] x = np.array(x0, dtype=np.float64).reshape(n)
    cdef double[::1] nxt = np.empty(n)
    cdef Py_ssize_t s, i
    with nogil:
        for i in range(n):
            X[0, i] = x[i]
        for s in range(nsteps):
            _affine(p, q, x, U[s], nxt, n, m)
            for i in range(n):
                x[i] = nxt[i]
                X[s + 1, i] = x[i]
    return out_arr
