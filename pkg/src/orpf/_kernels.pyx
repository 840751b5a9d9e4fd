# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_fallback``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, sqrt, isfinite, INFINITY

cnp.import_array()

cdef enum:
    OK = 0
    NOT_CONVERGED = 1
    ZERO_VOLTAGE = 2
    DIVERGED = 3


cdef inline double cmod(double complex z) nogil:
    return sqrt(z.real * z.real + z.imag * z.imag)


def zbus_fixed_point(double complex[:, ::1] X, double complex[::1] s,
                     double[::1] eta, double complex u_pcc, double U_N,
                     double tol, int max_iter):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t v, w
    cdef int it = 0, status = NOT_CONVERGED
    cdef double change = INFINITY, diff, mag, umax
    cdef double complex acc, cur
    u_arr = np.full(n, u_pcc, dtype=np.complex128)
    unew_arr = np.empty(n, dtype=np.complex128)
    cur_arr = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] u = u_arr
    cdef double complex[::1] unew = unew_arr
    cdef double complex[::1] i_inj = cur_arr
    if n == 1:
        return u_arr, 1, OK, 0.0
    with nogil:
        for it in range(1, max_iter + 1):
            status = -1
            for v in range(1, n):
                if s[v] == 0:
                    i_inj[v] = 0
                    continue
                mag = cmod(u[v])
                if mag == 0.0:
                    status = ZERO_VOLTAGE
                    break
                cur = s[v] * pow(mag / U_N, eta[v]) / u[v]
                i_inj[v] = cur.conjugate()
            if status == ZERO_VOLTAGE:
                break
            change = 0.0
            umax = 0.0
            for v in range(n):
                acc = u_pcc
                for w in range(1, n):
                    acc = acc + X[v, w] * i_inj[w]
                unew[v] = acc
                diff = cmod(acc - u[v])
                if diff > change:
                    change = diff
                mag = cmod(acc)
                if mag > umax or not isfinite(mag):
                    umax = mag
            if not isfinite(umax) or umax > 1e3 * U_N:
                status = DIVERGED
                change = INFINITY
                for v in range(n):
                    u[v] = unew[v]
                break
            change = change / U_N
            for v in range(n):
                u[v] = unew[v]
            if change < tol:
                status = OK
                break
        if status == -1:
            status = NOT_CONVERGED
            it = max_iter
    return u_arr, it, status, change


def gossip_model_ensemble(double[:, ::1] M, double[::1] g_fixed,
                          double[::1] q_opt, double[::1] q_init,
                          cnp.int64_t[::1] members, cnp.int64_t[::1] offsets,
                          double[::1] blocks, cnp.int64_t[::1] block_offsets,
                          cnp.int64_t[:, ::1] schedule):
    cdef Py_ssize_t runs = schedule.shape[0]
    cdef Py_ssize_t T = schedule.shape[1]
    cdef Py_ssize_t m = M.shape[0]
    cdef Py_ssize_t k, t, a, b, j, r, c, start, bstart
    cdef double acc, val
    out_arr = np.empty((runs, T + 1))
    q_arr = np.empty(m)
    x_arr = np.empty(m)
    g_arr = np.empty(m)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] q = q_arr
    cdef double[::1] x = x_arr
    cdef double[::1] grad = g_arr
    with nogil:
        for k in range(runs):
            for j in range(m):
                q[j] = q_init[j]
            for t in range(T + 1):
                if t > 0:
                    r = schedule[k, t - 1]
                    start = offsets[r]
                    c = offsets[r + 1] - start
                    bstart = block_offsets[r]
                    for a in range(c):
                        acc = g_fixed[members[start + a]]
                        for j in range(m):
                            acc = acc + M[members[start + a], j] * q[j]
                        grad[a] = acc
                    for a in range(c):
                        acc = 0.0
                        for b in range(c):
                            acc = acc + blocks[bstart + a * c + b] * grad[b]
                        q[members[start + a]] -= acc
                for j in range(m):
                    x[j] = q[j] - q_opt[j]
                val = 0.0
                for a in range(m):
                    acc = 0.0
                    for b in range(m):
                        acc = acc + M[a, b] * x[b]
                    val = val + x[a] * acc
                out[k, t] = 0.5 * val
    return out_arr
