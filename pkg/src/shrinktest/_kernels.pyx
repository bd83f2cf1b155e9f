# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for fixed-node quadrature sums and table lookups.

Must stay numerically interchangeable with ``_kernels_py``.
"""

import numpy as np

from libc.math cimport exp, floor, log, INFINITY


def shrink_moments(const double[::1] z, const double[::1] base, const double[::1] kappa, const double[::1] omk):
    """Return (log D, E[1 - kappa], Var[kappa]) for every z.

    Node k carries log weight ``base[k] - z^2 kappa[k] / 2``.
    """
    cdef Py_ssize_t n = z.shape[0], K = base.shape[0], i, k
    cdef double hz, e, mx, p, s0, s1, sk, sq, ek, dk
    log_d = np.empty(n)
    weight = np.empty(n)
    var_k = np.empty(n)
    cdef double[::1] ld = log_d, w = weight, v = var_k
    cdef double[::1] buf = np.empty(K)
    for i in range(n):
        hz = 0.5 * z[i] * z[i]
        mx = -INFINITY
        for k in range(K):
            e = base[k] - hz * kappa[k]
            if e > mx:
                mx = e
        s0 = 0.0
        s1 = 0.0
        sk = 0.0
        for k in range(K):
            p = exp(base[k] - hz * kappa[k] - mx)
            buf[k] = p
            s0 += p
            s1 += p * omk[k]
            sk += p * kappa[k]
        ek = sk / s0
        sq = 0.0
        for k in range(K):
            dk = kappa[k] - ek
            sq += buf[k] * dk * dk
        ld[i] = mx + log(s0)
        w[i] = s1 / s0
        v[i] = sq / s0
    return log_d, weight, var_k


cdef inline double _hermite(const double[:, ::1] f, const double[:, ::1] df, Py_ssize_t j, double zz, double dz) nogil:
    cdef double t = zz / dz
    cdef Py_ssize_t g = <Py_ssize_t> floor(t)
    cdef double u = t - g
    cdef double u2 = u * u
    cdef double om = 1.0 - u
    return ((1.0 + 2.0 * u) * om * om * f[j, g] + u * om * om * dz * df[j, g]
            + u2 * (3.0 - 2.0 * u) * f[j, g + 1] - u2 * om * dz * df[j, g + 1])


def hermite_sum(const double[:, ::1] f, const double[:, ::1] df, double dz, const double[:, ::1] zs):
    """out[j, s] = sum_i H_j(zs[s, i]) for cubic Hermite tables on a uniform z grid from 0."""
    cdef Py_ssize_t J = f.shape[0], S = zs.shape[0], n = zs.shape[1], j, s, i
    cdef double acc
    out = np.empty((J, S))
    cdef double[:, ::1] o = out
    with nogil:
        for j in range(J):
            for s in range(S):
                acc = 0.0
                for i in range(n):
                    acc = acc + _hermite(f, df, j, zs[s, i], dz)
                o[j, s] = acc
    return out


def hermite_mix(const double[:, ::1] f, const double[:, ::1] df, double dz, const double[:, ::1] zs, const double[:, ::1] prob):
    """out[i] = sum_{j, s} prob[j, s] * H_j(zs[s, i])."""
    cdef Py_ssize_t J = f.shape[0], S = zs.shape[0], n = zs.shape[1], j, s, i
    cdef double pr
    out = np.zeros(n)
    cdef double[::1] o = out
    with nogil:
        for j in range(J):
            for s in range(S):
                pr = prob[j, s]
                if pr == 0.0:
                    continue
                for i in range(n):
                    o[i] += pr * _hermite(f, df, j, zs[s, i], dz)
    return out
