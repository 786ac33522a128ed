# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for pairwise counting and the Fisher upper tail.

Mirrors comorbid._kernels.pure exactly; see that module for the contract.
"""

from libc.math cimport exp, lgamma

import numpy as np

BACKEND = "compiled"

cdef double REL_EPS = 1e-18


cdef double _upper_tail(long long a, long long b, long long c, long long d,
                        const double[::1] lf) nogil:
    cdef long long ab = a + b
    cdef long long ac = a + c
    cdef long long n = a + b + c + d
    cdef long long k_min = ab + ac - n
    if k_min < 0:
        k_min = 0
    cdef long long k_max = ab if ab < ac else ac
    if a <= k_min:
        return 1.0
    cdef double log_den = lf[n] - lf[ab] - lf[n - ab]
    cdef long long mode = ((ab + 1) * (ac + 1)) // (n + 2)
    cdef double s = 0.0
    cdef double term
    cdef long long k
    if a > mode:
        # the upper tail excludes the mode: sum it directly, full relative
        # accuracy; terms strictly decrease from k = a on, so truncate once
        # they no longer move the sum
        for k in range(a, k_max + 1):
            term = exp(lf[ac] - lf[k] - lf[ac - k]
                       + lf[n - ac] - lf[ab - k] - lf[n - ac - ab + k]
                       - log_den)
            s += term
            if term < s * REL_EPS:
                break
        if s > 1.0:
            s = 1.0
        return s
    # a <= mode: the upper tail holds the majority mass, so sum the lower
    # tail (walking down from a-1, terms strictly decrease) and subtract
    for k in range(a - 1, k_min - 1, -1):
        term = exp(lf[ac] - lf[k] - lf[ac - k]
                   + lf[n - ac] - lf[ab - k] - lf[n - ac - ab + k]
                   - log_den)
        s += term
        if term < s * REL_EPS:
            break
    s = 1.0 - s
    if s < 5e-324:
        s = 5e-324
    elif s > 1.0:
        s = 1.0
    return s


def fisher_greater_p(a, b, c, d, const double[::1] lf):
    return _upper_tail(a, b, c, d, lf)


def fisher_greater_p_batch(tables, const double[::1] lf):
    cdef long long[:, ::1] t = np.ascontiguousarray(tables, dtype=np.int64)
    cdef Py_ssize_t m = t.shape[0]
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(m):
            out[i] = _upper_tail(t[i, 0], t[i, 1], t[i, 2], t[i, 3], lf)
    return out_arr


def count_events(codes, adms, offsets, n_codes):
    cdef long long[::1] cv = np.ascontiguousarray(codes, dtype=np.int64)
    cdef long long[::1] av = np.ascontiguousarray(adms, dtype=np.int64)
    cdef long long[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t n = n_codes
    ordered_arr = np.zeros((n, n), dtype=np.int64)
    joint_arr = np.zeros((n, n), dtype=np.int64)
    marginal_arr = np.zeros(n, dtype=np.int64)
    cdef long long[:, ::1] ordered = ordered_arr
    cdef long long[:, ::1] joint = joint_arr
    cdef long long[::1] marginal = marginal_arr
    cdef Py_ssize_t p, i, j
    cdef long long lo, hi, ci, cj
    with nogil:
        for p in range(off.shape[0] - 1):
            lo = off[p]
            hi = off[p + 1]
            for i in range(lo, hi):
                ci = cv[i]
                marginal[ci] += 1
                joint[ci, ci] += 1
                for j in range(i + 1, hi):
                    cj = cv[j]
                    joint[ci, cj] += 1
                    joint[cj, ci] += 1
                    if av[i] < av[j]:
                        ordered[ci, cj] += 1
                    elif av[j] < av[i]:
                        ordered[cj, ci] += 1
    return ordered_arr, joint_arr, marginal_arr


def log_factorials(n):
    out_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k
    for k in range(n + 1):
        out[k] = lgamma(k + 1.0)
    return out_arr
