# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: batched switching-curve roots and local payoffs."""

import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, sqrt

cnp.import_array()

cdef double SQRT2 = sqrt(2.0)


cdef inline double _switching_g(double xi, double y2, double a1, double a2,
                                double tau, double d1, double d2,
                                double scale, double rho) noexcept nogil:
    cdef double arg = (tau - a1 * d1 * xi - a2 * d2 * y2) / scale
    return 0.5 * erfc(-arg / SQRT2) - 0.5 - 0.5 * rho * (d1 * xi - d2 * y2)


def switching_roots(y2, double a1, double a2, double tau, double d1, double d2,
                    double scale, double rho, double tol, int max_doublings=200):
    """Same contract as ``_kernels_py.switching_roots``."""
    cdef const double[::1] ys = np.ascontiguousarray(y2, dtype=np.float64)
    cdef Py_ssize_t n = ys.shape[0]
    roots_arr = np.empty(n, dtype=np.float64)
    iters_arr = np.zeros(n, dtype=np.int64)
    cdef double[::1] roots = roots_arr
    cdef cnp.int64_t[::1] iters = iters_arr
    cdef Py_ssize_t i
    cdef int k
    cdef Py_ssize_t failed = -1
    cdef double y, xi0, g0, direction, near, step, trial, gt, lo, hi, mid, gm
    cdef bint bracketed

    with nogil:
        for i in range(n):
            y = ys[i]
            xi0 = (tau - a2 * d2 * y) / (a1 * d1)
            g0 = _switching_g(xi0, y, a1, a2, tau, d1, d2, scale, rho)
            if g0 == 0.0:
                roots[i] = xi0
                continue
            direction = 1.0 if g0 > 0.0 else -1.0
            near = xi0
            step = 1.0
            bracketed = False
            lo = xi0
            hi = xi0
            for k in range(max_doublings):
                trial = near + direction * step
                gt = _switching_g(trial, y, a1, a2, tau, d1, d2, scale, rho)
                iters[i] += 1
                if (direction > 0.0 and gt <= 0.0) or (direction < 0.0 and gt >= 0.0):
                    if direction > 0.0:
                        lo = near
                        hi = trial
                    else:
                        lo = trial
                        hi = near
                    bracketed = True
                    break
                near = trial
                step *= 2.0
            if not bracketed:
                roots[i] = xi0
                if failed < 0:
                    failed = i
                continue
            while hi - lo > tol:
                mid = lo + 0.5 * (hi - lo)
                if mid <= lo or mid >= hi:
                    break
                gm = _switching_g(mid, y, a1, a2, tau, d1, d2, scale, rho)
                iters[i] += 1
                if gm > 0.0:
                    lo = mid
                elif gm < 0.0:
                    hi = mid
                else:
                    lo = mid
                    hi = mid
                    break
            roots[i] = lo + 0.5 * (hi - lo)
    return roots_arr, iters_arr, int(failed)


def local_payoffs(actions, theta, indptr, indices, Py_ssize_t n_agents):
    """Same contract as ``_kernels_py.local_payoffs``."""
    cdef const signed char[:, ::1] act = np.ascontiguousarray(actions, dtype=np.int8)
    cdef const double[:, ::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef const cnp.int64_t[::1] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const cnp.int64_t[::1] nbr = np.ascontiguousarray(indices, dtype=np.int64)
    cdef Py_ssize_t n_trials = act.shape[0]
    cdef Py_ssize_t n_nodes = act.shape[1]
    payoff_arr = np.empty((n_trials, n_nodes), dtype=np.float64)
    matches_arr = np.zeros(n_trials, dtype=np.int64)
    cdef double[:, ::1] payoff = payoff_arr
    cdef cnp.int64_t[::1] matches = matches_arr
    cdef Py_ssize_t t, i, p
    cdef double deg, n1, nn = <double>n_agents
    cdef cnp.int64_t same

    with nogil:
        for t in range(n_trials):
            same = 0
            for i in range(n_nodes):
                n1 = 0.0
                for p in range(ptr[i], ptr[i + 1]):
                    if act[t, nbr[p]] == 1:
                        n1 += 1.0
                deg = <double>(ptr[i + 1] - ptr[i])
                if act[t, i] == 1:
                    payoff[t, i] = n1 / deg - deg * th[t, 0] / nn
                    same += <cnp.int64_t>n1
                else:
                    payoff[t, i] = (deg - n1) / deg - deg * th[t, 1] / nn
                    same += <cnp.int64_t>(deg - n1)
            matches[t] = same // 2
    return payoff_arr, matches_arr
