# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels. Must make decisions identical to
ranlb._kernels._pure (same scan orders and tie breaks)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport pow, INFINITY

cnp.import_array()


def effective_weights(cnp.intp_t[::1] serving, cnp.intp_t[::1] ue_slice,
                      double[::1] weight, double[:, ::1] eff, double[::1] expo):
    cdef Py_ssize_t n = serving.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double ex
    for i in range(n):
        ex = expo[ue_slice[i]]
        if ex == 0.0:
            o[i] = weight[i]
        elif ex == 1.0:
            o[i] = weight[i] / eff[i, serving[i]]
        else:
            o[i] = weight[i] / pow(eff[i, serving[i]], ex)
    return out


def slice_cell_mass(cnp.intp_t[::1] serving, cnp.intp_t[::1] ue_slice,
                    double[::1] weight, double[:, ::1] eff, double[::1] expo,
                    Py_ssize_t n_slices, Py_ssize_t n_cells):
    cdef Py_ssize_t n = serving.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.zeros((n_slices, n_cells), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i
    cdef double ex, ew
    for i in range(n):
        ex = expo[ue_slice[i]]
        if ex == 0.0:
            ew = weight[i]
        elif ex == 1.0:
            ew = weight[i] / eff[i, serving[i]]
        else:
            ew = weight[i] / pow(eff[i, serving[i]], ex)
        o[ue_slice[i], serving[i]] += ew
    return out


def greedy_quota_swaps(object quota, object demand, double eps):
    cdef cnp.ndarray[double, ndim=2] q = np.array(quota, dtype=np.float64, order="C")
    cdef cnp.ndarray[double, ndim=2] d = np.ascontiguousarray(demand, dtype=np.float64)
    cdef double[:, ::1] qv = q
    cdef double[:, ::1] dv = d
    cdef Py_ssize_t S = qv.shape[0], K = qv.shape[1]
    cdef Py_ssize_t a, b, c, c1, c2, bc1, bc2
    cdef double exa, exb, lo1, lo2, dlt, best
    cdef bint found_pair, any_c1, any_c2
    while True:
        found_pair = False
        for a in range(S):
            for b in range(S):
                if a == b:
                    continue
                any_c1 = False
                any_c2 = False
                for c in range(K):
                    exa = qv[a, c] - dv[a, c]
                    exb = qv[b, c] - dv[b, c]
                    if exa > eps and exb < -eps:
                        any_c1 = True
                    if exa < -eps and exb > eps:
                        any_c2 = True
                    if any_c1 and any_c2:
                        break
                if not (any_c1 and any_c2):
                    continue
                # first eligible pair (a, b): pick max-delta cell pair,
                # ties to lowest (c1, c2)
                best = -INFINITY
                bc1 = -1
                bc2 = -1
                for c1 in range(K):
                    exa = qv[a, c1] - dv[a, c1]
                    exb = qv[b, c1] - dv[b, c1]
                    if not (exa > eps and exb < -eps):
                        continue
                    lo1 = exa if exa < -exb else -exb
                    for c2 in range(K):
                        exa = qv[a, c2] - dv[a, c2]
                        exb = qv[b, c2] - dv[b, c2]
                        if not (exa < -eps and exb > eps):
                            continue
                        lo2 = -exa if -exa < exb else exb
                        dlt = lo1 if lo1 < lo2 else lo2
                        if dlt > best:
                            best = dlt
                            bc1 = c1
                            bc2 = c2
                if bc1 < 0 or not best > eps:
                    continue
                qv[a, bc1] -= best
                qv[a, bc2] += best
                qv[b, bc1] += best
                qv[b, bc2] -= best
                found_pair = True
                break
            if found_pair:
                break
        if not found_pair:
            return q
