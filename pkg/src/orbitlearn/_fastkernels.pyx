# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loops for the regular and integer-shift coding step.

Semantics mirror the generic engine in coder.py exactly: same iteration
structure, same backtracking acceptance rule, same recorded history.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, isfinite

cnp.import_array()

# Must match ACCEPT_SLACK in coder.py.
cdef double ACCEPT_SLACK = 16.0 * 2.220446049250313e-16


cdef inline double _soft(double v, double t) nogil:
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


cdef double _loss(double[::1] y, double[::1] fit, double[::1] mask, int n) nogil:
    cdef double acc = 0.0, r
    cdef int i
    if mask.shape[0] == n:
        for i in range(n):
            r = mask[i] * (y[i] - fit[i])
            acc += r * r
    else:
        for i in range(n):
            r = y[i] - fit[i]
            acc += r * r
    return 0.5 * acc


cdef void _residual(double[::1] y, double[::1] fit, double[::1] mask, double[::1] out, int n) nogil:
    cdef int i
    if mask.shape[0] == n:
        for i in range(n):
            out[i] = mask[i] * (y[i] - fit[i])
    else:
        for i in range(n):
            out[i] = y[i] - fit[i]


cdef void _fit_intshift(double[:, ::1] A, double[:, ::1] Z, double[::1] fit, int q, int n) nogil:
    cdef int j, k, i
    cdef double av
    for i in range(n):
        fit[i] = 0.0
    for j in range(q):
        for k in range(n):
            av = A[j, k]
            if av == 0.0:
                continue
            for i in range(k, n):
                fit[i] += av * Z[j, i - k]
            for i in range(k):
                fit[i] += av * Z[j, i - k + n]


cdef void _grad_intshift(double[:, ::1] A, double[::1] resid, double[:, ::1] G, int q, int n) nogil:
    # G[j, m] = -sum_k A[j, k] * resid[(k + m) mod n]
    cdef int j, k, m
    cdef double av
    for j in range(q):
        for m in range(n):
            G[j, m] = 0.0
        for k in range(n):
            av = A[j, k]
            if av == 0.0:
                continue
            for m in range(n - k):
                G[j, m] -= av * resid[k + m]
            for m in range(n - k, n):
                G[j, m] -= av * resid[k + m - n]


def code_intshift(
    cnp.ndarray[double, ndim=1] y_in,
    cnp.ndarray[double, ndim=2] A_in,
    cnp.ndarray[double, ndim=2] Z_in,
    double lam,
    int max_iters,
    double eta0,
    double beta,
    double c_suff,
    int max_backtracks,
    cnp.ndarray[double, ndim=1] mask_in,
):
    """Proximal gradient with backtracking for the integer-shift group.

    Z_in is updated in place; the returned array is the objective history
    (initial value plus one entry per iteration run).
    """
    cdef double[::1] y = np.ascontiguousarray(y_in)
    cdef double[:, ::1] A = np.ascontiguousarray(A_in)
    cdef double[:, ::1] Z = Z_in
    cdef double[::1] mask = np.ascontiguousarray(mask_in)
    cdef int q = A.shape[0]
    cdef int n = A.shape[1]

    hist_arr = np.empty(max_iters + 1, dtype=float)
    cdef double[::1] hist = hist_arr
    fit_arr = np.empty(n, dtype=float)
    cdef double[::1] fit = fit_arr
    cdef double[::1] resid = np.empty(n, dtype=float)
    cdef double[:, ::1] G = np.empty((q, n), dtype=float)
    cdef double[:, ::1] Zc = np.empty((q, n), dtype=float)
    cdef double[::1] fitc = np.empty(n, dtype=float)

    cdef double F, Fc, pen, eta, move, diff, v
    cdef int it, bt, j, k, i, accepted, count

    _fit_intshift(A, Z, fit, q, n)
    pen = 0.0
    for j in range(q):
        for k in range(n):
            pen += fabs(Z[j, k])
    F = _loss(y, fit, mask, n) + lam * pen
    hist[0] = F
    count = 1
    if not isfinite(F):
        return hist_arr[:count]

    for it in range(max_iters):
        _residual(y, fit, mask, resid, n)
        _grad_intshift(A, resid, G, q, n)
        eta = eta0
        accepted = 0
        for bt in range(max_backtracks):
            pen = 0.0
            for j in range(q):
                for k in range(n):
                    v = _soft(Z[j, k] - eta * G[j, k], eta * lam)
                    Zc[j, k] = v
                    pen += fabs(v)
            _fit_intshift(A, Zc, fitc, q, n)
            Fc = _loss(y, fitc, mask, n) + lam * pen
            if isfinite(Fc):
                move = 0.0
                for j in range(q):
                    for k in range(n):
                        diff = Zc[j, k] - Z[j, k]
                        move += diff * diff
                if Fc <= F - 0.5 * c_suff / eta * move + ACCEPT_SLACK * (1.0 + fabs(F)):
                    for j in range(q):
                        for k in range(n):
                            Z[j, k] = Zc[j, k]
                    for i in range(n):
                        fit[i] = fitc[i]
                    F = Fc
                    accepted = 1
                    break
            eta *= beta
        hist[count] = F
        count += 1
        if not accepted:
            break
    return hist_arr[:count]


cdef void _fit_regular(double[:, ::1] A, double[::1] Z, double[::1] fit, int q, int n) nogil:
    cdef int j, i
    cdef double zj
    for i in range(n):
        fit[i] = 0.0
    for j in range(q):
        zj = Z[j]
        if zj == 0.0:
            continue
        for i in range(n):
            fit[i] += zj * A[j, i]


def code_regular(
    cnp.ndarray[double, ndim=1] y_in,
    cnp.ndarray[double, ndim=2] A_in,
    cnp.ndarray[double, ndim=1] Z_in,
    double lam,
    int max_iters,
    double eta0,
    double beta,
    double c_suff,
    int max_backtracks,
    cnp.ndarray[double, ndim=1] mask_in,
):
    """Proximal gradient with backtracking for the regular (identity) group."""
    cdef double[::1] y = np.ascontiguousarray(y_in)
    cdef double[:, ::1] A = np.ascontiguousarray(A_in)
    cdef double[::1] Z = Z_in
    cdef double[::1] mask = np.ascontiguousarray(mask_in)
    cdef int q = A.shape[0]
    cdef int n = A.shape[1]

    hist_arr = np.empty(max_iters + 1, dtype=float)
    cdef double[::1] hist = hist_arr
    cdef double[::1] fit = np.empty(n, dtype=float)
    cdef double[::1] resid = np.empty(n, dtype=float)
    cdef double[::1] G = np.empty(q, dtype=float)
    cdef double[::1] Zc = np.empty(q, dtype=float)
    cdef double[::1] fitc = np.empty(n, dtype=float)

    cdef double F, Fc, pen, eta, move, diff, v, acc
    cdef int it, bt, j, i, accepted, count

    _fit_regular(A, Z, fit, q, n)
    pen = 0.0
    for j in range(q):
        pen += fabs(Z[j])
    F = _loss(y, fit, mask, n) + lam * pen
    hist[0] = F
    count = 1
    if not isfinite(F):
        return hist_arr[:count]

    for it in range(max_iters):
        _residual(y, fit, mask, resid, n)
        for j in range(q):
            acc = 0.0
            for i in range(n):
                acc += A[j, i] * resid[i]
            G[j] = -acc
        eta = eta0
        accepted = 0
        for bt in range(max_backtracks):
            pen = 0.0
            for j in range(q):
                v = _soft(Z[j] - eta * G[j], eta * lam)
                Zc[j] = v
                pen += fabs(v)
            _fit_regular(A, Zc, fitc, q, n)
            Fc = _loss(y, fitc, mask, n) + lam * pen
            if isfinite(Fc):
                move = 0.0
                for j in range(q):
                    diff = Zc[j] - Z[j]
                    move += diff * diff
                if Fc <= F - 0.5 * c_suff / eta * move + ACCEPT_SLACK * (1.0 + fabs(F)):
                    for j in range(q):
                        Z[j] = Zc[j]
                    for i in range(n):
                        fit[i] = fitc[i]
                    F = Fc
                    accepted = 1
                    break
            eta *= beta
        hist[count] = F
        count += 1
        if not accepted:
            break
    return hist_arr[:count]
