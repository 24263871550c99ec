# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: alignment-kernel tube counts and Gini split search.

Mirrors ``_pykernels`` operation for operation so both backends produce
bit-identical results on the same inputs.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, ldexp, INFINITY

cnp.import_array()

# 2**-1074 is the smallest positive double; larger tubes clamp here
cdef int MAX_EXPONENT = 1074


cdef inline bint _line(const double[:, ::1] X, const double[::1] y, Py_ssize_t i,
                       Py_ssize_t j, double* a, double* c) noexcept nogil:
    """Affine function through points i and j; False for a vertical pair."""
    cdef Py_ssize_t k, dim = X.shape[1]
    cdef double g11 = 1.0, g22 = 1.0, g12 = 1.0, det, u, v
    cdef bint same = True
    for k in range(dim):
        if X[i, k] != X[j, k]:
            same = False
            break
    if same:
        return False
    if dim == 1:
        a[0] = (y[j] - y[i]) / (X[j, 0] - X[i, 0])
        c[0] = y[i] - a[0] * X[i, 0]
        return True
    for k in range(dim):
        g11 += X[i, k] * X[i, k]
        g22 += X[j, k] * X[j, k]
        g12 += X[i, k] * X[j, k]
    det = g11 * g22 - g12 * g12
    if det <= 0.0:
        return False
    u = (g22 * y[i] - g12 * y[j]) / det
    v = (g11 * y[j] - g12 * y[i]) / det
    for k in range(dim):
        a[k] = u * X[i, k] + v * X[j, k]
    c[0] = u + v
    return True


cdef inline double _residual(const double[:, ::1] X, const double[::1] y, Py_ssize_t r,
                             double* a, double c) noexcept nogil:
    cdef Py_ssize_t k
    cdef double s = 0.0
    for k in range(X.shape[1]):
        s = s + X[r, k] * a[k]
    return fabs(y[r] - (s + c))


cdef inline double _tube_cost(Py_ssize_t count, double cap) noexcept nogil:
    if count == 0:
        return cap
    if count > MAX_EXPONENT:
        count = MAX_EXPONENT
    return ldexp(1.0, <int>(-count))


def alignment_exact(const double[:, ::1] X, const double[::1] y, double delta, double cap):
    cdef Py_ssize_t n = X.shape[0], i, j, r, count
    cdef Py_ssize_t n_vertical = 0
    cdef double c
    cdef double[::1] a = np.empty(X.shape[1])
    costs_arr = np.zeros((n, n))
    cdef double[:, ::1] costs = costs_arr
    cdef double w
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                if not _line(X, y, i, j, &a[0], &c):
                    w = cap
                    n_vertical += 1
                else:
                    count = 0
                    for r in range(n):
                        if r != i and r != j and _residual(X, y, r, &a[0], c) < delta:
                            count += 1
                    w = _tube_cost(count, cap)
                costs[i, j] = w
                costs[j, i] = w
    return costs_arr, int(n_vertical)


def alignment_approx(const double[:, ::1] X, const double[::1] y, double delta, double cap,
                     const cnp.intp_t[:, ::1] schedule):
    cdef Py_ssize_t n = X.shape[0], n_samples = schedule.shape[1]
    cdef Py_ssize_t i, j, r, itr, count, q, n_pairs = 0, n_vertical = 0
    cdef double c, w
    cdef double[::1] a = np.empty(X.shape[1])
    W_arr = np.full((n, n), 2.0)
    cdef double[:, ::1] W = W_arr
    members_arr = np.empty(n, dtype=np.intp)
    cdef cnp.intp_t[::1] members = members_arr
    pi_arr = np.empty(n * n_samples, dtype=np.intp)
    pj_arr = np.empty(n * n_samples, dtype=np.intp)
    pc_arr = np.empty(n * n_samples)
    cdef cnp.intp_t[::1] pi = pi_arr, pj = pj_arr
    cdef double[::1] pc = pc_arr
    with nogil:
        for i in range(n):
            for itr in range(n_samples):
                j = schedule[i, itr]
                if j < 0 or j == i or W[i, j] != 2.0:
                    continue
                if not _line(X, y, i, j, &a[0], &c):
                    w = cap
                    n_vertical += 1
                    W[i, j] = w
                    W[j, i] = w
                else:
                    count = 0
                    for r in range(n):
                        if r != i and r != j and _residual(X, y, r, &a[0], c) < delta:
                            members[count] = r
                            count += 1
                    w = _tube_cost(count, cap)
                    W[i, j] = w
                    W[j, i] = w
                    for q in range(count):
                        r = members[q]
                        if w < W[i, r]:
                            W[i, r] = w
                            W[r, i] = w
                        if w < W[r, j]:
                            W[j, r] = w
                            W[r, j] = w
                pi[n_pairs] = i
                pj[n_pairs] = j
                pc[n_pairs] = w
                n_pairs += 1
        for i in range(n):
            W[i, i] = 0.0
    return (W_arr, pi_arr[:n_pairs].copy(), pj_arr[:n_pairs].copy(),
            pc_arr[:n_pairs].copy(), int(n_vertical))


def best_split(const double[::1, :] Z, const cnp.int32_t[::1, :] order,
               const cnp.uint8_t[::1] active, const cnp.intp_t[::1] labels,
               Py_ssize_t n_classes, Py_ssize_t min_leaf):
    """Best Gini split over all columns for the rows flagged in ``active``.

    Returns ``(feature, threshold, lower, score)`` where ``score`` is
    sum(L_c^2)/n_L + sum(R_c^2)/n_R; feature is -1 when no split is valid.
    """
    cdef Py_ssize_t n = Z.shape[0], m = Z.shape[1]
    cdef Py_ssize_t f, p, idx, lab, n_t = 0, n_left, rc
    cdef long long sumsq_tot = 0, sumsq_left, sumsq_right
    cdef double v, prev, score, best = -INFINITY, best_thr = 0.0, best_lower = 0.0
    cdef Py_ssize_t best_f = -1
    cdef bint have_prev
    tot_arr = np.zeros(n_classes, dtype=np.int64)
    left_arr = np.zeros(n_classes, dtype=np.int64)
    cdef cnp.int64_t[::1] tot = tot_arr, left = left_arr
    for idx in range(n):
        if active[idx]:
            tot[labels[idx]] += 1
            n_t += 1
    for lab in range(n_classes):
        sumsq_tot += tot[lab] * tot[lab]
    with nogil:
        for f in range(m):
            for lab in range(n_classes):
                left[lab] = 0
            n_left = 0
            sumsq_left = 0
            sumsq_right = sumsq_tot
            have_prev = False
            prev = 0.0
            for p in range(n):
                idx = order[p, f]
                if not active[idx]:
                    continue
                v = Z[idx, f]
                if have_prev and v > prev and n_left >= min_leaf and n_t - n_left >= min_leaf:
                    score = (<double>sumsq_left) / n_left + (<double>sumsq_right) / (n_t - n_left)
                    if score > best:
                        best = score
                        best_f = f
                        best_thr = (prev + v) / 2.0
                        best_lower = prev
                lab = labels[idx]
                sumsq_left += 2 * left[lab] + 1
                rc = tot[lab] - left[lab]
                sumsq_right -= 2 * rc - 1
                left[lab] += 1
                n_left += 1
                prev = v
                have_prev = True
    return int(best_f), float(best_thr), float(best_lower), float(best)
