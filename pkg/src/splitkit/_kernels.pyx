# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: fixed-point accumulation, triangular solves, Cholesky
and round-robin Jacobi. ``_kernels_py`` is the reference fallback."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs
from libc.stdint cimport int64_t

cnp.import_array()

BACKEND = "cython"


cdef inline int64_t _overflow(int64_t q, int word_bits, bint saturate) noexcept nogil:
    cdef int64_t lo = -((<int64_t>1) << (word_bits - 1))
    cdef int64_t hi = ((<int64_t>1) << (word_bits - 1)) - 1
    cdef int64_t mask
    if saturate:
        if q < lo:
            return lo
        if q > hi:
            return hi
        return q
    mask = ((<int64_t>1) << word_bits) - 1
    return ((q - lo) & mask) + lo


cdef inline int64_t _reduce(int64_t p, int frac_bits, int word_bits,
                            bint round_even, bint saturate) noexcept nogil:
    cdef int64_t q = p
    cdef int64_t rem, half
    if frac_bits > 0:
        q = p >> frac_bits
        if round_even:
            rem = p - (q << frac_bits)
            half = (<int64_t>1) << (frac_bits - 1)
            if rem > half or (rem == half and (q & 1) == 1):
                q += 1
    return _overflow(q, word_bits, saturate)


def q_mul_vec(a, b, int frac_bits, int word_bits, bint round_even, bint saturate):
    cdef int64_t[::1] av = np.ascontiguousarray(a, dtype=np.int64)
    cdef int64_t[::1] bv = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = av.shape[0], i
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _reduce(av[i] * bv[i], frac_bits, word_bits, round_even, saturate)
    return out


def q_add_vec(a, b, int word_bits, bint saturate):
    cdef int64_t[::1] av = np.ascontiguousarray(a, dtype=np.int64)
    cdef int64_t[::1] bv = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = av.shape[0], i
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _overflow(av[i] + bv[i], word_bits, saturate)
    return out


def q_matvec(M, v, int frac_bits, int word_bits, bint round_even, bint saturate):
    cdef int64_t[:, ::1] Mv = np.ascontiguousarray(M, dtype=np.int64)
    cdef int64_t[::1] vv = np.ascontiguousarray(v, dtype=np.int64)
    cdef Py_ssize_t rows = Mv.shape[0], cols = Mv.shape[1], i, j
    cdef int64_t acc
    out = np.empty(rows, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for i in range(rows):
            acc = 0
            for j in range(cols):
                acc = _overflow(acc + _reduce(Mv[i, j] * vv[j], frac_bits, word_bits,
                                              round_even, saturate),
                                word_bits, saturate)
            o[i] = acc
    return out


def q_trisolve(G, recip, rhs, bint lower, int frac_bits, int word_bits,
               bint round_even, bint saturate):
    cdef int64_t[:, ::1] Gv = np.ascontiguousarray(G, dtype=np.int64)
    cdef int64_t[::1] rv = np.ascontiguousarray(recip, dtype=np.int64)
    cdef int64_t[::1] bv = np.ascontiguousarray(rhs, dtype=np.int64)
    cdef Py_ssize_t n = Gv.shape[0], i, j, ii
    cdef int64_t acc, diff
    out = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] y = out
    with nogil:
        for ii in range(n):
            i = ii if lower else n - 1 - ii
            acc = 0
            if lower:
                for j in range(0, i):
                    acc = _overflow(acc + _reduce(Gv[i, j] * y[j], frac_bits, word_bits,
                                                  round_even, saturate),
                                    word_bits, saturate)
            else:
                for j in range(i + 1, n):
                    acc = _overflow(acc + _reduce(Gv[j, i] * y[j], frac_bits, word_bits,
                                                  round_even, saturate),
                                    word_bits, saturate)
            diff = _overflow(bv[i] - acc, word_bits, saturate)
            y[i] = _reduce(diff * rv[i], frac_bits, word_bits, round_even, saturate)
    return out


def cholesky(S):
    cdef double[:, ::1] Sv = np.ascontiguousarray(S, dtype=np.float64)
    cdef Py_ssize_t n = Sv.shape[0], i, j, k
    cdef double d, acc
    cdef Py_ssize_t bad = -1
    G = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] Gv = G
    with nogil:
        for j in range(n):
            d = Sv[j, j]
            for k in range(j):
                d = d - Gv[j, k] * Gv[j, k]
            if not d > 0.0:
                bad = j
                break
            Gv[j, j] = sqrt(d)
            for i in range(j + 1, n):
                acc = Sv[i, j]
                for k in range(j):
                    acc = acc - Gv[i, k] * Gv[j, k]
                Gv[i, j] = acc / Gv[j, j]
    return G, bad


def trisolve(G, rhs, bint lower):
    cdef double[:, ::1] Gv = np.ascontiguousarray(G, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t n = Gv.shape[0], i, j, ii
    cdef double acc
    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] y = out
    with nogil:
        if lower:
            for i in range(n):
                acc = bv[i]
                for j in range(i):
                    acc = acc - Gv[i, j] * y[j]
                y[i] = acc / Gv[i, i]
        else:
            # column-oriented back substitution keeps the inner loop contiguous
            for i in range(n):
                y[i] = bv[i]
            for ii in range(n):
                i = n - 1 - ii
                y[i] = y[i] / Gv[i, i]
                for j in range(i):
                    y[j] = y[j] - Gv[i, j] * y[i]
    return out


def jacobi_eigvals(S, int max_sweeps=60):
    from ._kernels_py import round_robin_pairs

    cdef double[:, ::1] A
    cdef Py_ssize_t[:, :, ::1] sched
    cdef double[:, ::1] cs
    cdef Py_ssize_t[::1] act
    cdef Py_ssize_t n, nrounds, half, r, k, p, q, j, nact
    cdef double eps, floor, apq, app, aqq, theta, t, c, s, a, b
    cdef int sweeps = 0
    cdef bint rotated

    A_arr = np.array(S, dtype=np.float64, copy=True, order="C")
    A = A_arr
    n = A.shape[0]
    if n == 1:
        return A_arr.diagonal().copy(), 0
    rounds = round_robin_pairs(n)
    nrounds = len(rounds)
    half = n // 2
    sched_arr = np.full((nrounds, half, 2), -1, dtype=np.intp)
    for ri, pairs in enumerate(rounds):
        for ki, pq in enumerate(pairs):
            sched_arr[ri, ki, 0] = pq[0]
            sched_arr[ri, ki, 1] = pq[1]
    sched = sched_arr
    cs_arr = np.zeros((half, 2), dtype=np.float64)
    cs = cs_arr
    act_arr = np.zeros(half, dtype=np.intp)
    act = act_arr
    eps = np.finfo(np.float64).eps
    floor = 2.0 ** -60 * np.sqrt((A_arr * A_arr).sum())
    with nogil:
        while sweeps < max_sweeps:
            rotated = False
            for r in range(nrounds):
                nact = 0
                for k in range(half):
                    p = sched[r, k, 0]
                    q = sched[r, k, 1]
                    if p < 0:
                        continue
                    apq = A[p, q]
                    app = A[p, p]
                    aqq = A[q, q]
                    if fabs(apq) > floor and fabs(apq) > eps * sqrt(fabs(app * aqq)):
                        theta = (aqq - app) / (2.0 * apq)
                        if theta >= 0.0:
                            t = 1.0 / (fabs(theta) + sqrt(1.0 + theta * theta))
                        else:
                            t = -1.0 / (fabs(theta) + sqrt(1.0 + theta * theta))
                        c = 1.0 / sqrt(1.0 + t * t)
                        cs[nact, 0] = c
                        cs[nact, 1] = t * c
                        act[nact] = k
                        nact += 1
                if nact == 0:
                    continue
                rotated = True
                for k in range(nact):
                    p = sched[r, act[k], 0]
                    q = sched[r, act[k], 1]
                    c = cs[k, 0]
                    s = cs[k, 1]
                    for j in range(n):
                        a = A[p, j]
                        b = A[q, j]
                        A[p, j] = c * a - s * b
                        A[q, j] = s * a + c * b
                for k in range(nact):
                    p = sched[r, act[k], 0]
                    q = sched[r, act[k], 1]
                    c = cs[k, 0]
                    s = cs[k, 1]
                    for j in range(n):
                        a = A[j, p]
                        b = A[j, q]
                        A[j, p] = a * c - b * s
                        A[j, q] = a * s + b * c
                for k in range(nact):
                    p = sched[r, act[k], 0]
                    q = sched[r, act[k], 1]
                    A[p, q] = 0.0
                    A[q, p] = 0.0
            sweeps += 1
            if not rotated:
                break
    return A_arr.diagonal().copy(), sweeps
