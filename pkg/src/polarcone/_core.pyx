# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: weighted pool-adjacent-violators and per-cell PSD projection.

The pure-python twins live in ``polarcone._core_py``; ``polarcone.backend``
selects whichever imports.  Both keep identical arithmetic (cross-multiplied
mean comparisons, branch-for-branch the same projection formulas, no FMA)
so their outputs agree bitwise.
"""

from libc.math cimport sqrt

import numpy as np


cdef Py_ssize_t _pool(const double[::1] y, const double[::1] w, const double[::1] v,
                      bint lex, double[::1] sw, double[::1] swy, double[::1] swv,
                      Py_ssize_t[::1] end) nogil:
    # Stack-based PAV.  Blocks merge on a strict violation of pooled means;
    # in lex mode, ties in pooled position merge when the pooled direction
    # (velocity) still violates, which is the right-limit block structure.
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t i, nb = 0
    cdef double la, lb
    cdef bint merge
    for i in range(n):
        sw[nb] = w[i]
        swy[nb] = w[i] * y[i]
        if lex:
            swv[nb] = w[i] * v[i]
        end[nb] = i
        nb += 1
        while nb >= 2:
            # compare pooled means without dividing: swy/sw ordering
            la = swy[nb - 2] * sw[nb - 1]
            lb = swy[nb - 1] * sw[nb - 2]
            if la > lb:
                merge = True
            elif lex and la == lb:
                merge = swv[nb - 2] * sw[nb - 1] > swv[nb - 1] * sw[nb - 2]
            else:
                merge = False
            if not merge:
                break
            sw[nb - 2] += sw[nb - 1]
            swy[nb - 2] += swy[nb - 1]
            if lex:
                swv[nb - 2] += swv[nb - 1]
            end[nb - 2] = end[nb - 1]
            nb -= 1
    return nb


cdef void _expand(const double[::1] y, const double[::1] v, bint lex,
                  const double[::1] sw, const double[::1] swy, const double[::1] swv,
                  const Py_ssize_t[::1] end, Py_ssize_t nb,
                  double[::1] x, double[::1] vbar, long long[::1] block) nogil:
    cdef Py_ssize_t b, i, i0 = 0, i1
    cdef double c, cv
    cdef double prev = 0.0
    for b in range(nb):
        i1 = end[b]
        if i1 == i0:
            c = y[i0]          # singletons keep their input bitwise
            cv = v[i0] if lex else 0.0
        else:
            c = swy[b] / sw[b]
            cv = swv[b] / sw[b] if lex else 0.0
        if b > 0 and c < prev:
            c = prev           # clamp sub-ulp inversions from independent divisions
        for i in range(i0, i1 + 1):
            x[i] = c
            block[i] = b
            if lex:
                vbar[i] = cv
        prev = c
        i0 = i1 + 1


def pava(y, w):
    """Weighted isotonic fit of ``y``.

    Returns ``(x, block)`` where ``x`` minimizes sum w_i (x_i - y_i)^2 over
    nondecreasing sequences and ``block[i]`` is the pooled-block index of
    entry ``i``.  Adjacent blocks merge only on a strict mean violation, so
    blocks with equal pooled values stay separate.
    """
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0]
    if wv.shape[0] != n:
        raise ValueError("length mismatch")
    x = np.empty(n, dtype=np.float64)
    block = np.empty(n, dtype=np.int64)
    sw = np.empty(n, dtype=np.float64)
    swy = np.empty(n, dtype=np.float64)
    end = np.empty(n, dtype=np.intp)
    cdef double[::1] xv = x
    cdef long long[::1] bv = block
    cdef double[::1] swv_ = sw
    cdef double[::1] swyv = swy
    cdef Py_ssize_t[::1] endv = end
    cdef Py_ssize_t nb
    with nogil:
        nb = _pool(yv, wv, yv, False, swv_, swyv, swv_, endv)
        _expand(yv, yv, False, swv_, swyv, swv_, endv, nb, xv, xv, bv)
    return x, block


def pava_lex(y, v, w):
    """Isotonic fit of ``y`` with ties broken by the direction ``v``.

    Pools exactly the blocks of ``pava(y + eps*v, w)`` for infinitesimal
    positive ``eps``.  Returns ``(x, vbar, block)`` where ``vbar`` holds the
    pooled weighted mean of ``v`` on each block.
    """
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0]
    if vv.shape[0] != n or wv.shape[0] != n:
        raise ValueError("length mismatch")
    x = np.empty(n, dtype=np.float64)
    vbar = np.empty(n, dtype=np.float64)
    block = np.empty(n, dtype=np.int64)
    sw = np.empty(n, dtype=np.float64)
    swy = np.empty(n, dtype=np.float64)
    swvd = np.empty(n, dtype=np.float64)
    end = np.empty(n, dtype=np.intp)
    cdef double[::1] xv = x
    cdef double[::1] vbv = vbar
    cdef long long[::1] bv = block
    cdef double[::1] swv_ = sw
    cdef double[::1] swyv = swy
    cdef double[::1] swvv = swvd
    cdef Py_ssize_t[::1] endv = end
    cdef Py_ssize_t nb
    with nogil:
        nb = _pool(yv, wv, vv, True, swv_, swyv, swvv, endv)
        _expand(yv, vv, True, swv_, swyv, swvv, endv, nb, xv, vbv, bv)
    return x, vbar, block


def psd_project_cells(a):
    """Nearest PSD matrix, cell by cell, in the Frobenius norm.

    ``a`` has shape (m, d, d) with symmetric cells and d in (1, 2); the d=3
    path lives in the pure backend.  Eigenvalues are clipped at zero.
    """
    cdef const double[:, :, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef Py_ssize_t m = av.shape[0]
    cdef Py_ssize_t d = av.shape[1]
    if av.shape[2] != d:
        raise ValueError("cells must be square matrices")
    out = np.empty((m, d, d), dtype=np.float64)
    cdef double[:, :, ::1] ov = out
    cdef Py_ssize_t k
    cdef double p, q, b, mean, diff, r, l1, l2, u0, u1, nrm, s
    if d == 1:
        with nogil:
            for k in range(m):
                p = av[k, 0, 0]
                ov[k, 0, 0] = p if p > 0.0 else 0.0
    elif d == 2:
        with nogil:
            for k in range(m):
                p = av[k, 0, 0]
                q = av[k, 1, 1]
                b = 0.5 * (av[k, 0, 1] + av[k, 1, 0])
                mean = 0.5 * (p + q)
                diff = 0.5 * (p - q)
                r = sqrt(diff * diff + b * b)
                l1 = mean + r
                l2 = mean - r
                if l2 >= 0.0:
                    ov[k, 0, 0] = p
                    ov[k, 0, 1] = b
                    ov[k, 1, 0] = b
                    ov[k, 1, 1] = q
                elif l1 <= 0.0:
                    ov[k, 0, 0] = 0.0
                    ov[k, 0, 1] = 0.0
                    ov[k, 1, 0] = 0.0
                    ov[k, 1, 1] = 0.0
                else:
                    # rank-one part l1 * u u^T, branch picked for stability
                    if diff >= 0.0:
                        u0 = r + diff
                        u1 = b
                    else:
                        u0 = b
                        u1 = r - diff
                    nrm = u0 * u0 + u1 * u1
                    s = l1 / nrm
                    ov[k, 0, 0] = s * u0 * u0
                    ov[k, 0, 1] = s * u0 * u1
                    ov[k, 1, 0] = s * u0 * u1
                    ov[k, 1, 1] = s * u1 * u1
    else:
        raise NotImplementedError("compiled kernel handles d in (1, 2)")
    return out
