# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled encoder hot-path kernels: BLAS matmuls plus single-pass
elementwise forward/backward loops. Mirrors numpy_backend exactly."""

from libc.math cimport exp, log, sqrt

import numpy as np

from scipy.linalg.cython_blas cimport dgemm

name = "cython"


cdef void _gemm_rowmajor(bint trans_a, bint trans_b,
                         double[:, ::1] a, double[:, ::1] b,
                         double[:, ::1] c) noexcept nogil:
    # Row-major C = opA(A) @ opB(B) via column-major dgemm on the transposed
    # problem: colmajor(C^T) = opB(B)^T @ opA(A)^T, and a row-major array is
    # its own transpose in column-major view.
    cdef int m = c.shape[0]
    cdef int n = c.shape[1]
    cdef int k = a.shape[0] if trans_a else a.shape[1]
    cdef char ta = c'T' if trans_b else c'N'
    cdef char tb = c'T' if trans_a else c'N'
    cdef int lda = b.shape[1]
    cdef int ldb = a.shape[1]
    cdef int ldc = n
    cdef double one = 1.0, zero = 0.0
    if m == 0 or n == 0:
        return
    dgemm(&ta, &tb, &n, &m, &k, &one,
          &b[0, 0], &lda, &a[0, 0], &ldb, &zero, &c[0, 0], &ldc)


def matmul_fwd(double[:, ::1] a, double[:, ::1] b):
    out = np.empty((a.shape[0], b.shape[1]), dtype=np.float64)
    cdef double[:, ::1] c = out
    _gemm_rowmajor(False, False, a, b, c)
    return out


def matmul_bwd(double[:, ::1] g, double[:, ::1] a, double[:, ::1] b):
    ga = np.empty((a.shape[0], a.shape[1]), dtype=np.float64)
    gb = np.empty((b.shape[0], b.shape[1]), dtype=np.float64)
    cdef double[:, ::1] mga = ga
    cdef double[:, ::1] mgb = gb
    _gemm_rowmajor(False, True, g, b, mga)   # ga = g @ b.T
    _gemm_rowmajor(True, False, a, g, mgb)   # gb = a.T @ g
    return ga, gb


def dense_fwd(double[:, ::1] x, double[:, ::1] w, double[::1] b, bint activate):
    out = np.empty((x.shape[0], w.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double v
    _gemm_rowmajor(False, False, x, w, o)
    for i in range(o.shape[0]):
        for j in range(o.shape[1]):
            v = o[i, j] + b[j]
            if activate and v <= 0.0 and v == v:
                v = 0.0
            o[i, j] = v
    return out


def dense_bwd(double[:, ::1] g, double[:, ::1] x, double[:, ::1] w,
              double[:, ::1] out, bint activate):
    gm_arr = np.empty((g.shape[0], g.shape[1]), dtype=np.float64)
    gb = np.zeros(g.shape[1], dtype=np.float64)
    cdef double[:, ::1] gm = gm_arr
    cdef double[::1] mgb = gb
    cdef Py_ssize_t i, j
    cdef double v
    for i in range(g.shape[0]):
        for j in range(g.shape[1]):
            # branchless mask: (out > 0) as 0.0/1.0 multiplier
            v = g[i, j] * (<double> (out[i, j] > 0.0)) if activate else g[i, j]
            gm[i, j] = v
            mgb[j] += v
    gx = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    gw = np.empty((w.shape[0], w.shape[1]), dtype=np.float64)
    cdef double[:, ::1] mgx = gx
    cdef double[:, ::1] mgw = gw
    _gemm_rowmajor(False, True, gm, w, mgx)
    _gemm_rowmajor(True, False, x, gm, mgw)
    return gx, gw, gb


def relu_fwd(double[:, ::1] x):
    out = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            if x[i, j] > 0.0:
                o[i, j] = x[i, j]
            elif x[i, j] == x[i, j]:
                o[i, j] = 0.0
            else:
                o[i, j] = x[i, j]  # NaN propagates, matching np.maximum
    return out


def relu_bwd(double[:, ::1] g, double[:, ::1] x):
    out = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            o[i, j] = g[i, j] if x[i, j] > 0.0 else 0.0
    return out


def l2norm_fwd(double[:, ::1] x):
    z = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    norms = np.empty(x.shape[0], dtype=np.float64)
    cdef double[:, ::1] mz = z
    cdef double[::1] mn = norms
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(x.shape[0]):
        acc = 0.0
        for j in range(x.shape[1]):
            acc += x[i, j] * x[i, j]
        acc = sqrt(acc)
        mn[i] = acc
        for j in range(x.shape[1]):
            mz[i, j] = x[i, j] / acc
    return z, norms


def l2norm_bwd(double[:, ::1] g, double[:, ::1] z, double[::1] norms):
    out = np.empty((z.shape[0], z.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double radial
    for i in range(z.shape[0]):
        radial = 0.0
        for j in range(z.shape[1]):
            radial += g[i, j] * z[i, j]
        for j in range(z.shape[1]):
            o[i, j] = (g[i, j] - radial * z[i, j]) / norms[i]
    return out


def logsumexp_fwd(double[:, ::1] x):
    out = np.empty(x.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j
    cdef double m, acc
    for i in range(x.shape[0]):
        m = x[i, 0]
        for j in range(1, x.shape[1]):
            if x[i, j] > m:
                m = x[i, j]
        acc = 0.0
        for j in range(x.shape[1]):
            acc += exp(x[i, j] - m)
        o[i] = m + log(acc)
    return out


def logsumexp_bwd(double[::1] g, double[:, ::1] x, double[::1] lse):
    out = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            o[i, j] = g[i] * exp(x[i, j] - lse[i])
    return out
