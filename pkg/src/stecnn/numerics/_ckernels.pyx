# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled dilated conv1d kernels.

Same contract as ``_kernels_py``: im2col into a (C*K, B*L) buffer followed by
one BLAS gemm per pass. Reduction order inside one output element is fixed by
the gemm call, so results are deterministic for a given input.
"""
import numpy as np
from cython cimport floating
from scipy.linalg.cython_blas cimport sgemm, dgemm


cdef inline void _gemm(char ta, char tb, int m, int n, int k, floating alpha,
                       floating *a, int lda, floating *b, int ldb,
                       floating beta, floating *c, int ldc) noexcept nogil:
    # column-major gemm, dispatched on the fused type
    if floating is float:
        sgemm(&ta, &tb, &m, &n, &k, &alpha, a, &lda, b, &ldb, &beta, c, &ldc)
    else:
        dgemm(&ta, &tb, &m, &n, &k, &alpha, a, &lda, b, &ldb, &beta, c, &ldc)


cdef void _im2col(const floating[:, :, ::1] x, floating[:, ::1] cols,
                  Py_ssize_t K, Py_ssize_t dilation, bint circular) noexcept nogil:
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], L = x.shape[2]
    cdef Py_ssize_t b, c, k, u, s, row, base
    for c in range(C):
        for k in range(K):
            row = c * K + k
            s = k * dilation
            if circular:
                s = s % L
            for b in range(B):
                base = b * L
                if circular:
                    for u in range(L - s):
                        cols[row, base + u] = x[b, c, u + s]
                    for u in range(L - s, L):
                        cols[row, base + u] = x[b, c, u + s - L]
                else:
                    for u in range(L):
                        cols[row, base + u] = x[b, c, u + s] if u + s < L else 0


cdef void _col2im(const floating[:, ::1] cols, floating[:, :, ::1] gx,
                  Py_ssize_t K, Py_ssize_t dilation, bint circular) noexcept nogil:
    cdef Py_ssize_t B = gx.shape[0], C = gx.shape[1], L = gx.shape[2]
    cdef Py_ssize_t b, c, k, u, s, row, base
    for b in range(B):
        base = b * L
        for c in range(C):
            for k in range(K):
                row = c * K + k
                s = k * dilation
                if circular:
                    s = s % L
                    for u in range(L - s):
                        gx[b, c, u + s] += cols[row, base + u]
                    for u in range(L - s, L):
                        gx[b, c, u + s - L] += cols[row, base + u]
                else:
                    for u in range(L - s if s < L else 0):
                        gx[b, c, u + s] += cols[row, base + u]


def conv1d_forward(const floating[:, :, ::1] x, const floating[:, :, ::1] w,
                   Py_ssize_t dilation, bint circular):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], L = x.shape[2]
    cdef Py_ssize_t O = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t b, o, u
    dtype = np.float32 if floating is float else np.float64
    cols_arr = np.empty((C * K, B * L), dtype=dtype)
    yt_arr = np.empty((O, B * L), dtype=dtype)
    out = np.empty((B, O, L), dtype=dtype)
    cdef floating[:, ::1] cols = cols_arr
    cdef floating[:, ::1] yt = yt_arr
    cdef floating[:, :, ::1] y = out
    cdef int n = <int>(B * L), m = <int>O, kk = <int>(C * K)
    with nogil:
        _im2col(x, cols, K, dilation, circular)
        # yt (O x BL) = w (O x CK) @ cols (CK x BL), row-major
        _gemm(c'N', c'N', n, m, kk, 1, &cols[0, 0], n, <floating *>&w[0, 0, 0], kk, 0, &yt[0, 0], n)
        for b in range(B):
            for o in range(O):
                for u in range(L):
                    y[b, o, u] = yt[o, b * L + u]
    return out


def conv1d_backward(const floating[:, :, ::1] x, const floating[:, :, ::1] w,
                    const floating[:, :, ::1] gy, Py_ssize_t dilation, bint circular):
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], L = x.shape[2]
    cdef Py_ssize_t O = w.shape[0], K = w.shape[2]
    cdef Py_ssize_t b, o, u
    dtype = np.float32 if floating is float else np.float64
    cols_arr = np.empty((C * K, B * L), dtype=dtype)
    gcols_arr = np.empty((C * K, B * L), dtype=dtype)
    gt_arr = np.empty((O, B * L), dtype=dtype)
    gx_arr = np.zeros((B, C, L), dtype=dtype)
    gw_arr = np.empty((O, C, K), dtype=dtype)
    cdef floating[:, ::1] cols = cols_arr
    cdef floating[:, ::1] gcols = gcols_arr
    cdef floating[:, ::1] gt = gt_arr
    cdef floating[:, :, ::1] gx = gx_arr
    cdef floating[:, :, ::1] gw = gw_arr
    cdef int n = <int>(B * L), m = <int>O, kk = <int>(C * K)
    with nogil:
        _im2col(x, cols, K, dilation, circular)
        for b in range(B):
            for o in range(O):
                for u in range(L):
                    gt[o, b * L + u] = gy[b, o, u]
        # gw (O x CK) = gt (O x BL) @ cols^T (BL x CK)
        _gemm(c'T', c'N', kk, m, n, 1, &cols[0, 0], n, &gt[0, 0], n, 0, &gw[0, 0, 0], kk)
        # gcols (CK x BL) = w^T (CK x O) @ gt (O x BL)
        _gemm(c'N', c'T', n, kk, m, 1, &gt[0, 0], n, <floating *>&w[0, 0, 0], kk, 0, &gcols[0, 0], n)
        _col2im(gcols, gx, K, dilation, circular)
    return gx_arr, gw_arr
