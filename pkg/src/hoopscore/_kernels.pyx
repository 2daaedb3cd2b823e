# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the pooling and mixture-encoding kernels.

Same contracts as ``_kernels_py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, M_PI

cnp.import_array()


def window_halves_max(x, Py_ssize_t segment_length, Py_ssize_t stride):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n_frames = xv.shape[0]
    cdef Py_ssize_t n_channels = xv.shape[1]
    cdef Py_ssize_t half = segment_length // 2
    cdef Py_ssize_t n = 0
    if n_frames >= segment_length:
        n = (n_frames - segment_length) // stride + 1
    out = np.empty((n, 2 * n_channels), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, c, h, f, start
    cdef double m, v
    for i in range(n):
        start = i * stride
        for c in range(n_channels):
            for h in range(2):
                m = xv[start + h * half, c]
                for f in range(start + h * half + 1, start + (h + 1) * half):
                    v = xv[f, c]
                    if v > m:
                        m = v
                ov[i, 2 * c + h] = m
    return out


def window_mean(x, Py_ssize_t segment_length, Py_ssize_t stride):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n_frames = xv.shape[0]
    cdef Py_ssize_t n = 0
    if n_frames >= segment_length:
        n = (n_frames - segment_length) // stride + 1
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, f
    cdef double acc
    for i in range(n):
        acc = 0.0
        for f in range(i * stride, i * stride + segment_length):
            acc += xv[f]
        ov[i] = acc / segment_length
    return out


def encode_batch(b, means, variances, active):
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef cnp.int64_t[::1] act = np.ascontiguousarray(active, dtype=np.int64)
    cdef Py_ssize_t n = bv.shape[0]
    cdef Py_ssize_t dim = bv.shape[1]
    cdef Py_ssize_t n_active = act.shape[0]
    cdef double[:, ::1] mu = np.ascontiguousarray(np.asarray(means)[active], dtype=np.float64)
    cdef double[:, ::1] var = np.ascontiguousarray(np.asarray(variances)[active], dtype=np.float64)
    lognorm_arr = np.log(2.0 * M_PI * np.asarray(var))
    cdef double[:, ::1] lognorm = lognorm_arr
    phi = np.zeros((n, np.asarray(means).shape[0]), dtype=np.float64)
    cdef double[:, ::1] pv = phi
    logp_arr = np.empty(n_active, dtype=np.float64)
    cdef double[::1] logp = logp_arr
    cdef Py_ssize_t i, k, d
    cdef double acc, diff, top, total
    for i in range(n):
        top = -1e308
        for k in range(n_active):
            acc = 0.0
            for d in range(dim):
                diff = bv[i, d] - mu[k, d]
                acc += lognorm[k, d] + diff * diff / var[k, d]
            acc = -0.5 * acc
            logp[k] = acc
            if acc > top:
                top = acc
        total = 0.0
        for k in range(n_active):
            logp[k] = exp(logp[k] - top)
            total += logp[k]
        for k in range(n_active):
            pv[i, act[k]] = logp[k] / total
    return phi
