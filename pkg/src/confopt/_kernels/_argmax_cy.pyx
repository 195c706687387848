# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend.

Hot loops for weighted-argmax prediction and confusion accumulation. Ties in
the argmax go to the larger class index, matching the numpy backend.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def weighted_argmax_batch(const double[:, ::1] eta, const double[:, ::1] gain):
    cdef Py_ssize_t m = eta.shape[0]
    cdef Py_ssize_t n = eta.shape[1]
    preds_arr = np.empty(m, dtype=np.int64)
    cdef long long[::1] preds = preds_arr
    cdef Py_ssize_t x, i, y, best
    cdef double s, sbest
    with nogil:
        for x in range(m):
            best = 0
            sbest = 0.0
            for y in range(n):
                s = 0.0
                for i in range(n):
                    s += eta[x, i] * gain[i, y]
                if y == 0 or s >= sbest:
                    sbest = s
                    best = y
            preds[x] = best
    return preds_arr


def per_gain_confusions(const double[:, ::1] eta, const long long[::1] label_idx,
                        const double[:, :, ::1] gains):
    cdef Py_ssize_t m = eta.shape[0]
    cdef Py_ssize_t n = eta.shape[1]
    cdef Py_ssize_t t_total = gains.shape[0]
    out_arr = np.zeros((t_total, n, n), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t t, x, i, y, best
    cdef double s, sbest, inv_m
    inv_m = 1.0 / m
    with nogil:
        for t in range(t_total):
            for x in range(m):
                best = 0
                sbest = 0.0
                for y in range(n):
                    s = 0.0
                    for i in range(n):
                        s += eta[x, i] * gains[t, i, y]
                    if y == 0 or s >= sbest:
                        sbest = s
                        best = y
                out[t, label_idx[x], best] += inv_m
    return out_arr


def mixture_predictions(const double[:, ::1] eta, const double[:, :, ::1] gains,
                        const double[::1] weights):
    cdef Py_ssize_t m = eta.shape[0]
    cdef Py_ssize_t n = eta.shape[1]
    cdef Py_ssize_t t_total = gains.shape[0]
    out_arr = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t t, x, i, y, best
    cdef double s, sbest
    with nogil:
        for t in range(t_total):
            for x in range(m):
                best = 0
                sbest = 0.0
                for y in range(n):
                    s = 0.0
                    for i in range(n):
                        s += eta[x, i] * gains[t, i, y]
                    if y == 0 or s >= sbest:
                        sbest = s
                        best = y
                out[x, best] += weights[t]
    return out_arr
