# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Fused cache-scoring kernel.

Computes out[x, a] = sum_c exp(u + v * t) with t = label[c, a] * sim[x, c]
(outside form) or t = sim[x, c] with the label applied as a weight (inside
form), accumulating over cache entries without materializing the
(instances, cache, attributes) temporary the numpy fallback needs.
"""

from libc.math cimport exp

import numpy as np


def cache_scores(double[:, ::1] sim, double[:, ::1] labels, double u,
                 double v, bint label_as_weight):
    cdef Py_ssize_t n = sim.shape[0]
    cdef Py_ssize_t n_cache = sim.shape[1]
    cdef Py_ssize_t n_attrs = labels.shape[1]
    if labels.shape[0] != n_cache:
        raise ValueError("labels rows must match sim columns")

    out_arr = np.zeros((n, n_attrs), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t x, c, a
    cdef double s, e

    for x in range(n):
        for c in range(n_cache):
            s = sim[x, c]
            if label_as_weight:
                e = exp(u + v * s)
                for a in range(n_attrs):
                    out[x, a] += labels[c, a] * e
            else:
                for a in range(n_attrs):
                    out[x, a] += exp(u + v * (labels[c, a] * s))
    return out_arr
