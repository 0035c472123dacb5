"""Compiled decode kernels: erasure-aware squared distances and batched
nearest-prototype decisions. API mirrors ``_kernels_py``."""

import numpy as np

STATUS_EXACT = 0
STATUS_CORRECTED = 1
STATUS_UNCORRECTABLE = 2
STATUS_AMBIGUOUS = 3


def distance_matrix(const double[:, ::1] values, const unsigned char[:, ::1] erased,
                    const double[:, ::1] prototypes):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t d = values.shape[1]
    cdef Py_ssize_t k = prototypes.shape[0]
    out = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, c
    cdef double acc, diff
    for i in range(n):
        for j in range(k):
            acc = 0.0
            for c in range(d):
                if erased[i, c] == 0:
                    diff = values[i, c] - prototypes[j, c]
                    acc += diff * diff
            o[i, j] = acc
    return out


def decode_batch(const double[:, ::1] values, const unsigned char[:, ::1] erased,
                 const double[:, ::1] prototypes, double radius):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t d = values.shape[1]
    cdef Py_ssize_t k = prototypes.shape[0]
    idx_arr = np.empty(n, dtype=np.int64)
    dist_arr = np.empty(n, dtype=np.float64)
    status_arr = np.empty(n, dtype=np.uint8)
    cdef long long[::1] idx = idx_arr
    cdef double[::1] dist = dist_arr
    cdef unsigned char[::1] status = status_arr
    cdef Py_ssize_t i, j, c, best_j, tie_count
    cdef double acc, diff, best
    for i in range(n):
        best = -1.0
        best_j = 0
        tie_count = 1
        for j in range(k):
            acc = 0.0
            for c in range(d):
                if erased[i, c] == 0:
                    diff = values[i, c] - prototypes[j, c]
                    acc += diff * diff
            if best < 0.0 or acc < best:
                best = acc
                best_j = j
                tie_count = 1
            elif acc == best:
                tie_count += 1
        idx[i] = best_j
        dist[i] = best
        if best > radius:
            status[i] = STATUS_UNCORRECTABLE
        elif tie_count > 1:
            status[i] = STATUS_AMBIGUOUS
        elif best == 0.0:
            status[i] = STATUS_EXACT
        else:
            status[i] = STATUS_CORRECTED
    return idx_arr, dist_arr, status_arr
