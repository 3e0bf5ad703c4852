# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scan kernels. Semantics match ``_pure`` operation for operation."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def as_path(p, double s, double lam):
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0], k
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double c = s / (1.0 - lam)
    cdef long R = 0, A = 0
    with nogil:
        for k in range(n):
            if pv[k] <= s:
                R += 1
            if pv[k] > lam:
                A += 1
            ov[k] = c * (1.0 + A) / (R if R > 1 else 1)
    return out


def at_path(h):
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef Py_ssize_t n = hv.shape[0], k
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double acc = 0.0
    with nogil:
        for k in range(n):
            acc += hv[k]
            ov[k] = acc / <double>(k + 1)
    return out


def stop_index(path, double q_eff):
    cdef const double[::1] pv = np.ascontiguousarray(path, dtype=np.float64)
    cdef Py_ssize_t k = pv.shape[0]
    with nogil:
        while k > 0 and not (pv[k - 1] <= q_eff):
            k -= 1
    return int(k)


def as_batch(P, null, double s, double lam, double q_eff):
    cdef const double[:, ::1] pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] nv = np.ascontiguousarray(null, dtype=np.uint8)
    cdef Py_ssize_t reps = pv.shape[0], n = pv.shape[1], r, k
    k_out = np.zeros(reps, dtype=np.int64)
    rej_out = np.zeros(reps, dtype=np.int64)
    false_out = np.zeros(reps, dtype=np.int64)
    cdef cnp.int64_t[::1] kv = k_out, rv = rej_out, fv = false_out
    cdef double c = s / (1.0 - lam), x
    cdef long R, A, V
    with nogil:
        for r in range(reps):
            R = 0
            A = 0
            V = 0
            for k in range(n):
                x = pv[r, k]
                if x <= s:
                    R += 1
                    if nv[r, k]:
                        V += 1
                if x > lam:
                    A += 1
                if c * (1.0 + A) / (R if R > 1 else 1) <= q_eff:
                    kv[r] = k + 1
                    rv[r] = R
                    fv[r] = V
    return k_out, rej_out, false_out


def at_batch(H, null, double q_eff):
    cdef const double[:, ::1] hv = np.ascontiguousarray(H, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] nv = np.ascontiguousarray(null, dtype=np.uint8)
    cdef Py_ssize_t reps = hv.shape[0], n = hv.shape[1], r, k
    k_out = np.zeros(reps, dtype=np.int64)
    false_out = np.zeros(reps, dtype=np.int64)
    cdef cnp.int64_t[::1] kv = k_out, fv = false_out
    cdef double acc
    cdef long V
    with nogil:
        for r in range(reps):
            acc = 0.0
            V = 0
            for k in range(n):
                acc += hv[r, k]
                if nv[r, k]:
                    V += 1
                if acc / <double>(k + 1) <= q_eff:
                    kv[r] = k + 1
                    fv[r] = V
    return k_out, k_out.copy(), false_out
