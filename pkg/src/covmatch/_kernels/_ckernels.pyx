# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the sampling kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow

cnp.import_array()


def lc_fill(normals, int k):
    cdef const double[:, ::1] a = np.ascontiguousarray(normals, dtype=np.float64)
    cdef Py_ssize_t samples = a.shape[0]
    cdef Py_ssize_t size = 1 << k
    out = np.zeros((samples, size + 1))
    cdef double[:, ::1] p = out
    cdef Py_ssize_t s, level, cells, step, half, j, offset, mid
    cdef double amp
    for s in range(samples):
        offset = 0
        for level in range(1, k + 1):
            cells = 1 << (level - 1)
            step = size // cells
            half = step // 2
            amp = 0.5 * pow(2.0, -(level - 1) / 2.0)
            for j in range(cells):
                mid = j * step + half
                p[s, mid] = 0.5 * (p[s, j * step] + p[s, j * step + step]) + amp * a[s, offset + j]
            offset += cells
    return out


def tail_sup(b, lam):
    cdef const double[:, :, ::1] bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[:, ::1] ll = np.ascontiguousarray(lam, dtype=np.float64)
    cdef Py_ssize_t samples = bb.shape[0], cells = bb.shape[1], nnu = bb.shape[2]
    cdef Py_ssize_t points = ll.shape[1]
    out = np.zeros(samples)
    cdef double[::1] res = out
    cdef Py_ssize_t s, c, g, l
    cdef double acc, best
    if nnu == 0:
        return out
    for s in range(samples):
        best = 0.0
        for c in range(cells):
            for g in range(points):
                acc = 0.0
                for l in range(nnu):
                    acc += bb[s, c, l] * ll[l, g]
                acc = fabs(acc)
                if acc > best:
                    best = acc
        res[s] = best
    return out
