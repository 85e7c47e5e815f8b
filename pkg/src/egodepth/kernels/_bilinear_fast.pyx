# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled bilinear sampling kernel; semantics match _bilinear_np exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def bilinear_sample_grad(source, u, v):
    """Sample `source` (H, W, C) at (u, v), each (N,); see the numpy twin."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] src = np.ascontiguousarray(
        source, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] uu = np.ascontiguousarray(
        np.asarray(u, dtype=np.float64).ravel())
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vv = np.ascontiguousarray(
        np.asarray(v, dtype=np.float64).ravel())

    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef Py_ssize_t c = src.shape[2]
    cdef Py_ssize_t n = uu.shape[0]

    cdef cnp.ndarray[cnp.float64_t, ndim=2] values = np.zeros((n, c))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dval_du = np.zeros((n, c))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] dval_dv = np.zeros((n, c))

    cdef Py_ssize_t p, k, i0, j0
    cdef double cu, cv, fu, fv, s00, s01, s10, s11

    for p in range(n):
        cu = uu[p]
        cv = vv[p]
        if cu < 0.0 or cu > w - 1.0 or cv < 0.0 or cv > h - 1.0:
            continue
        i0 = <Py_ssize_t>cu
        j0 = <Py_ssize_t>cv
        # integer coordinate: step back to the left/lower cell
        if cu == i0 and i0 >= 1:
            i0 -= 1
        if cv == j0 and j0 >= 1:
            j0 -= 1
        fu = cu - i0
        fv = cv - j0
        for k in range(c):
            s00 = src[j0, i0, k]
            s01 = src[j0, i0 + 1, k]
            s10 = src[j0 + 1, i0, k]
            s11 = src[j0 + 1, i0 + 1, k]
            values[p, k] = (1.0 - fv) * ((1.0 - fu) * s00 + fu * s01) \
                + fv * ((1.0 - fu) * s10 + fu * s11)
            dval_du[p, k] = (1.0 - fv) * (s01 - s00) + fv * (s11 - s10)
            dval_dv[p, k] = (1.0 - fu) * (s10 - s00) + fu * (s11 - s01)

    return values, dval_du, dval_dv
