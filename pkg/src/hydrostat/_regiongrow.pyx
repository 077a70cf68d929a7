# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled region growing over level-line angles; mirrors _regiongrow_py."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, atan2, fabs, M_PI

cnp.import_array()


def region_grow(angle, valid, cnp.int64_t[::1] order, double tol):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] a_arr = np.ascontiguousarray(angle, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2, mode="c"] v_arr = np.ascontiguousarray(valid, dtype=np.uint8)
    cdef Py_ssize_t h = a_arr.shape[0], w = a_arr.shape[1]
    cdef double[::1] ang = a_arr.ravel()
    cdef cnp.uint8_t[::1] ok = v_arr.ravel()
    labels_arr = np.full(h * w, -1, dtype=np.int32)
    cdef int[::1] labels = labels_arr
    members_arr = np.empty(h * w, dtype=np.int64)
    cdef cnp.int64_t[::1] members = members_arr
    cdef Py_ssize_t k, i, n_mem, p, q, r, c, rr, cc
    cdef int dr, dc, lab, n_regions = 0
    cdef cnp.int64_t seed
    cdef double sx, sy, reg_angle, d, two_pi = 2.0 * M_PI

    for k in range(order.shape[0]):
        seed = order[k]
        if labels[seed] != -1 or ok[seed] == 0:
            continue
        lab = n_regions
        n_regions += 1
        labels[seed] = lab
        sx = cos(ang[seed])
        sy = sin(ang[seed])
        reg_angle = ang[seed]
        members[0] = seed
        n_mem = 1
        i = 0
        while i < n_mem:
            p = members[i]
            i += 1
            r = p // w
            c = p - r * w
            for dr in range(-1, 2):
                rr = r + dr
                if rr < 0 or rr >= h:
                    continue
                for dc in range(-1, 2):
                    cc = c + dc
                    if cc < 0 or cc >= w or (dr == 0 and dc == 0):
                        continue
                    q = rr * w + cc
                    if labels[q] != -1 or ok[q] == 0:
                        continue
                    d = ang[q] - reg_angle
                    while d > M_PI:
                        d -= two_pi
                    while d < -M_PI:
                        d += two_pi
                    if fabs(d) <= tol:
                        labels[q] = lab
                        members[n_mem] = q
                        n_mem += 1
                        sx += cos(ang[q])
                        sy += sin(ang[q])
                        reg_angle = atan2(sy, sx)
    return labels_arr.reshape(h, w), n_regions
