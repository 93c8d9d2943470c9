# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops; ``_pykernels`` holds the numpy twins."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, sqrt, fabs

cnp.import_array()


def drift_tables(const double[::1] r, const double[::1] c,
                 const double[::1] R, const double[::1] d, double delta):
    cdef Py_ssize_t nr = r.shape[0], nR = R.shape[0]
    cdef Py_ssize_t i, j, l, n_near = 0
    cdef double acc, rr, PP, diff, scale, coef, w
    k_arr = np.zeros(nr)
    g_arr = np.zeros(nR)
    u_arr = np.zeros(nR)
    A_arr = np.zeros(nr)
    B_arr = np.zeros(nR)
    cdef double[::1] k = k_arr, g = g_arr, u = u_arr, A = A_arr, B = B_arr

    for i in range(nr):
        acc = 0.0
        rr = r[i]
        for j in range(nR):
            acc += d[j] * R[j] / (R[j] + rr)
        k[i] = acc
    for j in range(nR):
        acc = 0.0
        PP = R[j]
        for i in range(nr):
            acc += c[i] / (r[i] * (PP + r[i]))
        g[j] = acc
    for j in range(nR):
        acc = 0.0
        PP = R[j]
        for l in range(nR):
            acc += d[l] * R[l] * PP / (PP + R[l]) * (g[j] + g[l])
        u[j] = acc

    # first pass: count near-diagonal pairs
    for j in range(nR):
        for i in range(nr):
            diff = R[j] - r[i]
            scale = R[j] if R[j] > r[i] else r[i]
            if fabs(diff) < delta * scale:
                n_near += 1
    near_j_arr = np.empty(n_near, dtype=np.intp)
    near_i_arr = np.empty(n_near, dtype=np.intp)
    near_c_arr = np.empty(n_near)
    cdef Py_ssize_t[::1] near_j = near_j_arr, near_i = near_i_arr
    cdef double[::1] near_c = near_c_arr
    cdef Py_ssize_t m = 0
    for j in range(nR):
        for i in range(nr):
            coef = d[j] * c[i] * R[j] * k[i] / r[i]
            diff = R[j] - r[i]
            scale = R[j] if R[j] > r[i] else r[i]
            if fabs(diff) < delta * scale:
                near_j[m] = j
                near_i[m] = i
                near_c[m] = coef
                m += 1
            else:
                w = coef / diff
                A[i] += w
                B[j] += w
    return k_arr, g_arr, u_arr, A_arr, B_arr, near_j_arr, near_i_arr, near_c_arr


def near_pair_sum(double h, const double[::1] r, const double[::1] R,
                  const Py_ssize_t[::1] near_j, const Py_ssize_t[::1] near_i,
                  const double[::1] near_c):
    cdef Py_ssize_t m, n = near_c.shape[0]
    cdef double acc = 0.0, P, rr, dd
    for m in range(n):
        P = R[near_j[m]]
        rr = r[near_i[m]]
        if P > rr:
            dd = -exp(-rr * h) * expm1(-(P - rr) * h) / (P - rr)
        elif P < rr:
            dd = -exp(-P * h) * expm1(-(rr - P) * h) / (rr - P)
        else:
            dd = h * exp(-rr * h)
        acc += near_c[m] * dd
    return acc


def advance_block(double[::1] y, double[::1] x,
                  const double[::1] decay, const double[::1] inflow,
                  const double[::1] R, const double[::1] d,
                  const double[::1] noise_scale,
                  double mu, double ybar, double dt,
                  const double[:, ::1] normals,
                  const Py_ssize_t[::1] jump_offsets,
                  const Py_ssize_t[::1] jump_nodes,
                  const double[::1] jump_sizes,
                  Py_ssize_t stride,
                  double[::1] out_y, double[::1] out_x, Py_ssize_t out_start):
    """Advance ``normals.shape[0]`` steps; record (Y, X) every ``stride`` steps."""
    cdef Py_ssize_t n_steps = normals.shape[0]
    cdef Py_ssize_t nr = y.shape[0], nR = x.shape[0]
    cdef Py_ssize_t s, i, j, m, rec = out_start
    cdef double Y, X, forcing, vol, sq
    for s in range(n_steps):
        Y = 0.0
        for i in range(nr):
            Y += y[i]
        if s % stride == 0:
            X = 0.0
            for j in range(nR):
                X += x[j]
            out_y[rec] = Y
            out_x[rec] = X
            rec += 1
        forcing = mu * (Y - ybar)
        sq = sqrt(Y * dt) if Y > 0.0 else 0.0
        for j in range(nR):
            x[j] += -R[j] * (x[j] - d[j] * forcing) * dt + noise_scale[j] * sq * normals[s, j]
        for i in range(nr):
            y[i] = y[i] * decay[i] + inflow[i]
        for m in range(jump_offsets[s], jump_offsets[s + 1]):
            y[jump_nodes[m]] += jump_sizes[m]
    return rec
