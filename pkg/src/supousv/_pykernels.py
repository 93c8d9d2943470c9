"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def drift_tables(r, c, R, d, delta):
    r = np.asarray(r, dtype=float)
    c = np.asarray(c, dtype=float)
    R = np.asarray(R, dtype=float)
    d = np.asarray(d, dtype=float)
    k = (d * R / (R[None, :] + r[:, None])).sum(axis=1)
    g = (c / (r[None, :] * (R[:, None] + r[None, :]))).sum(axis=1)
    RR = R[:, None] * R[None, :] / (R[:, None] + R[None, :])
    u = (d[None, :] * RR * (g[:, None] + g[None, :])).sum(axis=1)

    coef = d[:, None] * c[None, :] * R[:, None] * (k / r)[None, :]
    diff = R[:, None] - r[None, :]
    near = np.abs(diff) < delta * np.maximum(R[:, None], r[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(near, 0.0, coef / np.where(near, 1.0, diff))
    A = w.sum(axis=0)
    B = w.sum(axis=1)
    near_j, near_i = np.nonzero(near)
    return k, g, u, A, B, near_j, near_i, coef[near_j, near_i]


def near_pair_sum(h, r, R, near_j, near_i, near_c):
    if near_c.size == 0:
        return 0.0
    P = R[near_j]
    rr = r[near_i]
    lo = np.minimum(P, rr)
    gap = np.abs(P - rr)
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = np.where(gap > 0, -np.exp(-lo * h) * np.expm1(-gap * h) / gap, h * np.exp(-rr * h))
    return float(np.dot(near_c, dd))


def advance_block(y, x, decay, inflow, R, d, noise_scale, mu, ybar, dt,
                  normals, jump_offsets, jump_nodes, jump_sizes, stride,
                  out_y, out_x, out_start):
    rec = out_start
    drift_rate = R * dt
    for s in range(normals.shape[0]):
        Y = y.sum()
        if s % stride == 0:
            out_y[rec] = Y
            out_x[rec] = x.sum()
            rec += 1
        forcing = mu * (Y - ybar)
        sq = np.sqrt(Y * dt) if Y > 0.0 else 0.0
        x += -drift_rate * (x - d * forcing) + noise_scale * sq * normals[s]
        y *= decay
        y += inflow
        lo, hi = jump_offsets[s], jump_offsets[s + 1]
        if hi > lo:
            np.add.at(y, jump_nodes[lo:hi], jump_sizes[lo:hi])
    return rec
