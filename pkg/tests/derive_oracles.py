"""Independent high-precision values frozen into the test suite.

Run ``python3 tests/derive_oracles.py`` to reprint them.  Nothing here calls
the package's numerical routines: moments and Laplace transforms come from
mpmath quadrature of the defining integrals, second-order statistics of the
finite lift from a Lyapunov solve of its linear moment equations, and
exponential moments from quadrature of the closed-form solution of the
linear Riccati equation.  Only parameter values and node placement
(plain gamma quantiles) are shared with the library.
"""

import mpmath as mp
import numpy as np
from scipy import linalg, special

mp.mp.dps = 30

LEVY_01 = (1.124, 8.92e-4, 0.75, 0.1)
LEVY_00 = (1.266, 1.96e-3, 0.8084, 0.0)
PI = (2.143, 1.034)
TN = dict(rho=(0.375, 0.2699), sigma=0.1077, mu=0.02752)
DSI = dict(rho=(2.51, 0.02806), sigma=0.05483, mu=0.0)


def nu_density(lv, z):
    a1, a2, a3, _ = lv
    return a1 * mp.exp(-a2 * z) * z ** (-(1 + a3))


def levy_moment(lv, k):
    # z = u^(1/s) with s = k kappa - a3 turns z^(s-1) dz into du / s
    a1, a2, a3, eps = (mp.mpf(v) for v in lv)
    s = k / (1 + eps) - a3
    return a1 / s * mp.quad(lambda u: mp.exp(-a2 * u ** (1 / s)), [0, 1, 1e2, 1e4, 1e6, mp.inf])


def levy_tail(lv, zmin):
    return mp.quad(lambda z: nu_density(lv, z), [zmin, 10 * zmin, 1e4, mp.inf])


def levy_exponent(lv, psi):
    # same substitution as levy_moment with k = 1
    a1, a2, a3, eps = (mp.mpf(v) for v in lv)
    kap = 1 / (1 + eps)
    s = kap - a3

    def f(u):
        z = u ** (1 / s)
        return mp.expm1(psi * z**kap) / z**kap * mp.exp(-a2 * z) if z > 0 else psi

    return a1 / s * mp.quad(f, [0, 1, 1e2, 1e4, 1e6, mp.inf])


def gamma_pdf(a, b, r):
    return r ** (a - 1) * mp.exp(-r / b) / (mp.gamma(a) * b**a)


def inv_mean(a, b):
    return mp.quad(lambda r: gamma_pdf(a, b, r) / r, [0, b, 10 * b, mp.inf])


def y_acf(a, b, h):
    return mp.quad(lambda r: mp.exp(-r * h) * gamma_pdf(a, b, r) / r,
                   [0, b, 10 * b, mp.inf]) / inv_mean(a, b)


def midpoint_grid(a, b, n):
    p = (np.arange(1, n + 1) - 0.5) / n
    return b * special.gammaincinv(a, p), np.full(n, 1.0 / n)


def lift_moments(lv, rho, sigma, mu, n_pi, n_rho, lags):
    """Var X, Cov(X, Y) and autocovariances of X of the finite lift.

    Stationary second moments solve the Lyapunov equation of the linear
    moment dynamics.

    State ``(Y_1..Y_n, X_1..X_m)``; ``dY_i = -r_i Y_i dt + dL_i`` with jump
    rate ``c_i nu``; ``dX_j = -R_j (X_j - d_j mu (Y - Ybar)) dt +
    sigma sqrt(d_j R_j Y) dW_j``.  The diffusion intensity uses the
    continuum mean discharge, matching the closed-form variance split.
    """
    r, c = midpoint_grid(*PI, n_pi)
    R, d = midpoint_grid(*rho, n_rho)
    m1 = float(levy_moment(lv, 1))
    m2 = float(levy_moment(lv, 2))
    ybar = m1 * float(inv_mean(*PI))
    n, m = r.size, R.size
    A = np.zeros((n + m, n + m))
    A[:n, :n] = -np.diag(r)
    A[n:, n:] = -np.diag(R)
    A[n:, :n] = mu * np.outer(R * d, np.ones(n))
    Q = np.zeros_like(A)
    Q[:n, :n] = np.diag(c * m2)
    Q[n:, n:] = np.diag(sigma**2 * d * R * ybar)
    S = linalg.solve_continuous_lyapunov(A, -Q)
    ex = np.r_[np.zeros(n), np.ones(m)]
    ey = np.r_[np.ones(n), np.zeros(m)]
    var_x = ex @ S @ ex
    cov = ex @ S @ ey
    autocov = [ex @ linalg.expm(A * h) @ S @ ex for h in lags]
    return var_x, cov, autocov


def exp_moment(lv, rho, sigma, mu, q, n_pi, n_rho, closed_lambda):
    """``log E exp(q X)`` for the finite lift from the linear Riccati solution."""
    r, c = midpoint_grid(*PI, n_pi)
    R, d = midpoint_grid(*rho, n_rho)
    a1, a2, a3, eps = (mp.mpf(v) for v in lv)
    m1 = levy_moment(lv, 1)
    ybar = m1 * sum(mp.mpf(ci) / ri for ci, ri in zip(c, r))
    q, sigma, mu = mp.mpf(q), mp.mpf(sigma), mp.mpf(mu)

    def lam(psi):
        if closed_lambda:
            return a1 * mp.gamma(-a3) * ((a2 - psi) ** a3 - a2**a3)
        return levy_exponent(lv, psi)

    def psi_i(ri, s):
        tot = mp.mpf(0)
        for Rj, dj in zip(R, d):
            Rj, dj = mp.mpf(Rj), mp.mpf(dj)
            e = mp.exp(-ri * s)
            tot += dj * Rj * (q * mu * (mp.exp(-Rj * s) - e) / (ri - Rj)
                              + q * q * sigma**2 / 2 * (mp.exp(-2 * Rj * s) - e) / (ri - 2 * Rj))
        return tot

    total = ybar * q * q * sigma**2 / 4
    for ri, ci in zip(r, c):
        ri = mp.mpf(ri)
        f = lambda s: lam(psi_i(ri, s)) - m1 * psi_i(ri, s)  # noqa: E731
        scale = 1 / min(ri, mp.mpf(R[0]))
        total += ci * mp.quad(f, [0, scale / 100, scale / 10, scale, 10 * scale, 100 * scale,
                                  mp.inf])
    return total


if __name__ == "__main__":
    print("levy moments eps=0.1", [mp.nstr(levy_moment(LEVY_01, k), 17) for k in (1, 2, 3, 4)])
    print("levy moments eps=0", [mp.nstr(levy_moment(LEVY_00, k), 17) for k in (1, 2, 3, 4)])
    print("levy tail eps=0.1 zmin=1,100", [mp.nstr(levy_tail(LEVY_01, z), 17) for z in (1, 100)])
    print("levy exponent eps=0.1", [mp.nstr(levy_exponent(LEVY_01, s), 17)
                                    for s in (1e-4, 5e-4, 2e-3)])
    print("inv mean pi", mp.nstr(inv_mean(*PI), 17))
    print("Y acf", [mp.nstr(y_acf(*PI, h), 17) for h in (0.5, 1, 10, 100)])
    lags = [1.0, 30.0, 365.0]
    print("lift TN 16x16", lift_moments(LEVY_01, TN["rho"], TN["sigma"], TN["mu"], 16, 16, lags))
    print("lift TN 16x16 drift only", lift_moments(LEVY_01, TN["rho"], 0.0, TN["mu"], 16, 16,
                                                   lags))
    print("lift DSi 16x16", lift_moments(LEVY_01, DSI["rho"], DSI["sigma"], 0.0, 16, 16, lags))
    for q in (0.05, 0.1):
        print("expmom TN eps0 8x8 q", q,
              mp.nstr(exp_moment(LEVY_00, TN["rho"], TN["sigma"], TN["mu"], q, 8, 8, True), 17))
    for q in (1.0, 2.0):
        print("expmom DSi eps0 8x8 q", q,
              mp.nstr(exp_moment(LEVY_00, DSI["rho"], DSI["sigma"], 0.0, q, 8, 8, True), 17))
    mp.mp.dps = 20
    print("expmom TN eps0.1 4x4 q 0.1",
          mp.nstr(exp_moment(LEVY_01, TN["rho"], TN["sigma"], TN["mu"], 0.1, 4, 4, False), 15))
