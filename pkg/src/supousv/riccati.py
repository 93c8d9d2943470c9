"""Exponential moments of the stationary log-concentration via the
generalised Riccati system of the Markovian lift.

For ``M(q) = E[exp(q X)]`` the lift's affine structure gives, with recession
nodes ``(r_i, c_i)`` and reversion nodes ``(R_j, d_j)``::

    omega_j(t) = q exp(-R_j t)
    psi_i'     = -r_i psi_i + F(t),   F(t) = sum_j d_j R_j (mu omega_j + sigma^2 omega_j^2 / 2)
    phi'       = sum_i c_i Lambda(psi_i) - mu Ybar sum_j d_j R_j omega_j

with zero initial data and ``log M(q) = lim phi_t``.  ``Lambda`` is the
exponent ``int (exp(psi z^kappa) - 1) nu(dz)`` of the regularised jumps.

Because ``omega`` and hence ``F`` are explicit, each ``psi_i`` is advanced by
an exponential integrator (exact linear part, quadratic interpolation of
``F``) and ``phi`` by Simpson's rule.  Steps grow geometrically with ``t`` so
that the slow power-law relaxation is reached in a few thousand steps; once
``psi`` is negligible the remaining integral is added in closed form from
the linearisation ``Lambda(psi) ~ M_1 psi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import integrate, special

from .analytics import DEFAULT_GRID_SIZE, _as_grid
from .errors import ConvergenceError, DomainError
from .measures import (
    GammaMeasure,
    TemperedStableLevy,
    harmonic_quantile_grid,
    levy_moment,
)

__all__ = [
    "RiccatiState",
    "RiccatiTrajectory",
    "MGFResult",
    "LevyExponent",
    "q_max",
    "psi_bound",
    "riccati_grids",
    "integrate_riccati",
    "mgf",
]

_CHEB_DEGREE = 20
_TABLE_TOL = 1e-10  # absolute error of log(Lambda / psi) on each piece
_MAX_DEPTH = 24


def q_max(nu: TemperedStableLevy, sigma: float, mu: float) -> float:
    """Largest ``q`` with ``max(mu, 0) q + sigma^2 q^2 / 4 <= a2 e``.

    Uses the Levy measure's own ``a2``; pass the unregularised law when the
    bound of the plain tempered stable model is wanted.
    """
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    target = nu.a2 * math.e
    m = max(mu, 0.0)
    if sigma == 0:
        return math.inf if m == 0 else target / m
    # 2 a2 e / (m + sqrt(m^2 + sigma^2 a2 e)), the positive root
    return 2.0 * target / (m + math.sqrt(m * m + sigma * sigma * target))


def psi_bound(sigma: float, mu: float, q: float) -> float:
    """Upper bound ``(max(mu, 0) q + sigma^2 q^2 / 4) / e`` on ``psi``."""
    return (max(mu, 0.0) * q + 0.25 * sigma**2 * q**2) / math.e


class LevyExponent:
    """``Lambda(psi) = int (exp(psi z^kappa) - 1) nu(dz)`` for ``psi < a2``.

    Closed form when ``epsilon = 0``.  Otherwise ``log(Lambda(psi) / psi)``
    (``Lambda / psi`` is entire and positive, but grows super-exponentially
    once ``psi`` exceeds ``a2``, with a sharp knee) is tabulated by
    piecewise Chebyshev interpolation of adaptive quadrature, bisecting
    until each piece is accurate to ``1e-10``.  Tables are shared between
    instances with the same jump law and grow on demand.
    """

    def __init__(self, nu: TemperedStableLevy, psi_range: float = 0.0):
        self.nu = nu
        self.m1 = levy_moment(nu, 1)
        self._table = None
        if nu.epsilon > 0:
            self._table = _TABLES.setdefault(nu, _PiecewiseTable(self._log_ratio))
            span = max(psi_range, 1e-3 * nu.a2)
            self._table.cover(-span, span)

    # -- quadrature of the defining integral ---------------------------------
    def quad(self, psi: float) -> float:
        """Direct adaptive quadrature of ``Lambda(psi)`` (slow; also a test oracle)."""
        if psi == 0:
            return 0.0
        with np.errstate(over="ignore"):
            return float(psi * np.exp(self._log_ratio(psi)))

    def _log_ratio(self, psi: float) -> float:
        """``log(Lambda(psi) / psi)`` by quadrature, without overflow."""
        nu = self.nu
        if psi == 0:
            return math.log(self.m1)
        k = nu.kappa
        # t = a2 z;  Lambda = a1 a2^a3 int expm1(c t^k) e^{-t} t^{-1-a3} dt
        c = psi * nu.a2 ** (-k)
        pref = nu.a1 * nu.a2**nu.a3 / psi

        def head(t):  # times the algebraic weight t^(k - 1 - a3)
            tk = t**k
            ratio = np.expm1(c * tk) / tk if tk > 0 else c
            return ratio * math.exp(-t)

        opts = dict(epsabs=0.0, epsrel=1e-13, limit=400)
        h, _ = integrate.quad(head, 0.0, 1.0, weight="alg", wvar=(k - 1.0 - nu.a3, 0.0), **opts)

        # c t^k - t peaks at t_star; its value m is factored out of the tail
        t_star = (c * k) ** (1.0 / (1.0 - k)) if c > 0 else 0.0
        m = c * t_star**k - t_star if t_star > 1.0 else 0.0

        def tail(t):
            a = c * t**k
            if a > 0:  # exp(a) (1 - exp(-a)), scaled by exp(-m)
                return -math.expm1(-a) * math.exp(a - t - m) * t ** (-1.0 - nu.a3)
            return math.expm1(a) * math.exp(-t - m) * t ** (-1.0 - nu.a3)

        t_hi = max(60.0, 2.0 * t_star)
        while c * t_hi**k - t_hi - m > -60.0:
            t_hi *= 2.0
        pts = [p for p in (0.5 * t_star, t_star, 2.0 * t_star) if 1.0 < p < t_hi]
        tl, _ = integrate.quad(tail, 1.0, t_hi, points=pts or None, **opts)
        # Lambda / psi = pref (h + e^m tl), both terms of the sign of psi
        return math.log(abs(pref)) + m + math.log(abs(tl + h * math.exp(-m)))

    def ensure(self, lo: float, hi: float):
        """Make sure the table covers ``[lo, hi]``."""
        if self._table is not None:
            self._table.cover(lo, hi)

    def __call__(self, psi):
        psi = np.asarray(psi, dtype=float)
        if self.nu.epsilon == 0:
            return self._closed_form(psi)
        with np.errstate(over="ignore"):
            return psi * np.exp(self._table(psi))

    def _closed_form(self, psi):
        nu = self.nu
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.log1p(-psi / nu.a2)
            if nu.a3 == 0:
                out = -nu.a1 * ratio
            else:
                out = nu.a1 * special.gamma(-nu.a3) * nu.a2**nu.a3 * np.expm1(nu.a3 * ratio)
        return np.where(psi < nu.a2, out, np.inf)


class _PiecewiseTable:
    """Adaptive piecewise Chebyshev interpolant of a smooth scalar function."""

    def __init__(self, f):
        self.f = f
        self.lo = self.hi = 0.0
        self.breaks = []  # left ends, sorted
        self.pieces = []  # (lo, hi, coef)

    def _fit(self, lo, hi, depth=0):
        n = _CHEB_DEGREE
        x = np.cos(np.pi * (np.arange(n + 1) + 0.5) / (n + 1))
        vals = np.array([self.f(0.5 * (hi + lo) + 0.5 * (hi - lo) * v) for v in x])
        coef = C.chebfit(x, vals, n)
        xc = np.array([-0.95, -0.5, 0.1, 0.6, 0.97])
        check = np.array([self.f(0.5 * (hi + lo) + 0.5 * (hi - lo) * v) for v in xc])
        err = np.abs(C.chebval(xc, coef) - check).max()
        if err > _TABLE_TOL and depth < _MAX_DEPTH:
            mid = 0.5 * (lo + hi)
            return self._fit(lo, mid, depth + 1) + self._fit(mid, hi, depth + 1)
        return [(lo, hi, coef)]

    def cover(self, lo, hi):
        if not self.pieces:
            new = self._fit(lo, hi)
            self.lo, self.hi = lo, hi
        else:
            if lo >= self.lo and hi <= self.hi:
                return
            new = []
            if lo < self.lo:
                new_lo = self.lo - 1.5 * (self.lo - lo)
                new += self._fit(new_lo, self.lo)
                self.lo = new_lo
            if hi > self.hi:
                new_hi = self.hi + 1.5 * (hi - self.hi)
                new += self._fit(self.hi, new_hi)
                self.hi = new_hi
        self.pieces = sorted(self.pieces + new, key=lambda p: p[0])
        self.breaks = np.array([p[0] for p in self.pieces])

    def __call__(self, psi):
        psi = np.asarray(psi, dtype=float)
        if psi.size:
            self.cover(float(psi.min()), float(psi.max()))
        idx = np.clip(np.searchsorted(self.breaks, psi, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(psi)
        for k in np.unique(idx):
            lo, hi, coef = self.pieces[k]
            sel = idx == k
            out[sel] = C.chebval((2.0 * psi[sel] - (hi + lo)) / (hi - lo), coef)
        return out


_TABLES: dict = {}


@dataclass
class RiccatiState:
    t: float
    phi: float
    psi: np.ndarray
    omega: np.ndarray


@dataclass
class RiccatiTrajectory:
    times: np.ndarray
    phi: np.ndarray
    psi: np.ndarray  # (n_times, n_recession_nodes)
    omega: np.ndarray  # (n_times, n_reversion_nodes)
    psi_sup: float
    guard_tripped: bool

    def state(self, k: int) -> RiccatiState:
        return RiccatiState(float(self.times[k]), float(self.phi[k]), self.psi[k], self.omega[k])


@dataclass
class MGFResult:
    q: float
    q_max: float
    converged: bool
    guard_tripped: bool
    log_mgf: float
    psi_sup: float
    t_final: float
    n_steps: int

    @property
    def mgf(self) -> float:
        return math.exp(self.log_mgf) if math.isfinite(self.log_mgf) else math.inf

    def to_dict(self):
        return {
            "q": self.q,
            "q_max": self.q_max,
            "converged": self.converged,
            "log_mgf": self.log_mgf if math.isfinite(self.log_mgf) else None,
            "psi_sup": self.psi_sup,
            "guard_tripped": self.guard_tripped,
        }


def riccati_grids(p, size: int = DEFAULT_GRID_SIZE, rule: str = "midpoint"):
    """Quadrature grids (recession, reversion) for the Riccati system.

    ``rule="harmonic"`` places the recession nodes at bin harmonic means;
    the reversion grid is always the midpoint-quantile grid.
    """
    pi = p.pi
    if rule == "harmonic" and isinstance(pi, GammaMeasure):
        g_pi = harmonic_quantile_grid(pi, size)
    elif rule in ("harmonic", "midpoint"):
        g_pi = _as_grid(pi, size)
    else:
        raise DomainError(f"unknown grid rule {rule!r}")
    return g_pi, _as_grid(p.rho, size)


def _phi_weights(z, h):
    """Exponential-integrator weights for F at (0, h/2, h) over one step.

    ``int_0^h exp(-r (h - u)) F(u) du ~ w0 F(0) + w1 F(h/2) + w2 F(h)`` with
    ``z = r h`` and ``F`` replaced by its quadratic interpolant.
    """
    z = np.asarray(z, dtype=float)
    e0 = np.empty_like(z)
    e1 = np.empty_like(z)
    e2 = np.empty_like(z)
    small = z < 1.0
    if small.any():
        zs = z[small]
        # E_k(z) = int_0^1 e^{-z v} v^k dv = sum_n (-z)^n / (n! (n + k + 1))
        term = np.ones_like(zs)
        s0 = np.zeros_like(zs)
        s1 = np.zeros_like(zs)
        s2 = np.zeros_like(zs)
        for n in range(25):
            s0 += term / (n + 1)
            s1 += term / (n + 2)
            s2 += term / (n + 3)
            term = term * (-zs) / (n + 1)
        e0[small], e1[small], e2[small] = s0, s1, s2
    big = ~small
    if big.any():
        zb = z[big]
        ez = np.exp(-zb)
        b0 = -np.expm1(-zb) / zb
        b1 = (b0 - ez) / zb
        b2 = (2.0 * b1 - ez) / zb
        e0[big], e1[big], e2[big] = b0, b1, b2
    w0 = h * (2.0 * e2 - e1)
    w1 = h * (4.0 * e1 - 4.0 * e2)
    w2 = h * (e0 - 3.0 * e1 + 2.0 * e2)
    return w0, w1, w2


class _System:
    def __init__(self, p, q, grids, a2_ref):
        self.p = p
        self.q = float(q)
        g_pi, g_rho = grids if grids is not None else riccati_grids(p)
        self.r, self.c = g_pi.nodes, g_pi.weights
        self.R, self.d = g_rho.nodes, g_rho.weights
        self.dR = self.d * self.R
        self.lam = LevyExponent(p.levy, psi_range=1.2 * abs(psi_bound(p.sigma, abs(p.mu), q)))
        # the mean of the lifted discharge, so the mu-terms balance exactly
        self.ybar = self.lam.m1 * float(np.dot(self.c, 1.0 / self.r))
        self.guard = p.levy.a2 if a2_ref is None else float(a2_ref)

    def omega(self, t):
        return self.q * np.exp(-self.R * t)

    def forcing(self, t):
        w = self.omega(t)
        return float(np.dot(self.dR, self.p.mu * w + 0.5 * self.p.sigma**2 * w * w))

    def phi_rate(self, t, psi):
        drift = self.p.mu * self.ybar * float(np.dot(self.dR, self.omega(t)))
        return float(np.dot(self.c, self.lam(psi))) - drift

    def phi_jump_part(self, psi):
        return float(np.dot(self.c, self.lam(psi)))

    def drift_integral(self, t0, t1):
        """``int_t0^t1 mu Ybar sum_j d_j R_j omega_j`` in closed form."""
        if self.p.mu == 0:
            return 0.0
        diff = np.exp(-self.R * t0) - np.exp(-self.R * t1)
        return self.p.mu * self.ybar * self.q * float(np.dot(self.d, diff))

    def psi_step(self, psi, t, h):
        w0, w1, w2 = _phi_weights(self.r * h, h)
        f0, f1, f2 = self.forcing(t), self.forcing(t + 0.5 * h), self.forcing(t + h)
        return np.exp(-self.r * h) * psi + w0 * f0 + w1 * f1 + w2 * f2

    def tail(self, t, psi):
        """Remaining ``phi`` increment after ``t`` with ``Lambda`` linearised."""
        R, d, q = self.R, self.d, self.q
        e1 = np.exp(-R * t)
        f_int = float(np.dot(d, self.p.mu * q * e1 + 0.25 * self.p.sigma**2 * q * q * e1 * e1))
        jump = self.lam.m1 * float(np.dot(self.c, (psi + f_int) / self.r))
        return jump - self.p.mu * self.ybar * q * float(np.dot(d, e1))


def _advance(sys, psi, t, h):
    """One step: returns (psi_new, phi increment, psi_mid)."""
    psi_mid = sys.psi_step(psi, t, 0.5 * h)
    psi_new = sys.psi_step(psi, t, h)
    g0 = sys.phi_jump_part(psi)
    g1 = sys.phi_jump_part(psi_mid)
    g2 = sys.phi_jump_part(psi_new)
    dphi = h / 6.0 * (g0 + 4.0 * g1 + g2) - sys.drift_integral(t, t + h)
    return psi_new, dphi, psi_mid


def integrate_riccati(p, q: float, t_end: float, grids=None, step: float = 1e-3,
                      times=None, growth: float = 0.0, a2_ref: float | None = None
                      ) -> RiccatiTrajectory:
    """Integrate the lifted Riccati system on ``[0, t_end]``.

    The state is reported at ``times`` (default: every step).  Steps have
    length ``max(step, growth * t)``, clipped so every requested time is hit
    exactly.  Integration stops early, with ``guard_tripped`` set, as soon
    as some ``psi_i`` reaches ``a2_ref`` (default: the tempering parameter
    ``a2`` of ``p.levy``), beyond which the exponential moment of the
    unregularised jumps is infinite.
    """
    if not step > 0:
        raise DomainError("step must be positive")
    if not t_end >= 0:
        raise DomainError("t_end must be nonnegative")
    sys = _System(p, q, grids, a2_ref)
    if times is not None:
        targets = np.unique(np.clip(np.asarray(times, dtype=float), 0.0, t_end))
    else:
        targets = None

    psi = np.zeros(sys.r.size)
    phi = 0.0
    t = 0.0
    out_t, out_phi, out_psi = [], [], []
    psi_sup = 0.0
    tripped = False

    def record():
        out_t.append(t)
        out_phi.append(phi)
        out_psi.append(psi.copy())

    k = 0
    if targets is None or (targets.size and targets[0] == 0.0):
        record()
        k = 1 if targets is not None else 0
    while t < t_end * (1 - 1e-15):
        h = max(step, growth * t)
        h = min(h, t_end - t)
        if targets is not None and k < targets.size:
            h = min(h, targets[k] - t)
        psi_new, dphi, psi_mid = _advance(sys, psi, t, h)
        psi_sup = max(psi_sup, float(psi_new.max()), float(psi_mid.max()))
        if psi_sup >= sys.guard:
            tripped = True
            break
        psi, phi, t = psi_new, phi + dphi, t + h
        if targets is None:
            record()
        elif k < targets.size and t >= targets[k] * (1 - 1e-14):
            record()
            k += 1
    omega = np.array([sys.omega(tt) for tt in out_t]).reshape(len(out_t), sys.R.size)
    return RiccatiTrajectory(
        np.array(out_t), np.array(out_phi),
        np.array(out_psi).reshape(len(out_t), sys.r.size), omega, psi_sup, tripped,
    )


def mgf(p, q: float, grids=None, *, step: float = 1e-3, growth: float = 0.01,
        t_max: float = 1e10, deriv_tol: float = 1e-10, psi_tol: float = 1e-8,
        a2_ref: float | None = None) -> MGFResult:
    """Stationary exponential moment ``E[exp(q X)]``.

    Integrates until ``|dphi/dt| < deriv_tol`` and ``max |psi| < psi_tol |q|``,
    then adds the linearised remainder.  If ``psi`` reaches the tempering
    parameter the result carries ``guard_tripped=True`` and an infinite
    ``log_mgf``.  Raises :class:`ConvergenceError` when ``t_max`` is reached
    first.

    ``a2_ref`` is the tempering parameter used both for the guard and for
    the reported ``q_max``; it defaults to ``p.levy.a2``.  With ``epsilon > 0``
    the regularised jumps have exponential moments of every order, so the
    guard is only meaningful relative to the unregularised law's ``a2``,
    which the caller has to supply.
    """
    nu = p.levy
    qm_nu = nu if a2_ref is None else TemperedStableLevy(nu.a1, a2_ref, nu.a3, nu.epsilon)
    qm = q_max(qm_nu, p.sigma, p.mu)
    if q == 0:
        return MGFResult(0.0, qm, True, False, 0.0, 0.0, 0.0, 0)
    sys = _System(p, q, grids, a2_ref)
    psi = np.zeros(sys.r.size)
    phi = 0.0
    t = 0.0
    psi_sup = 0.0
    n = 0
    while t < t_max:
        h = max(step, growth * t)
        psi_new, dphi, psi_mid = _advance(sys, psi, t, h)
        n += 1
        psi_sup = max(psi_sup, float(psi_new.max()), float(psi_mid.max()))
        if psi_sup >= sys.guard:
            return MGFResult(float(q), qm, False, True, math.inf, psi_sup, t + h, n)
        psi, phi, t = psi_new, phi + dphi, t + h
        if np.abs(psi).max() < psi_tol * abs(q) and abs(sys.phi_rate(t, psi)) < deriv_tol:
            log_m = phi + sys.tail(t, psi)
            return MGFResult(float(q), qm, True, False, float(log_m), psi_sup, t, n)
    raise ConvergenceError(
        f"Riccati system not stationary by t = {t:.3g} days "
        f"(max |psi| = {np.abs(psi).max():.3g})"
    )
