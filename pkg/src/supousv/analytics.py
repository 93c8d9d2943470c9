"""Stationary statistics of discharge ``Y`` and log-concentration ``X``.

Closed forms are used wherever the gamma / tempered stable structure allows;
the triple integrals driving the variance and autocorrelation of ``X`` are
evaluated as tensor sums over quantile grids.  Those sums are factorised so
that a pair of grids of size ``N`` costs ``O(N^2)`` once, after which every
lag costs ``O(N)`` (see :class:`DriftIntegrals`).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import DomainError
from .measures import (
    GammaMeasure,
    QuadratureGrid,
    TemperedStableLevy,
    inv_first_moment,
    levy_moment,
    quantile_grid,
)

__all__ = [
    "DEFAULT_GRID_SIZE",
    "DischargeModel",
    "SupOUSVParams",
    "CumulantSet",
    "XVariance",
    "TailExponents",
    "DriftIntegrals",
    "drift_integrals",
    "discharge_cumulants",
    "discharge_acf",
    "discharge_mean",
    "discharge_variance",
    "x_variance",
    "xy_covariance",
    "x_acf",
    "acf_tail_exponents",
    "coupling_weight",
    "default_grids",
]

DEFAULT_GRID_SIZE = 2048
# pairs with |P - r| below this fraction of max(P, r) use the stable
# divided difference instead of the separable form
_NEAR_PAIR_FRACTION = 1e-2


@dataclass(frozen=True)
class DischargeModel:
    """The supOU discharge process alone: jump law ``levy`` and recession ``pi``."""

    levy: TemperedStableLevy
    pi: GammaMeasure

    def __post_init__(self):
        if isinstance(self.pi, GammaMeasure) and self.pi.alpha <= 1:
            raise DomainError("recession measure needs alpha > 1")


@dataclass(frozen=True)
class SupOUSVParams:
    """Full parameter bundle of the coupled discharge / quality model."""

    levy: TemperedStableLevy
    pi: GammaMeasure
    rho: GammaMeasure
    sigma: float
    mu: float

    def __post_init__(self):
        if isinstance(self.pi, GammaMeasure) and self.pi.alpha <= 1:
            raise DomainError("recession measure needs alpha > 1")
        if not self.sigma >= 0:
            raise DomainError(f"sigma must be nonnegative, got {self.sigma}")
        if not math.isfinite(self.mu):
            raise DomainError("mu must be finite")
        if not self.acf_vanishing_condition:
            warnings.warn(
                "(alpha_r - 1)(alpha_R + 2) <= 1: the autocorrelation of X is "
                "not guaranteed to vanish at infinity",
                stacklevel=2,
            )

    @property
    def discharge(self) -> DischargeModel:
        return DischargeModel(self.levy, self.pi)

    @property
    def acf_vanishing_condition(self) -> bool:
        if not (isinstance(self.pi, GammaMeasure) and isinstance(self.rho, GammaMeasure)):
            return True
        if self.pi.alpha > 2:
            return True
        return (self.pi.alpha - 1.0) * (self.rho.alpha + 2.0) > 1.0


@dataclass(frozen=True)
class CumulantSet:
    mean: float
    variance: float
    skewness_unnormalized: float
    kurtosis_unnormalized: float
    skewness_normalized: float
    kurtosis_normalized: float


@dataclass(frozen=True)
class XVariance:
    """Variance of ``X`` split into its diffusion and drift contributions."""

    diffusion: float
    drift: float

    @property
    def total(self) -> float:
        return self.diffusion + self.drift


@dataclass(frozen=True)
class TailExponents:
    regime: str
    exponents: tuple
    condition_satisfied: bool
    eta: float | None = None


def _inv_mean(pi) -> float:
    if isinstance(pi, QuadratureGrid):
        return float(np.dot(pi.weights, 1.0 / pi.nodes))
    return inv_first_moment(pi)


def discharge_cumulants(model) -> CumulantSet:
    """First four cumulants of stationary discharge.

    ``model`` is anything with ``levy`` and ``pi`` attributes
    (:class:`DischargeModel` or :class:`SupOUSVParams`).  The k-th cumulant
    is ``M_k / k * int pi(dr) / r``.
    """
    J = _inv_mean(model.pi)
    m = [levy_moment(model.levy, k) for k in (1, 2, 3, 4)]
    mean = m[0] * J
    var = m[1] / 2.0 * J
    skew = m[2] / 3.0 * J
    kurt = m[3] / 4.0 * J
    return CumulantSet(
        mean=mean,
        variance=var,
        skewness_unnormalized=skew,
        kurtosis_unnormalized=kurt,
        skewness_normalized=skew / var**1.5,
        kurtosis_normalized=kurt / var**2,
    )


def discharge_mean(model) -> float:
    return levy_moment(model.levy, 1) * _inv_mean(model.pi)


def discharge_variance(model) -> float:
    return levy_moment(model.levy, 2) / 2.0 * _inv_mean(model.pi)


def discharge_acf(pi, h):
    """Autocorrelation of discharge at lag(s) ``h``.

    Closed form ``(1 + beta h)^{-(alpha - 1)}`` for a gamma measure; for a
    :class:`QuadratureGrid` the defining ratio of ``exp(-r h) / r`` integrals.
    """
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise DomainError("lags must be nonnegative")
    if isinstance(pi, QuadratureGrid):
        w = pi.weights / pi.nodes
        out = np.exp(-np.multiply.outer(h, pi.nodes)) @ w / w.sum()
        return out
    if pi.alpha <= 1:
        raise DomainError("recession measure needs alpha > 1")
    return (1.0 + pi.beta * h) ** (-(pi.alpha - 1.0))


def _as_grid(m, size):
    if isinstance(m, QuadratureGrid):
        return m
    return _cached_grid(m.alpha, m.beta, size)


@lru_cache(maxsize=32)
def _cached_grid(alpha, beta, size):
    return quantile_grid(GammaMeasure(alpha, beta), size)


def default_grids(p, size: int = DEFAULT_GRID_SIZE):
    """Quantile grids for ``p.pi`` and ``p.rho``."""
    return _as_grid(p.pi, size), _as_grid(p.rho, size)


@dataclass
class DriftIntegrals:
    """Grid sums behind the discharge-driven part of ``X``'s statistics.

    With recession nodes ``r_i`` (weights ``c_i``) and reversion nodes
    ``R_j`` (weights ``d_j``; ``P`` runs over the same grid):

    * ``k(r)  = sum_j d_j R_j / (R_j + r)``
    * ``g(P)  = sum_i c_i / (r_i (P + r_i))``
    * ``u(P)  = sum_j d_j R_j P / (P + R_j) (g(P) + g(R_j))``

    so that ``I2(h) = sum_P d_P exp(-P h) u(P)``.  ``I3`` splits into a
    separable far-from-diagonal part and a short list of near-diagonal pairs
    evaluated with a cancellation-free divided difference.
    """

    pi_grid: QuadratureGrid
    rho_grid: QuadratureGrid
    backend: object = field(default=None, repr=False)

    def __post_init__(self):
        kern = self.backend or kernels
        r, c = self.pi_grid.nodes, self.pi_grid.weights
        R, d = self.rho_grid.nodes, self.rho_grid.weights
        (self.k, self.g, self.u, self._A, self._B,
         self._near_j, self._near_i, self._near_c) = kern.drift_tables(
            r, c, R, d, _NEAR_PAIR_FRACTION
        )
        self._near_sum = kern.near_pair_sum
        self.covariance_integral = float(np.dot(c, self.k / r))
        self.i2_zero = float(np.dot(d, self.u))

    @property
    def n_near_pairs(self) -> int:
        return int(self._near_c.size)

    def i2(self, h):
        h = np.asarray(h, dtype=float)
        R = self.rho_grid.nodes
        w = self.rho_grid.weights * self.u
        return np.exp(-np.multiply.outer(h, R)) @ w

    def i3(self, h):
        h = np.atleast_1d(np.asarray(h, dtype=float))
        r, R = self.pi_grid.nodes, self.rho_grid.nodes
        far = np.exp(-np.multiply.outer(h, r)) @ self._A - np.exp(-np.multiply.outer(h, R)) @ self._B
        near = np.array([
            self._near_sum(float(hh), r, R, self._near_j, self._near_i, self._near_c)
            for hh in h
        ])
        out = far + near
        out[h == 0] = 0.0
        return out


@lru_cache(maxsize=16)
def _cached_drift(pi_grid_key, rho_grid_key):
    return DriftIntegrals(pi_grid_key.grid, rho_grid_key.grid)


class _GridKey:
    """Hashable identity wrapper so drift tables can be memoised per grid pair."""

    __slots__ = ("grid",)

    def __init__(self, grid):
        self.grid = grid

    def __hash__(self):
        return id(self.grid)

    def __eq__(self, other):
        return self.grid is other.grid


def drift_integrals(grid_pi: QuadratureGrid, grid_rho: QuadratureGrid) -> DriftIntegrals:
    return _cached_drift(_GridKey(grid_pi), _GridKey(grid_rho))


def _resolve_grids(p, grid_pi, grid_rho):
    if grid_pi is None:
        grid_pi = _as_grid(p.pi, DEFAULT_GRID_SIZE)
    if grid_rho is None:
        grid_rho = _as_grid(p.rho, DEFAULT_GRID_SIZE)
    return grid_pi, grid_rho


def x_variance(p: SupOUSVParams, grid_pi=None, grid_rho=None) -> XVariance:
    """Variance of ``X``: ``sigma^2 Ybar / 2`` plus the discharge-drift term."""
    grid_pi, grid_rho = _resolve_grids(p, grid_pi, grid_rho)
    ybar = discharge_mean(p)
    diffusion = 0.5 * p.sigma**2 * ybar
    if p.mu == 0:
        return XVariance(diffusion, 0.0)
    vbar = discharge_variance(p)
    J = _inv_mean(p.pi)
    tab = drift_integrals(grid_pi, grid_rho)
    return XVariance(diffusion, p.mu**2 * vbar / J * tab.i2_zero)


def xy_covariance(p: SupOUSVParams, grid_pi=None, grid_rho=None) -> float:
    """Stationary ``E[X_t Y_t]``; carries the sign of ``mu``."""
    if p.mu == 0:
        return 0.0
    grid_pi, grid_rho = _resolve_grids(p, grid_pi, grid_rho)
    vbar = discharge_variance(p)
    J = _inv_mean(p.pi)
    tab = drift_integrals(grid_pi, grid_rho)
    return p.mu * vbar / J * tab.covariance_integral


def _i1(rho, grid_rho, h):
    if isinstance(rho, GammaMeasure):
        return rho.laplace(h)
    return np.exp(-np.multiply.outer(h, grid_rho.nodes)) @ grid_rho.weights


def x_acf(p: SupOUSVParams, h, grid_pi=None, grid_rho=None):
    """Autocorrelation of ``X`` at lag(s) ``h`` (days)."""
    h_arr = np.asarray(h, dtype=float)
    if np.any(h_arr < 0):
        raise DomainError("lags must be nonnegative")
    grid_pi, grid_rho = _resolve_grids(p, grid_pi, grid_rho)
    ybar = discharge_mean(p)
    diff_w = 0.5 * p.sigma**2 * ybar
    i1 = _i1(p.rho, grid_rho, h_arr)
    if p.mu == 0:
        if diff_w == 0:
            raise DomainError("X is degenerate (sigma = mu = 0)")
        return i1 / _i1(p.rho, grid_rho, 0.0)
    tab = drift_integrals(grid_pi, grid_rho)
    drift_w = p.mu**2 * discharge_variance(p) / _inv_mean(p.pi)
    flat = np.atleast_1d(h_arr)
    num = diff_w * np.atleast_1d(i1) + drift_w * (tab.i2(flat) + tab.i3(flat))
    den = diff_w * _i1(p.rho, grid_rho, 0.0) + drift_w * tab.i2_zero
    out = num / den
    return out.reshape(h_arr.shape) if h_arr.ndim else float(out[0])


def coupling_weight(mu, sigma, var_y, mean_y, inv_mean_pi) -> float:
    """Relative weight ``w`` of the drift part in the autocorrelation of ``X``."""
    return 2.0 * mu**2 * var_y / (sigma**2 * mean_y) / inv_mean_pi


def acf_tail_exponents(p) -> TailExponents:
    """Power-law exponents bounding the decay of ``AC_X`` for gamma ``pi``, ``rho``."""
    ar = p.pi.alpha
    aR = p.rho.alpha
    if ar > 2:
        return TailExponents("decays_alpha_r_gt_2", (aR, ar - 2.0), True)
    product = (ar - 1.0) * (aR + 2.0)
    if product > 1:
        eta = (product - 1.0) / (aR + 2.0)
        return TailExponents("decays_alpha_r_le_2", (aR, eta), True, eta)
    return TailExponents("condition_violated", (), False)
