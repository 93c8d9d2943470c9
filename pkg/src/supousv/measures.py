"""Mixing measures and the jump-size Levy measure.

Two kinds of measure drive the model:

* gamma probability measures on the positive half-line, used both for the
  recession rates of discharge (``pi``) and for the reversion rates of the
  log-concentration components (``rho``);
* a tempered stable Levy measure ``nu(dz) = a1 exp(-a2 z) z^{-(1+a3)} dz``
  whose jumps enter the discharge as ``z ** (1 / (1 + epsilon))``.

The gamma density is parametrised as in the model literature,
``r^{alpha-1} exp(-r / beta) / (Gamma(alpha) beta^alpha)``, i.e. ``beta`` is a
scale (it carries the unit of a rate, 1/day, because ``r`` is a rate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "GammaMeasure",
    "TemperedStableLevy",
    "QuadratureGrid",
    "inv_first_moment",
    "levy_moment",
    "truncated_levy_moment",
    "levy_tail_rate",
    "quantile_grid",
    "harmonic_quantile_grid",
]


@dataclass(frozen=True)
class GammaMeasure:
    """Gamma probability measure with shape ``alpha`` and scale ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DomainError(f"gamma shape must be positive, got {self.alpha}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError(f"gamma scale must be positive, got {self.beta}")

    def mean(self) -> float:
        return self.alpha * self.beta

    def laplace(self, h):
        """``int exp(-r h) m(dr) = (1 + beta h)^(-alpha)``."""
        return (1.0 + self.beta * np.asarray(h, dtype=float)) ** (-self.alpha)

    def cdf(self, r):
        return special.gammainc(self.alpha, np.asarray(r, dtype=float) / self.beta)

    def ppf(self, p):
        """Quantile function through the inverse regularised incomplete gamma."""
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0) | (p >= 1)):
            raise DomainError("quantile probabilities must lie in (0, 1)")
        return self.beta * special.gammaincinv(self.alpha, p)

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            logpdf = (
                (self.alpha - 1.0) * np.log(r)
                - r / self.beta
                - special.gammaln(self.alpha)
                - self.alpha * math.log(self.beta)
            )
        return np.where(r > 0, np.exp(logpdf), 0.0)


@dataclass(frozen=True)
class TemperedStableLevy:
    """Tempered stable Levy measure ``a1 exp(-a2 z) z^{-(1+a3)} dz``.

    ``epsilon`` is the regularisation exponent: each jump ``z`` of the driving
    subordinator enters the discharge as ``z ** kappa`` with
    ``kappa = 1 / (1 + epsilon)``.
    """

    a1: float
    a2: float
    a3: float
    epsilon: float = 0.1

    def __post_init__(self):
        if not self.a1 > 0:
            raise DomainError(f"a1 must be positive, got {self.a1}")
        if not self.a2 > 0:
            raise DomainError(f"a2 must be positive, got {self.a2}")
        if not self.a3 < 1:
            raise DomainError(f"a3 must be < 1, got {self.a3}")
        if not self.epsilon >= 0:
            raise DomainError(f"epsilon must be nonnegative, got {self.epsilon}")

    @property
    def kappa(self) -> float:
        return 1.0 / (1.0 + self.epsilon)

    @property
    def finite_activity(self) -> bool:
        return self.a3 < 0

    def density(self, z):
        z = np.asarray(z, dtype=float)
        return self.a1 * np.exp(-self.a2 * z) * z ** (-(1.0 + self.a3))

    def total_mass(self) -> float:
        """``nu((0, inf))``; infinite when ``a3 >= 0``."""
        if self.a3 >= 0:
            return math.inf
        return self.a1 * math.gamma(-self.a3) * self.a2**self.a3

    def with_epsilon(self, epsilon: float) -> "TemperedStableLevy":
        return TemperedStableLevy(self.a1, self.a2, self.a3, epsilon)


@dataclass(frozen=True)
class QuadratureGrid:
    """Discrete approximation ``sum_j w_j delta_{x_j}`` of a probability measure."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        weights = np.ascontiguousarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape or nodes.size == 0:
            raise DomainError("nodes and weights must be equal-length 1-D arrays")
        if np.any(nodes <= 0) or np.any(np.diff(nodes) <= 0):
            raise DomainError("nodes must be positive and strictly increasing")
        if np.any(weights <= 0):
            raise DomainError("weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights must sum to 1, got {weights.sum()!r}")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def inv_first_moment(m: GammaMeasure) -> float:
    """``int r^{-1} m(dr) = 1 / (beta (alpha - 1))``; needs ``alpha > 1``."""
    if m.alpha <= 1:
        raise DomainError(
            f"int r^-1 m(dr) diverges for gamma shape {m.alpha} <= 1 "
            "(invalid recession measure)"
        )
    return 1.0 / (m.beta * (m.alpha - 1.0))


def _moment_exponent(nu: TemperedStableLevy, k: float) -> float:
    s = k * nu.kappa - nu.a3
    if s <= 0:
        raise DomainError(
            f"regularised moment of order {k} diverges (Gamma argument {s} <= 0)"
        )
    return s


def levy_moment(nu: TemperedStableLevy, k: float) -> float:
    """Regularised jump moment ``M_k = int z^{k/(1+eps)} nu(dz)``.

    Closed form ``a1 Gamma(s) a2^{-s}`` with ``s = k/(1+eps) - a3``.
    """
    s = _moment_exponent(nu, k)
    return nu.a1 * math.exp(special.gammaln(s) - s * math.log(nu.a2))


def truncated_levy_moment(nu: TemperedStableLevy, k: float, z_max: float) -> float:
    """``int_0^{z_max} z^{k/(1+eps)} nu(dz)``, the part carried by small jumps."""
    if z_max <= 0:
        return 0.0
    s = _moment_exponent(nu, k)
    return levy_moment(nu, k) * float(special.gammainc(s, nu.a2 * z_max))


def levy_tail_rate(nu: TemperedStableLevy, z_min: float) -> float:
    """Intensity ``nu((z_min, inf))`` of jumps larger than ``z_min``."""
    a1, a2, a3 = nu.a1, nu.a2, nu.a3
    if z_min <= 0:
        return nu.total_mass()
    x = a2 * z_min
    if a3 < 0:
        s = -a3
        upper = special.gammaincc(s, x) * math.gamma(s)
    elif a3 == 0:
        upper = special.exp1(x)
    else:
        # Gamma(-a3, x) from Gamma(1 - a3, x) by the downward recurrence.
        g1 = special.gammaincc(1.0 - a3, x) * math.gamma(1.0 - a3)
        upper = (x ** (-a3) * math.exp(-x) - g1) / a3
    return float(a1 * a2**a3 * upper)


def quantile_grid(m: GammaMeasure, count: int) -> QuadratureGrid:
    """Equal-weight grid at the midpoint quantiles ``(j - 1/2) / count``."""
    count = int(count)
    if count < 1:
        raise DomainError("grid size must be >= 1")
    probs = (np.arange(1, count + 1) - 0.5) / count
    nodes = m.ppf(probs)
    return QuadratureGrid(nodes, np.full(count, 1.0 / count))


def harmonic_quantile_grid(m: GammaMeasure, count: int) -> QuadratureGrid:
    """Equal-probability bins with each node at its bin's harmonic mean.

    The bins are ``[q_{(j-1)/N}, q_{j/N}]``; the node of bin ``j`` is
    ``(1/N) / int_bin r^{-1} m(dr)``, so ``sum_j w_j / r_j`` equals
    ``inv_first_moment(m)`` exactly.  The midpoint rule converges like
    ``N^{-(1 - 1/alpha)}`` for ``1/r``, which is slow for recession
    measures with ``alpha`` close to 1; this grid removes that bias and is
    the default for the simulated Markovian lift.
    """
    count = int(count)
    if count < 1:
        raise DomainError("grid size must be >= 1")
    inv_first_moment(m)  # domain check
    probs = np.arange(1, count) / count
    x_edges = np.concatenate(([0.0], m.ppf(probs) / m.beta, [np.inf]))
    # int_a^b r^{-1} m(dr) = P_{alpha-1}(b) - P_{alpha-1}(a) / (beta (alpha - 1))
    s = m.alpha - 1.0
    lower = special.gammainc(s, x_edges[:-1])
    upper = np.where(np.isinf(x_edges[1:]), 1.0, special.gammainc(s, np.minimum(x_edges[1:], 1e300)))
    mass = upper - lower
    # the complementary form is more accurate in the upper tail
    tail = x_edges[:-1] > s
    mass[tail] = special.gammaincc(s, x_edges[:-1][tail]) - special.gammaincc(
        s, np.minimum(x_edges[1:][tail], 1e300)
    )
    nodes = m.beta * s / (count * mass)
    return QuadratureGrid(nodes, np.full(count, 1.0 / count))
