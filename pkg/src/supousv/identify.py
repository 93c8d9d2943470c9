"""Calibration of the model from observed discharge and concentration records.

The procedure follows the usual two-stage route for this model class:

1. discharge -- the recession measure from the empirical autocorrelation
   (power-law least squares), then the jump law from mean, variance and
   skewness;
2. water quality -- a seasonal fit of ``log C``, then the reversion measure
   and noise level from the residual's autocorrelation and variance, and,
   when the residual co-varies with discharge, a grid search over the
   reversion shape that matches the observed covariance.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .analytics import (
    SupOUSVParams,
    _as_grid,
    discharge_cumulants,
    drift_integrals,
    DischargeModel,
)
from .errors import DataError, OptimizationError
from .measures import GammaMeasure, TemperedStableLevy, inv_first_moment
from .simulate import DAYS_PER_YEAR, SeasonalModel

__all__ = [
    "TimeSeries",
    "EmpiricalStats",
    "EmpiricalACF",
    "AcfFit",
    "LevyFit",
    "XFit",
    "FitReport",
    "empirical_stats",
    "empirical_acf",
    "empirical_covariance",
    "fit_seasonal",
    "fit_pi",
    "fit_rho",
    "fit_levy",
    "fit_x_uncoupled",
    "fit_x_coupled",
]

log = logging.getLogger(__name__)

GAP_DAYS = 90.0
KINDS = ("discharge", "concentration", "log_residual")


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    kind: str = "discharge"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise DataError("times and values must be 1-D arrays of equal length")
        if self.kind not in KINDS:
            raise DataError(f"kind must be one of {KINDS}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise DataError("series contains NaN or infinite entries")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise DataError("times must be strictly increasing")
        if self.kind == "concentration" and np.any(v <= 0):
            bad = int(np.flatnonzero(v <= 0)[0])
            raise DataError(f"non-positive concentration at index {bad}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size

    def is_regular(self, rtol: float = 1e-6) -> bool:
        if self.times.size < 3:
            return True
        dt = np.diff(self.times)
        return bool(np.all(np.abs(dt - dt[0]) <= rtol * dt[0]))


@dataclass(frozen=True)
class EmpiricalStats:
    mean: float
    variance: float
    skewness_normalized: float
    kurtosis_normalized: float
    n: int

    @property
    def degenerate(self) -> bool:
        """True when the sample has no spread (higher moments undefined)."""
        return self.variance == 0

    def to_dict(self):
        return {
            "mean": self.mean,
            "variance": self.variance,
            "skewness": _none_if_nan(self.skewness_normalized),
            "kurtosis": _none_if_nan(self.kurtosis_normalized),
            "n": self.n,
        }


def _none_if_nan(x):
    return None if x is None or not math.isfinite(x) else x


def empirical_stats(s) -> EmpiricalStats:
    """Mean, unbiased variance and normalised skewness / kurtosis.

    Skewness and kurtosis use biased central moments ``m3 / m2^1.5`` and
    ``m4 / m2^2``; they are NaN for a constant series.
    """
    v = s.values if isinstance(s, TimeSeries) else np.asarray(s, dtype=float)
    n = v.size
    if n < 2:
        raise DataError("at least two observations are needed")
    mean = float(v.mean())
    dev = v - mean
    m2 = float(np.mean(dev**2))
    var = m2 * n / (n - 1)
    if m2 == 0:
        return EmpiricalStats(mean, 0.0, math.nan, math.nan, n)
    m3 = float(np.mean(dev**3))
    m4 = float(np.mean(dev**4))
    return EmpiricalStats(mean, var, m3 / m2**1.5, m4 / m2**2, n)


def empirical_covariance(x: TimeSeries, y: TimeSeries, tol: float = 1e-6) -> float:
    """Sample covariance over the common timestamps of two series.

    Timestamps are matched within ``tol`` days; the discharge series is
    usually the denser one, so ``y`` is looked up at the times of ``x``.
    """
    idx = np.searchsorted(y.times, x.times)
    idx = np.clip(idx, 1, max(y.times.size - 1, 1))
    left = idx - 1
    pick = np.where(np.abs(y.times[left] - x.times) <= np.abs(y.times[idx] - x.times), left, idx)
    ok = np.abs(y.times[pick] - x.times) <= tol
    if ok.sum() < 2:
        raise DataError("fewer than two common timestamps between the series")
    a = x.values[ok]
    b = y.values[pick[ok]]
    return float(np.mean((a - a.mean()) * (b - b.mean())))


@dataclass
class EmpiricalACF:
    lags: np.ndarray
    values: np.ndarray  # NaN where a lag bin has no pairs
    counts: np.ndarray

    def pairs(self):
        """``[(lag, acf or None), ...]``."""
        return [(float(h), None if not np.isfinite(v) else float(v))
                for h, v in zip(self.lags, self.values)]

    def valid(self, max_lag: float | None = None, include_zero: bool = False):
        ok = np.isfinite(self.values)
        if not include_zero:
            ok &= self.lags > 0
        if max_lag is not None:
            ok &= self.lags <= max_lag + 1e-9
        return self.lags[ok], self.values[ok]


def _regular_acf(v, max_k):
    n = v.size
    dev = v - v.mean()
    var = float(np.dot(dev, dev)) / n
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(dev, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_k + 1]
    counts = n - np.arange(max_k + 1)
    # mean of the lag-k products over the (biased) variance
    return acov / counts / var, counts


def empirical_acf(s: TimeSeries, max_lag: float, bin_width: float | None = None,
                  gap: float = GAP_DAYS) -> EmpiricalACF:
    """Sample autocorrelation up to ``max_lag`` days.

    Regularly sampled series use the lag-``k`` estimator (mean of the
    products of deviations at separation ``k``, divided by the variance).
    Irregular series are binned: bin ``k`` collects the pairs whose time
    separation lies within ``bin_width / 2`` of ``k * bin_width``; pairs
    straddling a gap longer than ``gap`` days are left out.  Empty bins are
    reported as NaN.  Lag 0 is 1 by definition.
    """
    v = s.values
    n = v.size
    if n < 2:
        raise DataError("at least two observations are needed")
    if not max_lag > 0:
        raise DataError("max_lag must be positive")
    dev = v - v.mean()
    var = float(np.dot(dev, dev)) / n
    if var == 0:
        raise DataError("constant series has no autocorrelation")
    dts = np.diff(s.times)
    if s.is_regular() and not np.any(dts > gap):
        dt = float(dts[0]) if n > 1 else 1.0
        step = 1 if bin_width is None else max(1, int(round(bin_width / dt)))
        max_k = min(int(math.floor(max_lag / dt + 1e-9)), n - 1)
        acf, counts = _regular_acf(v, max_k)
        ks = np.arange(0, max_k + 1, step)
        vals = acf[ks].copy()
        vals[0] = 1.0
        return EmpiricalACF(ks * dt, vals, counts[ks].astype(np.int64))

    if bin_width is None:
        bin_width = float(np.median(dts))
    if not bin_width > 0:
        raise DataError("bin_width must be positive")
    n_bins = int(math.floor(max_lag / bin_width + 1e-9)) + 1
    seg = np.concatenate(([0], np.cumsum(dts > gap)))
    sums = np.zeros(n_bins)
    counts = np.zeros(n_bins, dtype=np.int64)
    edge = (n_bins - 0.5) * bin_width
    for off in range(1, n):
        sep = s.times[off:] - s.times[:-off]
        keep = (sep < edge) & (seg[off:] == seg[:-off])
        if not keep.any():
            if sep.min() >= edge:
                break
            continue
        b = np.floor(sep[keep] / bin_width + 0.5).astype(np.int64)
        prod = dev[off:][keep] * dev[:-off][keep]
        sums += np.bincount(b, weights=prod, minlength=n_bins)[:n_bins]
        counts += np.bincount(b, minlength=n_bins)[:n_bins]
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = np.where(counts > 0, sums / (counts * var), np.nan)
    vals[0] = 1.0
    counts[0] = max(counts[0], n)
    return EmpiricalACF(np.arange(n_bins) * bin_width, vals, counts)


# --------------------------------------------------------------------------
# seasonal component
# --------------------------------------------------------------------------

def fit_seasonal(c: TimeSeries, n_harmonics: int = 2, period: float = DAYS_PER_YEAR):
    """Least-squares harmonic fit of ``log C``.

    Returns the :class:`SeasonalModel` and the residual ``log C - log C_bar
    - S(t)`` as a ``log_residual`` series (zero mean up to rounding since
    the design contains an intercept).
    """
    if np.any(c.values <= 0):
        raise DataError("concentrations must be positive")
    t = c.times
    y = np.log(c.values)
    cols = [np.ones_like(t)]
    for i in range(1, n_harmonics + 1):
        w = 2.0 * np.pi * i * t / period
        cols += [np.sin(w), np.cos(w)]
    A = np.column_stack(cols)
    coef, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    if rank < A.shape[1]:
        raise DataError("sampling times do not resolve the requested harmonics")
    harmonics = []
    for i in range(n_harmonics):
        a, b = coef[1 + 2 * i], coef[2 + 2 * i]
        # a sin(w) + b cos(w) = A sin(w + B)
        harmonics.append((float(math.hypot(a, b)), float(math.atan2(b, a))))
    resid = y - A @ coef
    resid = resid - resid.mean()  # remove rounding residue of the intercept
    model = SeasonalModel(float(math.exp(coef[0])), tuple(harmonics), period)
    return model, TimeSeries(t, resid, "log_residual")


# --------------------------------------------------------------------------
# power-law autocorrelation fits
# --------------------------------------------------------------------------

@dataclass
class AcfFit:
    """Result of fitting ``(1 + beta h)^(-shape)`` to an empirical ACF."""

    measure: GammaMeasure
    objective: float
    n_points: int
    flags: list = field(default_factory=list)

    @property
    def alpha(self):
        return self.measure.alpha

    @property
    def beta(self):
        return self.measure.beta


_LOG_BOUND = 30.0


def _acf_points(acf, max_lag):
    if isinstance(acf, EmpiricalACF):
        h, v = acf.valid(max_lag)
    else:
        arr = np.array([(a, np.nan if b is None else b) for a, b in acf], dtype=float)
        if arr.size == 0:
            raise DataError("empty autocorrelation input")
        h, v = arr[:, 0], arr[:, 1]
        ok = np.isfinite(v) & (h > 0)
        if max_lag is not None:
            ok &= h <= max_lag + 1e-9
        h, v = h[ok], v[ok]
    return h, v


def _power_law_fit(h, v, offset, starts):
    """Minimise ``sum (v - (1 + beta h)^-(alpha - offset))^2`` over log-params."""
    if h.size < 2:
        raise DataError("at least two nonzero lags are needed for a two-parameter fit")

    def model(theta):
        s, b = np.clip(theta, -_LOG_BOUND, _LOG_BOUND)
        return np.exp(-math.exp(s) * np.log1p(math.exp(b) * h))

    def obj(theta):
        r = v - model(theta)
        return float(np.dot(r, r))

    best = None
    for s0, b0 in starts:
        res = optimize.minimize(obj, [math.log(s0), math.log(b0)], method="Nelder-Mead",
                                options=dict(xatol=1e-10, fatol=1e-18, maxiter=4000, maxfev=8000))
        if best is None or res.fun < best.fun:
            best = res
    # polish from the best start
    res = optimize.minimize(obj, best.x, method="Nelder-Mead",
                            options=dict(xatol=1e-12, fatol=1e-20, maxiter=8000, maxfev=16000))
    if res.fun <= best.fun:
        best = res
    if not np.all(np.isfinite(best.x)):
        raise OptimizationError("power-law ACF fit failed", best=best.x, objective=best.fun)
    shape = math.exp(np.clip(best.x[0], -_LOG_BOUND, _LOG_BOUND)) + offset
    beta = math.exp(np.clip(best.x[1], -_LOG_BOUND, _LOG_BOUND))
    flags = []
    if best.x[1] < -15:
        flags.append("beta_at_lower_bound")
    if best.x[0] > 8:
        flags.append("shape_at_upper_bound")
    return shape, beta, float(best.fun), flags


_STARTS = [(s, b) for s in (0.2, 1.0, 3.0, 10.0) for b in (0.05, 1.0)]


def fit_pi(acf, max_lag: float = 30.0) -> AcfFit:
    """Recession measure from ``AC_Y(h) = (1 + beta_r h)^{-(alpha_r - 1)}``."""
    h, v = _acf_points(acf, max_lag)
    if h.size < 2:
        raise DataError("need at least two nonzero lags to fit the recession measure")
    shape, beta, obj, flags = _power_law_fit(h, v, 1.0, _STARTS)
    if "shape_at_upper_bound" in flags:
        flags.append("exponential_like_decay")
    return AcfFit(GammaMeasure(shape, beta), obj, int(h.size), flags)


def fit_rho(acf, max_lag: float = 730.0) -> AcfFit:
    """Reversion measure from ``AC_X(h) = (1 + beta_R h)^{-alpha_R}`` (``mu = 0``)."""
    h, v = _acf_points(acf, max_lag)
    if h.size < 2:
        raise DataError("need at least two nonzero lags to fit the reversion measure")
    shape, beta, obj, flags = _power_law_fit(h, v, 0.0, _STARTS)
    return AcfFit(GammaMeasure(shape, beta), obj, int(h.size), flags)


# --------------------------------------------------------------------------
# jump law by moment matching
# --------------------------------------------------------------------------

@dataclass
class LevyFit:
    levy: TemperedStableLevy
    objective: float
    model: dict
    converged: bool


def _discharge_moments(a1, a2, a3, eps, J):
    k = 1.0 / (1.0 + eps)

    def m(j):
        s = j * k - a3
        return a1 * math.exp(special.gammaln(s) - s * math.log(a2))

    m1, m2, m3 = m(1), m(2), m(3)
    mean = m1 * J
    var = 0.5 * m2 * J
    skew = (m3 * J / 3.0) / var**1.5
    return mean, var, skew


def _moment_start(a3, eps, stats, J):
    """``(a1, a2)`` matching mean and variance exactly for a given ``a3``."""
    k = 1.0 / (1.0 + eps)
    g1 = math.exp(special.gammaln(k - a3))
    g2 = math.exp(special.gammaln(2 * k - a3))
    a2 = (g2 / (2.0 * g1) * stats.mean / stats.variance) ** (1.0 / k)
    a1 = stats.mean / (J * g1 * a2 ** (a3 - k))
    return a1, a2


def fit_levy(stats: EmpiricalStats, pi: GammaMeasure, eps: float = 0.1,
             tol: float = 1e-10) -> LevyFit:
    """Tempered stable jump law matching discharge mean, variance and skewness.

    Minimises the sum of squared relative errors of the three statistics.
    For any ``a3`` the mean and variance fix ``(a1, a2)`` in closed form, so
    the starts lie on that curve over a grid of ``a3``; a root of the
    remaining skewness equation, when it exists, is added as a start.
    Each start is refined by Nelder-Mead over ``(log a1, log a2, a3)``.
    """
    if stats.variance <= 0 or not math.isfinite(stats.skewness_normalized):
        raise DataError("discharge statistics are degenerate")
    if stats.mean <= 0:
        raise DataError("discharge mean must be positive")
    J = inv_first_moment(pi)
    k = 1.0 / (1.0 + eps)
    a3_hi = min(1.0, k) - 1e-6
    targets = np.array([stats.mean, stats.variance, stats.skewness_normalized])

    def obj(theta):
        la1, la2, a3 = theta
        if not (-5.0 < a3 < a3_hi) or abs(la1) > 60 or abs(la2) > 60:
            return 1e6
        model = np.array(_discharge_moments(math.exp(la1), math.exp(la2), a3, eps, J))
        return float(np.sum(((targets - model) / targets) ** 2))

    def skew_gap(a3):
        a1, a2 = _moment_start(a3, eps, stats, J)
        return _discharge_moments(a1, a2, a3, eps, J)[2] - stats.skewness_normalized

    starts = []
    grid = np.linspace(-4.5, a3_hi - 1e-3, 8)
    for a3 in grid:
        a1, a2 = _moment_start(a3, eps, stats, J)
        starts.append((math.log(a1), math.log(a2), a3))
    gaps = [skew_gap(a3) for a3 in grid]
    for lo, hi, glo, ghi in zip(grid[:-1], grid[1:], gaps[:-1], gaps[1:]):
        if glo * ghi < 0:
            root = optimize.brentq(skew_gap, lo, hi, xtol=1e-14)
            a1, a2 = _moment_start(root, eps, stats, J)
            starts.insert(0, (math.log(a1), math.log(a2), root))

    best = None
    for s in starts:
        res = optimize.minimize(obj, s, method="Nelder-Mead",
                                options=dict(xatol=1e-12, fatol=1e-22, maxiter=6000, maxfev=12000))
        if best is None or res.fun < best.fun:
            best = res
        if best.fun < tol * 1e-3:
            break
    la1, la2, a3 = best.x
    levy = TemperedStableLevy(math.exp(la1), math.exp(la2), float(a3), eps)
    mean, var, skew = _discharge_moments(levy.a1, levy.a2, levy.a3, eps, J)
    converged = best.fun < tol
    if not converged:
        warnings.warn(f"jump-law moment fit residual {best.fun:.3g} above tolerance {tol:g}",
                      RuntimeWarning, stacklevel=2)
    return LevyFit(levy, float(best.fun), {"mean": mean, "variance": var, "skewness": skew},
                   converged)


# --------------------------------------------------------------------------
# log-concentration process
# --------------------------------------------------------------------------

@dataclass
class XFit:
    rho: GammaMeasure
    sigma: float
    mu: float
    objective: float
    flags: list = field(default_factory=list)


def fit_x_uncoupled(acf, var_x: float, mean_y: float, max_lag: float = 730.0) -> XFit:
    """``mu = 0`` calibration: power-law ACF for ``rho`` and
    ``sigma = sqrt(2 Var(X) / E[Y])``."""
    if var_x < 0 or mean_y <= 0:
        raise DataError("need Var(X) >= 0 and E[Y] > 0")
    fit = fit_rho(acf, max_lag)
    sigma = math.sqrt(2.0 * var_x / mean_y)
    return XFit(fit.measure, sigma, 0.0, fit.objective, list(fit.flags))


@dataclass
class FitReport:
    params: SupOUSVParams
    w: float
    objectives: dict
    diagnostics: dict
    seasonal: SeasonalModel | None = None
    coupled: bool = True

    def to_dict(self):
        p = self.params
        out = {
            "params": {
                "pi": {"alpha": p.pi.alpha, "beta": p.pi.beta},
                "rho": {"alpha": p.rho.alpha, "beta": p.rho.beta},
                "levy": {"a1": p.levy.a1, "a2": p.levy.a2, "a3": p.levy.a3,
                         "epsilon": p.levy.epsilon},
                "sigma": p.sigma,
                "mu": p.mu,
            },
            "w": self.w,
            "coupled": self.coupled,
            "objectives": dict(self.objectives),
            "diagnostics": dict(self.diagnostics),
        }
        if self.seasonal is not None:
            out["seasonal"] = {
                "c_bar": self.seasonal.c_bar,
                "harmonics": [list(h) for h in self.seasonal.harmonics],
                "period": self.seasonal.period,
            }
        return out


def _fit_w(h, v, i1, i23, t0):
    """1-D least squares for ``w >= 0`` in ``(I1 + w I23) / (1 + w T)``."""

    def obj(w):
        r = v - (i1 + w * i23) / (1.0 + w * t0)
        return float(np.dot(r, r))

    ws = np.concatenate(([0.0], np.logspace(-4, 4, 33)))
    vals = [obj(w) for w in ws]
    k = int(np.argmin(vals))
    lo = ws[max(k - 1, 0)]
    hi = ws[min(k + 1, ws.size - 1)]
    if hi == lo:
        return ws[k], vals[k]
    res = optimize.minimize_scalar(obj, bounds=(lo, hi), method="bounded",
                                   options=dict(xatol=1e-10 * max(hi, 1.0)))
    if res.fun <= vals[k]:
        return float(res.x), float(res.fun)
    return float(ws[k]), float(vals[k])


def fit_x_coupled(acf, stats_x: EmpiricalStats, stats_y: EmpiricalStats, cov_xy: float,
                  discharge: DischargeModel, alpha_grid_step: float = 0.005,
                  max_lag: float = 730.0, span: float = 0.5, grid_size: int = 2048,
                  coarse_factor: int = 10) -> FitReport:
    """Two-stage calibration of ``(rho, sigma, mu)`` with discharge coupling.

    Stage 1 fits ``(alpha_a, beta_a)`` as if ``mu = 0``.  Stage 2 keeps
    ``beta_R = beta_a`` and scans ``alpha_R`` (coarse pass with step
    ``coarse_factor * alpha_grid_step`` over ``alpha_a (1 -/+ span)``, then a
    fine pass with ``alpha_grid_step`` around the coarse optimum).  For each
    candidate the drift weight ``w >= 0`` is fitted to the ACF, ``sigma``
    follows from matching Var(X) exactly and ``|mu|`` from ``w``; the sign of
    ``mu`` is that of the observed covariance.  The candidate whose model
    covariance is closest (relative error) to ``cov_xy`` wins; ties go to the
    smallest ``alpha_R``.
    """
    levy, pi = discharge.levy, discharge.pi
    stage1 = fit_x_uncoupled(acf, stats_x.variance, stats_y.mean, max_lag)
    alpha_a, beta_a = stage1.rho.alpha, stage1.rho.beta
    if cov_xy == 0:
        params = SupOUSVParams(levy, pi, stage1.rho, stage1.sigma, 0.0)
        return FitReport(params, 0.0, {"acf": stage1.objective},
                         {"alpha_a": alpha_a, "beta_a": beta_a, "route": "uncoupled",
                          "cov_empirical": 0.0, "cov_model": 0.0, "cov_rel_error": 0.0,
                          "var_x_empirical": stats_x.variance,
                          "var_x_model": 0.5 * stage1.sigma**2 * stats_y.mean},
                         coupled=False)
    h, v = _acf_points(acf, max_lag)
    if h.size < 2:
        raise DataError("need at least two nonzero lags")
    J = inv_first_moment(pi)
    grid_pi = _as_grid(pi, grid_size)
    sign = 1.0 if cov_xy > 0 else -1.0

    def candidate(alpha_R):
        rho = GammaMeasure(alpha_R, beta_a)
        grid_rho = _as_grid(rho, grid_size)
        tab = drift_integrals(grid_pi, grid_rho)
        i1 = rho.laplace(h)
        i23 = tab.i2(h) + tab.i3(h)
        w, acf_obj = _fit_w(h, v, i1, i23, tab.i2_zero)
        scale = 1.0 + w * tab.i2_zero
        sigma = math.sqrt(2.0 * stats_x.variance / (stats_y.mean * scale))
        mu = sign * math.sqrt(w * sigma**2 * stats_y.mean * J / (2.0 * stats_y.variance))
        # model covariance with the empirical discharge moments
        cov_model = mu * stats_y.variance / J * tab.covariance_integral
        rel = abs(cov_model - cov_xy) / abs(cov_xy)
        var_model = 0.5 * sigma**2 * stats_y.mean * scale
        return dict(alpha_R=alpha_R, rho=rho, w=w, sigma=sigma, mu=mu, acf_obj=acf_obj,
                    cov_model=cov_model, rel=rel, var_model=var_model)

    def scan(alphas):
        out = []
        for a in alphas:
            try:
                out.append(candidate(float(a)))
            except (ValueError, FloatingPointError, ZeroDivisionError) as exc:
                log.debug("candidate alpha_R=%g failed: %s", a, exc)
        return out

    coarse = coarse_factor * alpha_grid_step
    lo = max(alpha_grid_step, alpha_a * (1.0 - span))
    hi = alpha_a * (1.0 + span)
    cands = scan(np.arange(lo, hi + 0.5 * coarse, coarse))
    if not cands:
        raise OptimizationError("no admissible alpha_R candidate on the coarse grid")
    best = min(cands, key=lambda c: (c["rel"], c["alpha_R"]))
    centre = best["alpha_R"]
    fine = np.arange(max(alpha_grid_step, centre - coarse), centre + coarse + 0.5 * alpha_grid_step,
                     alpha_grid_step)
    cands += scan(fine)
    best = min(cands, key=lambda c: (c["rel"], c["alpha_R"]))

    params = SupOUSVParams(levy, pi, best["rho"], best["sigma"], best["mu"])
    diagnostics = {
        "alpha_a": alpha_a,
        "beta_a": beta_a,
        "route": "coupled",
        "cov_empirical": cov_xy,
        "cov_model": best["cov_model"],
        "cov_rel_error": best["rel"],
        "var_x_empirical": stats_x.variance,
        "var_x_model": best["var_model"],
        "n_candidates": len(cands),
    }
    return FitReport(params, best["w"], {"acf_stage1": stage1.objective, "acf": best["acf_obj"],
                                         "covariance": best["rel"]}, diagnostics)
