"""Monte-Carlo simulation of the finite-dimensional Markovian lift.

Discharge is the sum of ``i_r`` jump-driven OU components, each decaying at
its own recession rate; the log-concentration ``X`` is the sum of ``i_R``
components with reversion rates ``R_j``, forced by the discharge anomaly and
by Brownian noise whose intensity scales with the square root of discharge.

Recession components are advanced exactly (geometric decay + jumps); the
``X`` components use explicit Euler-Maruyama.  All randomness is drawn in
blocks from two independent generators spawned from the seed (one for jumps,
one for Brownian increments) and handed to the stepping kernel, so the
compiled and numpy kernels consume identical random inputs.
"""

from __future__ import annotations

import logging
import math
from functools import lru_cache
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import kernels
from .analytics import _as_grid
from .errors import ConfigError, DataError
from .measures import (
    GammaMeasure,
    QuadratureGrid,
    harmonic_quantile_grid,
    TemperedStableLevy,
    levy_moment,
    levy_tail_rate,
    truncated_levy_moment,
)

__all__ = [
    "SimConfig",
    "SamplePath",
    "SeasonalModel",
    "CDEvent",
    "JumpSampler",
    "default_z_min",
    "sample_jumps",
    "simulate_supou",
    "simulate_supousv",
    "simulate_classical_sv",
    "reconstruct_wqi",
    "daily_average",
    "extract_cd_events",
    "lift_mean",
    "lift_grids",
]

log = logging.getLogger(__name__)

DAYS_PER_YEAR = 365.25
# truncated small jumps may carry at most this share of the second moment
SMALL_JUMP_TOL = 1e-4
_BLOCK_BUDGET = 1 << 20  # normals drawn per block


@dataclass(frozen=True)
class SimConfig:
    """Time stepping and lift resolution.

    ``stride`` thins the recorded path (one sample every ``stride`` steps);
    the dynamics always advance with step ``dt``.  ``lift_grid`` selects the
    recession-rate nodes: ``"harmonic"`` (bin harmonic means, reproduces the
    mean discharge exactly) or ``"midpoint"`` (plain midpoint quantiles).
    """

    dt: float = 0.02
    burn_in: float = 50 * DAYS_PER_YEAR
    horizon: float = 200 * DAYS_PER_YEAR
    i_r: int = 256
    i_R: int = 256
    seed: int = 20250101
    stride: int = 1
    lift_grid: str = "harmonic"

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.burn_in >= 0:
            raise ConfigError("burn_in must be nonnegative")
        if not self.horizon >= self.dt:
            raise ConfigError("horizon must be at least one step")
        if self.i_r < 1 or self.i_R < 1:
            raise ConfigError("lift sizes must be >= 1")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.lift_grid not in ("harmonic", "midpoint"):
            raise ConfigError("lift_grid must be 'harmonic' or 'midpoint'")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def n_burn(self) -> int:
        return int(round(self.burn_in / self.dt))

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class SamplePath:
    times: np.ndarray
    y: np.ndarray
    x: np.ndarray | None = None
    components_y: np.ndarray | None = None
    components_x: np.ndarray | None = None
    t0: float = 0.0

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class SeasonalModel:
    """``C = c_bar * exp(S(t) + X)`` with ``S(t) = sum_i A_i sin(2 pi i t / T + B_i)``."""

    c_bar: float
    harmonics: tuple = ()
    period: float = DAYS_PER_YEAR

    def __post_init__(self):
        if not self.c_bar > 0:
            raise ConfigError("c_bar must be positive")
        if not self.period > 0:
            raise ConfigError("period must be positive")
        object.__setattr__(
            self, "harmonics", tuple((float(a), float(b)) for a, b in self.harmonics)
        )

    def seasonal(self, t):
        t = np.asarray(t, dtype=float)
        s = np.zeros_like(t)
        for i, (a, b) in enumerate(self.harmonics, start=1):
            s = s + a * np.sin(2.0 * np.pi * i * t / self.period + b)
        return s

    def concentration(self, t, x):
        return self.c_bar * np.exp(self.seasonal(t) + np.asarray(x, dtype=float))


def default_z_min(nu: TemperedStableLevy, tol: float = SMALL_JUMP_TOL) -> float:
    """Truncation level for infinite-activity jump laws.

    Jumps below ``z_min`` carry a fraction ``tol`` of the second regularised
    moment; their mean contribution is restored as a deterministic inflow
    (see :func:`small_jump_drift`).  Finite-activity laws are not truncated.
    """
    if nu.finite_activity:
        return 0.0
    s = 2.0 * nu.kappa - nu.a3
    return float(special.gammaincinv(s, tol) / nu.a2)


def small_jump_drift(nu: TemperedStableLevy, z_min: float) -> float:
    """Mean inflow per unit time of the regularised jumps below ``z_min``."""
    return truncated_levy_moment(nu, 1, z_min)


class JumpSampler:
    """Jumps of a tempered stable subordinator above ``z_min``.

    The jumps form a compound Poisson process with intensity
    ``nu((z_min, inf))``.  Sizes are drawn by rejection: from the untempered
    stable (Pareto) law and accepted with probability
    ``exp(-a2 (z - z_min))`` when ``a3 > 0``; from a piecewise envelope when
    ``a3 == 0``; exactly from a gamma law when ``a3 < 0`` (finite activity).
    """

    def __init__(self, nu: TemperedStableLevy, z_min: float | None = None):
        if nu.a3 >= 1:
            raise ConfigError("tempered stable index a3 must be < 1")
        self.nu = nu
        self.z_min = default_z_min(nu) if z_min is None else float(z_min)
        if not nu.finite_activity and self.z_min <= 0:
            raise ConfigError("infinite-activity sampling needs z_min > 0")
        self.rate = levy_tail_rate(nu, self.z_min)
        self.drift = small_jump_drift(nu, self.z_min)
        if nu.a3 == 0:
            b = 1.0 / nu.a2
            if self.z_min >= b:
                b = 2.0 * self.z_min
            self._b = b
            m_body = math.exp(-nu.a2 * self.z_min) * math.log(b / self.z_min)
            m_tail = b**-1.0 * math.exp(-nu.a2 * b) / nu.a2
            self._p_body = m_body / (m_body + m_tail)

    def raw_sizes(self, n: int, rng: np.random.Generator) -> np.ndarray:
        nu = self.nu
        if n == 0:
            return np.empty(0)
        if nu.a3 < 0:
            return rng.gamma(-nu.a3, 1.0 / nu.a2, size=n)
        out = np.empty(n)
        filled = 0
        while filled < n:
            need = n - filled
            m = int(need * 1.1) + 16
            if nu.a3 > 0:
                z = self.z_min * rng.random(m) ** (-1.0 / nu.a3)
                acc = rng.random(m) < np.exp(-nu.a2 * (z - self.z_min))
            else:
                body = rng.random(m) < self._p_body
                u = rng.random(m)
                z_body = self.z_min * (self._b / self.z_min) ** u
                z_tail = self._b + rng.exponential(1.0 / nu.a2, size=m)
                z = np.where(body, z_body, z_tail)
                ratio = np.where(
                    body, np.exp(-nu.a2 * (z - self.z_min)), self._b / z
                )
                acc = rng.random(m) < ratio
            z = z[acc][:need]
            out[filled:filled + z.size] = z
            filled += z.size
        return out

    def sizes(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Regularised jump sizes ``z ** (1 / (1 + eps))``."""
        z = self.raw_sizes(n, rng)
        if self.nu.epsilon == 0:
            return z
        return z**self.nu.kappa

    def counts(self, dt: float, n_steps: int, rng: np.random.Generator) -> np.ndarray:
        return rng.poisson(self.rate * dt, size=n_steps)


def sample_jumps(nu: TemperedStableLevy, dt: float, rng: np.random.Generator,
                 z_min: float | None = None) -> np.ndarray:
    """Regularised jumps of the subordinator over an interval of length ``dt``.

    Only jumps above the truncation level are returned; the mean of the
    truncated ones, ``small_jump_drift(nu, z_min) * dt``, is not included.
    """
    if not dt > 0:
        raise ConfigError("dt must be positive")
    sampler = JumpSampler(nu, z_min)
    n = int(rng.poisson(sampler.rate * dt))
    return sampler.sizes(n, rng)


def lift_mean(nu: TemperedStableLevy, grid_pi: QuadratureGrid) -> float:
    """Stationary mean ``M_1 sum_i c_i / r_i`` of the lifted discharge."""
    return levy_moment(nu, 1) * float(np.dot(grid_pi.weights, 1.0 / grid_pi.nodes))


def _streams(cfg: SimConfig, rng):
    if rng is None:
        ss = np.random.SeedSequence(int(cfg.seed))
        jump_ss, brown_ss = ss.spawn(2)
        return np.random.default_rng(jump_ss), np.random.default_rng(brown_ss)
    jump_rng, brown_rng = rng.spawn(2)
    return jump_rng, brown_rng


def _run(nu, grid_pi, R, d, noise_scale, mu, ybar, cfg, rng, backend):
    kern = backend or kernels
    jump_rng, brown_rng = _streams(cfg, rng)
    sampler = JumpSampler(nu)
    r, c = grid_pi.nodes, grid_pi.weights
    dt = cfg.dt
    decay = np.exp(-r * dt)
    # exact integral of a constant inflow c_i * drift over one step
    inflow = c * sampler.drift * (-np.expm1(-r * dt)) / r
    uniform = np.allclose(c, c[0], rtol=0, atol=1e-15)

    y = np.zeros(r.size)
    x = np.zeros(R.size)
    stride = cfg.stride
    block = stride * max(1, _BLOCK_BUDGET // (max(R.size, 1) * stride))

    n_rec = -(-cfg.n_steps // stride)
    out_y = np.empty(n_rec)
    out_x = np.empty(n_rec)
    scratch = np.empty(2)

    def advance(n, record):
        rec = 0
        done = 0
        while done < n:
            m = min(block, n - done)
            counts = sampler.counts(dt, m, jump_rng)
            total = int(counts.sum())
            sizes = sampler.sizes(total, jump_rng)
            if uniform:
                nodes = jump_rng.integers(0, r.size, size=total)
            else:
                nodes = jump_rng.choice(r.size, size=total, p=c)
            # a jump at a uniform time inside the step has partly decayed by
            # its end, which makes the recorded y exact in law
            sizes *= np.exp(-r[nodes] * (dt * jump_rng.random(total)))
            offsets = np.zeros(m + 1, dtype=np.intp)
            np.cumsum(counts, out=offsets[1:])
            normals = brown_rng.standard_normal((m, R.size))
            if record:
                rec = kern.advance_block(
                    y, x, decay, inflow, R, d, noise_scale, mu, ybar, dt,
                    normals, offsets, nodes.astype(np.intp), sizes, stride,
                    out_y, out_x, rec,
                )
            else:
                kern.advance_block(
                    y, x, decay, inflow, R, d, noise_scale, mu, ybar, dt,
                    normals, offsets, nodes.astype(np.intp), sizes, m,
                    scratch, scratch, 0,
                )
            done += m
        return rec

    advance(cfg.n_burn, record=False)
    n_done = advance(cfg.n_steps, record=True)
    assert n_done == n_rec
    times = np.arange(n_rec) * (stride * dt)
    return SamplePath(times, out_y, out_x, components_y=y, components_x=x,
                      t0=cfg.n_burn * dt)


def _pi_grid(pi, cfg):
    if isinstance(pi, QuadratureGrid):
        return pi
    if cfg.lift_grid == "harmonic":
        return _harmonic_grid(pi.alpha, pi.beta, cfg.i_r)
    return _as_grid(pi, cfg.i_r)


@lru_cache(maxsize=8)
def _harmonic_grid(alpha, beta, size):
    return harmonic_quantile_grid(GammaMeasure(alpha, beta), size)


def lift_grids(p, cfg: SimConfig):
    """Quadrature grids (recession, reversion) used by the simulated lift.

    The reversion grid is ``None`` for a discharge-only model.
    """
    rho = getattr(p, "rho", None)
    return _pi_grid(p.pi, cfg), None if rho is None else _as_grid(rho, cfg.i_R)


def simulate_supou(model, cfg: SimConfig, rng=None, backend=None) -> SamplePath:
    """Simulate discharge only (``x`` of the returned path is ``None``)."""
    grid_pi = _pi_grid(model.pi, cfg)
    zeros = np.zeros(0)
    path = _run(model.levy, grid_pi, zeros, zeros, zeros, 0.0, 0.0,
                cfg, rng, backend)
    path.x = None
    path.components_x = None
    return path


def simulate_supousv(p, cfg: SimConfig, rng=None, backend=None) -> SamplePath:
    """Simulate the coupled discharge / log-concentration lift."""
    grid_pi, grid_rho = lift_grids(p, cfg)
    R, d = grid_rho.nodes, grid_rho.weights
    if R[-1] * cfg.dt > 1:
        warnings.warn(
            f"explicit scheme may be unstable: max(R) * dt = {R[-1] * cfg.dt:.3g} > 1",
            RuntimeWarning,
            stacklevel=2,
        )
    ybar = lift_mean(p.levy, grid_pi)
    noise_scale = p.sigma * np.sqrt(R * d)
    return _run(p.levy, grid_pi, R, d, noise_scale, p.mu, ybar, cfg, rng, backend)


def simulate_classical_sv(p, R: float, cfg: SimConfig, rng=None, backend=None) -> SamplePath:
    """Single-factor baseline ``dX = -R X dt + sigma sqrt(R Y) dB``."""
    if not R > 0:
        raise ConfigError("reversion rate must be positive")
    grid_pi = _pi_grid(p.pi, cfg)
    Rv = np.array([float(R)])
    d = np.array([1.0])
    noise_scale = p.sigma * np.sqrt(Rv)
    return _run(p.levy, grid_pi, Rv, d, noise_scale, 0.0, 0.0, cfg, rng, backend)


def reconstruct_wqi(s: SeasonalModel, path: SamplePath) -> np.ndarray:
    """Concentration ``c_bar * exp(S(t) + X(t))`` along a simulated path."""
    x = path.x if path.x is not None else np.zeros_like(path.times)
    return s.concentration(path.t0 + path.times, x)


def daily_average(times, values):
    """Arithmetic mean of ``values`` within each whole day of ``times``."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    day = np.floor(times + 1e-9).astype(np.int64)
    uniq, inv = np.unique(day, return_inverse=True)
    sums = np.bincount(inv, weights=values)
    cnt = np.bincount(inv)
    return uniq.astype(float), sums / cnt


@dataclass
class CDEvent:
    start: int
    end: int
    y: np.ndarray
    c: np.ndarray
    signed_area: float
    direction: str

    def to_dict(self):
        return {
            "start": self.start,
            "end": self.end,
            "y": self.y.tolist(),
            "c": self.c.tolist(),
            "signed_area": self.signed_area,
            "direction": self.direction,
        }


def _loop_orientation(ly, lc, mixed_fraction):
    xs = np.append(ly, ly[0])
    ys = np.append(lc, lc[0])
    cross = xs[:-1] * ys[1:] - xs[1:] * ys[:-1]
    area = 0.5 * cross.sum()
    # fan triangulation about the first vertex measures how much of the
    # enclosed area cancels between lobes of opposite orientation
    ox, oy = ly[0], lc[0]
    fan = 0.5 * ((ly[1:-1] - ox) * (lc[2:] - oy) - (ly[2:] - ox) * (lc[1:-1] - oy))
    gross = np.abs(fan).sum()
    if gross == 0 or abs(area) < mixed_fraction * gross:
        return area, "mixed"
    return area, "counterclockwise" if area > 0 else "clockwise"


def extract_cd_events(y_daily, c_daily, threshold_quantile: float = 0.95,
                      mixed_fraction: float = 0.1) -> list[CDEvent]:
    """Flood events and the orientation of their concentration-discharge loops.

    An event is a maximal run of days with discharge above the
    ``threshold_quantile`` of the daily discharge, padded by one day on each
    side.  The loop orientation is the sign of the shoelace area of the
    ``(log Y, log C)`` polygon in time order (positive = counterclockwise).
    """
    y = np.asarray(y_daily, dtype=float)
    c = np.asarray(c_daily, dtype=float)
    if y.shape != c.shape or y.ndim != 1:
        raise DataError("daily discharge and concentration must have equal length")
    if not 0 <= threshold_quantile < 1:
        raise DataError("threshold quantile must be in [0, 1)")
    if y.size == 0:
        return []
    thr = np.quantile(y, threshold_quantile)
    above = y > thr
    if not above.any():
        return []
    edges = np.diff(np.concatenate(([0], above.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)  # exclusive
    events = []
    for s, e in zip(starts, ends):
        lo = max(s - 1, 0)
        hi = min(e + 1, y.size)
        ys, cs = y[lo:hi], c[lo:hi]
        if np.any(ys <= 0) or np.any(cs <= 0) or ys.size < 3:
            area, direction = 0.0, "mixed"
        else:
            area, direction = _loop_orientation(np.log(ys), np.log(cs), mixed_fraction)
        events.append(CDEvent(int(lo), int(hi - 1), ys.copy(), cs.copy(), float(area), direction))
    return events
