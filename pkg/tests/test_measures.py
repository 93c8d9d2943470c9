import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from supousv.errors import DomainError
from supousv.measures import (
    GammaMeasure,
    QuadratureGrid,
    TemperedStableLevy,
    harmonic_quantile_grid,
    inv_first_moment,
    levy_moment,
    levy_tail_rate,
    quantile_grid,
    truncated_levy_moment,
)

NU_01 = TemperedStableLevy(1.124, 8.92e-4, 0.75, 0.1)
NU_00 = TemperedStableLevy(1.266, 1.96e-3, 0.8084, 0.0)
PI = GammaMeasure(2.143, 1.034)

# mpmath quadrature of the defining integrals (tests/derive_oracles.py)
MOMENTS_01 = [20.082417940793661, 1962.6685436471365, 1192961.3560961413, 1287465293.8901544]
MOMENTS_00 = [20.083452000544786, 1963.2598996450924, 1193581.8859270878, 1334619418.9784723]
TAIL_01 = {1.0: 1.4746314620693359, 100.0: 0.031917537654166674}
INV_MEAN_PI = 0.8461224745359443

shapes = st.floats(0.2, 6.0)
scales = st.floats(1e-3, 10.0)


@pytest.mark.parametrize("nu, expected", [(NU_01, MOMENTS_01), (NU_00, MOMENTS_00)])
def test_levy_moments_match_quadrature(nu, expected):
    got = [levy_moment(nu, k) for k in (1, 2, 3, 4)]
    np.testing.assert_allclose(got, expected, rtol=1e-12)


@pytest.mark.parametrize("z_min", [1.0, 100.0])
def test_tail_rate_matches_quadrature(z_min):
    assert levy_tail_rate(NU_01, z_min) == pytest.approx(TAIL_01[z_min], rel=1e-12)


@pytest.mark.parametrize("a3", [-0.7, -0.2, 0.0, 0.3, 0.9])
def test_tail_rate_all_branches(a3):
    nu = TemperedStableLevy(0.8, 0.05, a3, 0.0)
    ref, _ = integrate.quad(nu.density, 2.0, np.inf, epsrel=1e-12)
    assert levy_tail_rate(nu, 2.0) == pytest.approx(ref, rel=1e-9)


def test_finite_activity_total_mass():
    nu = TemperedStableLevy(0.8, 0.05, -0.4, 0.0)
    assert levy_tail_rate(nu, 0.0) == pytest.approx(nu.total_mass())
    assert math.isinf(TemperedStableLevy(1, 1, 0.2).total_mass())


@given(k=st.sampled_from([1, 2, 3]), z=st.floats(1e-3, 1e5))
def test_truncated_moment_is_monotone_and_bounded(k, z):
    small = truncated_levy_moment(NU_01, k, z)
    assert 0 <= small <= levy_moment(NU_01, k) * (1 + 1e-14)
    assert truncated_levy_moment(NU_01, k, 2 * z) >= small


def test_divergent_moment_raises():
    with pytest.raises(DomainError):
        levy_moment(TemperedStableLevy(1.0, 1.0, 0.9, 0.5), 1)


def test_inv_first_moment():
    assert inv_first_moment(PI) == pytest.approx(INV_MEAN_PI, rel=1e-14)
    with pytest.raises(DomainError):
        inv_first_moment(GammaMeasure(0.9, 1.0))


@pytest.mark.parametrize("bad", [(0.0, 1.0), (1.0, -1.0), (math.nan, 1.0)])
def test_gamma_rejects_bad_parameters(bad):
    with pytest.raises(DomainError):
        GammaMeasure(*bad)


@pytest.mark.parametrize("bad", [(0, 1, 0.5), (1, 0, 0.5), (1, 1, 1.0), (1, 1, 0.5, -0.1)])
def test_levy_rejects_bad_parameters(bad):
    with pytest.raises(DomainError):
        TemperedStableLevy(*bad)


@given(alpha=shapes, beta=scales, h=st.floats(0.0, 1e4))
def test_gamma_laplace_transform(alpha, beta, h):
    m = GammaMeasure(alpha, beta)
    x = m.ppf((np.arange(4000) + 0.5) / 4000)
    # midpoint estimate converges slowly; only a coarse check against the closed form
    assert abs(np.mean(np.exp(-x * h)) - m.laplace(h)) < 2e-3


@given(alpha=shapes, beta=scales, p=st.floats(1e-6, 1 - 1e-6))
def test_ppf_inverts_cdf(alpha, beta, p):
    m = GammaMeasure(alpha, beta)
    assert m.cdf(m.ppf(p)) == pytest.approx(p, rel=1e-9, abs=1e-12)


def test_pdf_normalised():
    val, _ = integrate.quad(PI.pdf, 0, np.inf)
    assert val == pytest.approx(1.0, rel=1e-10)


def test_quantile_grid_layout():
    g = quantile_grid(PI, 8)
    np.testing.assert_allclose(g.weights, 1 / 8)
    np.testing.assert_allclose(PI.cdf(g.nodes), (np.arange(8) + 0.5) / 8, rtol=1e-12)


@given(alpha=st.floats(1.05, 6.0), beta=scales, n=st.integers(1, 600))
def test_harmonic_grid_reproduces_inverse_mean(alpha, beta, n):
    m = GammaMeasure(alpha, beta)
    g = harmonic_quantile_grid(m, n)
    assert len(g) == n
    assert float(np.dot(g.weights, 1 / g.nodes)) == pytest.approx(inv_first_moment(m), rel=1e-10)
    # every node lies inside its equal-probability bin
    edges = np.concatenate(([0.0], m.ppf(np.arange(1, n) / n), [np.inf]))
    assert np.all((g.nodes > edges[:-1]) & (g.nodes < edges[1:]))


def test_midpoint_grid_inverse_mean_converges_slowly():
    errs = [abs(np.dot(g.weights, 1 / g.nodes) / INV_MEAN_PI - 1)
            for g in (quantile_grid(PI, n) for n in (256, 4096))]
    assert errs[1] < errs[0]
    # error ~ N^-(1 - 1/alpha)
    assert errs[0] / errs[1] == pytest.approx(16 ** (1 - 1 / PI.alpha), rel=0.15)


def test_grid_validation():
    with pytest.raises(DomainError):
        QuadratureGrid(np.array([1.0, 0.5]), np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        QuadratureGrid(np.array([1.0, 2.0]), np.array([0.6, 0.6]))
    with pytest.raises(DomainError):
        quantile_grid(PI, 0)


def test_regularised_jumps_scale_with_kappa():
    assert NU_01.kappa == pytest.approx(1 / 1.1)
    assert NU_01.with_epsilon(0.0).kappa == 1.0
