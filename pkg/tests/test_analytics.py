import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from supousv import analytics as A
from supousv.errors import DomainError
from supousv.measures import GammaMeasure, QuadratureGrid, harmonic_quantile_grid, quantile_grid
from supousv.presets import reference_params

TN = reference_params("TN")
DSI = reference_params("DSi")

# Lyapunov solve of the 16 x 16 midpoint lift (tests/derive_oracles.py)
LIFT_TN_VAR = 0.12395590203493223
LIFT_TN_COV = 1.8662614677305216
LIFT_TN_DRIFT_VAR = 0.025407260316834598
LIFT_TN_DRIFT_AUTOCOV = {1.0: 0.024242120317463922, 30.0: 0.003845186000487837,
                         365.0: 0.00021675103188370488}
LIFT_DSI_VAR = 0.025542048664432264
# mpmath ratio of int exp(-r h) pi(dr) / r to int pi(dr) / r
Y_ACF = {0.5: 0.62105988873067281, 1.0: 0.44417577192051206, 10.0: 0.062312801736775542,
         100.0: 0.0049274852170280476}
# drift weight in the autocorrelation of X, as published
PUBLISHED_W = {"TN": 7.532, "TP": 4.469, "TOC": 7.072}


def grid16(p):
    return quantile_grid(p.pi, 16), quantile_grid(p.rho, 16)


def with_mu(p, mu, sigma=None):
    return A.SupOUSVParams(p.levy, p.pi, p.rho, p.sigma if sigma is None else sigma, mu)


def test_cumulants_from_moments():
    c = A.discharge_cumulants(TN)
    assert c.mean == pytest.approx(17.01, rel=5e-3)
    assert c.variance == pytest.approx(830.8, rel=5e-3)
    assert c.skewness_normalized == pytest.approx(14.06, rel=5e-3)
    assert c.skewness_normalized == pytest.approx(c.skewness_unnormalized / c.variance**1.5)
    assert A.discharge_mean(TN) == c.mean and A.discharge_variance(TN) == c.variance


@pytest.mark.parametrize("h", sorted(Y_ACF))
def test_discharge_acf_closed_form(h):
    assert A.discharge_acf(TN.pi, h) == pytest.approx(Y_ACF[h], rel=1e-12)


def test_discharge_acf_on_grid_converges():
    # harmonic nodes integrate 1/r exactly; midpoint nodes lag behind
    g = harmonic_quantile_grid(TN.pi, 4096)
    assert A.discharge_acf(g, 10.0) == pytest.approx(Y_ACF[10.0], rel=2e-3)
    assert abs(A.discharge_acf(quantile_grid(TN.pi, 4096), 10.0) - Y_ACF[10.0]) > 2e-3


def test_discharge_acf_rejects_negative_lag():
    with pytest.raises(DomainError):
        A.discharge_acf(TN.pi, -1.0)


def test_variance_and_covariance_match_lyapunov():
    gp, gr = grid16(TN)
    v = A.x_variance(TN, gp, gr)
    assert v.total == pytest.approx(LIFT_TN_VAR, rel=1e-12)
    assert v.drift == pytest.approx(LIFT_TN_DRIFT_VAR, rel=1e-12)
    assert v.diffusion == pytest.approx(0.5 * TN.sigma**2 * A.discharge_mean(TN))
    assert A.xy_covariance(TN, gp, gr) == pytest.approx(LIFT_TN_COV, rel=1e-12)
    assert A.x_variance(DSI, *grid16(DSI)).total == pytest.approx(LIFT_DSI_VAR, rel=1e-12)


@pytest.mark.parametrize("h", sorted(LIFT_TN_DRIFT_AUTOCOV))
def test_acf_matches_lyapunov(h):
    # diffusion part uses the continuum reversion measure, drift part the grid
    gp, gr = grid16(TN)
    diff = 0.5 * TN.sigma**2 * A.discharge_mean(TN)
    expected = (diff * TN.rho.laplace(h) + LIFT_TN_DRIFT_AUTOCOV[h]) / LIFT_TN_VAR
    assert A.x_acf(TN, h, gp, gr) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("h", [0.1, 1.0, 10.0, 100.0, 730.0])
def test_uncoupled_acf_is_pure_power_law(h):
    p = with_mu(TN, 0.0)
    assert A.x_acf(p, h) == pytest.approx((1 + p.rho.beta * h) ** -p.rho.alpha, abs=1e-12)
    assert A.xy_covariance(p) == 0.0


def test_acf_at_zero_is_one():
    assert A.x_acf(TN, 0.0) == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(A.x_acf(TN, np.array([0.0, 0.0])), 1.0, atol=1e-14)


def test_acf_degenerate_and_negative_lags():
    with pytest.raises(DomainError):
        A.x_acf(with_mu(TN, 0.0, sigma=0.0), 1.0)
    with pytest.raises(DomainError):
        A.x_acf(TN, -1.0)


@given(st.floats(-0.2, 0.2).filter(lambda m: abs(m) > 1e-6))
def test_covariance_carries_sign_of_mu(mu):
    gp, gr = A.default_grids(TN, 64)
    assert math.copysign(1.0, A.xy_covariance(with_mu(TN, mu), gp, gr)) == math.copysign(1.0, mu)


@given(st.floats(0.0, 0.2))
def test_acf_bounded_and_decreasing(mu):
    gp, gr = A.default_grids(TN, 64)
    p = with_mu(TN, mu)
    h = np.array([0.0, 1.0, 10.0, 100.0, 1000.0])
    acf = A.x_acf(p, h, gp, gr)
    assert np.all(acf <= 1 + 1e-12) and np.all(acf > 0)
    assert np.all(np.diff(acf) < 0)


@given(st.floats(0.01, 10.0))
def test_drift_variance_scales_with_mu_squared(k):
    gp, gr = A.default_grids(TN, 64)
    base = A.x_variance(with_mu(TN, 0.01), gp, gr).drift
    assert A.x_variance(with_mu(TN, 0.01 * k), gp, gr).drift == pytest.approx(base * k**2)


def test_near_pair_sum_is_continuous():
    # nudging one grid so that node pairs cross the near-diagonal threshold
    # must not change I3 noticeably
    gp = quantile_grid(TN.pi, 64)
    base = QuadratureGrid(gp.nodes.copy(), gp.weights)
    rho_nodes = gp.nodes * (1 + 1e-3)
    gr = QuadratureGrid(rho_nodes, gp.weights)
    gr2 = QuadratureGrid(gp.nodes * (1 + 2e-2), gp.weights)
    tab1 = A.DriftIntegrals(base, gr)
    tab2 = A.DriftIntegrals(base, gr2)
    assert tab1.n_near_pairs > tab2.n_near_pairs
    h = np.array([0.5, 5.0, 50.0])
    a, b = tab1.i3(h), tab2.i3(h)
    np.testing.assert_allclose(a, b, rtol=0.05)
    assert np.all(np.isfinite(a))


def test_drift_integral_identities():
    gp, gr = A.default_grids(TN, 128)
    tab = A.drift_integrals(gp, gr)
    assert tab.i3(0.0)[0] == 0.0
    assert tab.i2(0.0) == pytest.approx(tab.i2_zero)
    # drift tables are memoised per grid pair
    assert A.drift_integrals(gp, gr) is tab


@pytest.mark.parametrize("name", sorted(PUBLISHED_W))
def test_coupling_weight_matches_published(name):
    p = reference_params(name)
    c = A.discharge_cumulants(p)
    w = A.coupling_weight(p.mu, p.sigma, c.variance, c.mean, A._inv_mean(p.pi))
    assert w == pytest.approx(PUBLISHED_W[name], rel=5e-3)


def test_tail_regimes():
    t = A.acf_tail_exponents(TN)
    assert t.regime == "decays_alpha_r_gt_2" and t.condition_satisfied
    assert t.exponents == pytest.approx((TN.rho.alpha, TN.pi.alpha - 2))
    long_mem = A.SupOUSVParams(TN.levy, GammaMeasure(1.5, 1.0), TN.rho, 0.1, 0.0)
    t = A.acf_tail_exponents(long_mem)
    assert t.regime == "decays_alpha_r_le_2"
    assert t.eta == pytest.approx((0.5 * (TN.rho.alpha + 2) - 1) / (TN.rho.alpha + 2))
    with pytest.warns(UserWarning, match="not guaranteed to vanish"):
        slow = A.SupOUSVParams(TN.levy, GammaMeasure(1.2, 1.0), GammaMeasure(0.5, 1.0), 0.1, 0.0)
    assert not A.acf_tail_exponents(slow).condition_satisfied


def test_reference_parameters_do_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for name in ("TN", "TP", "TOC", "DSi"):
            reference_params(name)


def test_parameter_validation():
    with pytest.raises(DomainError):
        A.SupOUSVParams(TN.levy, GammaMeasure(0.9, 1.0), TN.rho, 0.1, 0.0)
    with pytest.raises(DomainError):
        A.SupOUSVParams(TN.levy, TN.pi, TN.rho, -0.1, 0.0)
    with pytest.raises(DomainError):
        A.SupOUSVParams(TN.levy, TN.pi, TN.rho, 0.1, math.nan)
