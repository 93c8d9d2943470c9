import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from supousv.analytics import SupOUSVParams
from supousv.errors import ConvergenceError, DomainError
from supousv.measures import TemperedStableLevy, quantile_grid
from supousv.presets import reference_params
from supousv.riccati import LevyExponent, integrate_riccati, mgf, psi_bound, q_max, riccati_grids

TN0 = reference_params("TN", epsilon=0.0)
DSI0 = reference_params("DSi", epsilon=0.0)
TN = reference_params("TN")

# mpmath quadrature of the closed-form Riccati solution on midpoint grids
# (tests/derive_oracles.py); keys are (params, grid size, q)
LOG_MGF = [
    (TN0, 8, 0.05, 0.00013504285113792432),
    (TN0, 8, 0.1, 0.00054353912859736871),
    (DSI0, 8, 1.0, 0.011139374645613614),
    (DSI0, 8, 2.0, 0.044854368651977683),
    (TN, 4, 0.1, 0.000491281846313646),
]
# mpmath values of the regularised exponent for the epsilon = 0.1 jump law
LAMBDA_01 = {1e-4: 0.0020182594979739478, 5e-4: 0.010315363799596622,
             2e-3: 0.048278058604292843, -1e-3: -0.019258667788546269}


def grids(p, n):
    return quantile_grid(p.pi, n), quantile_grid(p.rho, n)


@pytest.mark.parametrize("p, n, q, expected", LOG_MGF,
                         ids=["TN-q0.05", "TN-q0.1", "DSi-q1", "DSi-q2", "TN-eps0.1"])
def test_log_mgf_matches_quadrature(p, n, q, expected):
    res = mgf(p, q, grids(p, n))
    assert res.converged and not res.guard_tripped
    assert res.log_mgf == pytest.approx(expected, rel=5e-6)
    assert res.mgf == pytest.approx(math.exp(expected), rel=1e-9)


@pytest.mark.parametrize("psi", sorted(LAMBDA_01))
def test_levy_exponent_table_and_quadrature(psi):
    lam = LevyExponent(TN.levy, 3e-3)
    assert float(lam(psi)) == pytest.approx(LAMBDA_01[psi], rel=1e-11)
    assert lam.quad(psi) == pytest.approx(LAMBDA_01[psi], rel=1e-12)


def test_levy_exponent_closed_form_limits():
    lam = LevyExponent(TN0.levy)
    nu = TN0.levy
    assert float(lam(0.0)) == 0.0
    assert float(lam(nu.a2 * 1.0001)) == math.inf
    # small-psi slope is the first moment
    assert float(lam(1e-9)) / 1e-9 == pytest.approx(lam.m1, rel=1e-5)
    log_case = LevyExponent(TemperedStableLevy(1.0, 0.5, 0.0, 0.0))
    assert float(log_case(0.25)) == pytest.approx(-math.log(0.5))


@given(st.floats(-2e-3, 2e-3))
@settings(max_examples=25)
def test_levy_exponent_table_consistent_with_quadrature(psi):
    lam = LevyExponent(TN.levy, 3e-3)
    assert float(lam(psi)) == pytest.approx(lam.quad(psi), rel=1e-9, abs=1e-18)


def test_omega_is_explicit():
    g = grids(TN0, 8)
    traj = integrate_riccati(TN0, 0.1, 50.0, g, step=0.01, times=[0, 1, 10, 50])
    expected = 0.1 * np.exp(-np.outer(traj.times, g[1].nodes))
    np.testing.assert_allclose(traj.omega, expected, rtol=1e-10, atol=0)
    np.testing.assert_allclose(traj.times, [0, 1, 10, 50])
    assert traj.state(0).phi == 0.0


@given(st.floats(0.0, 0.2), st.floats(0.0, 0.15), st.floats(0.01, 0.15))
@settings(max_examples=15)
def test_psi_never_exceeds_forcing_integral(mu, sigma, q):
    # psi_i is a weighted time average of the forcing, so it stays below
    # its total integral mu q + sigma^2 q^2 / 4
    p = SupOUSVParams(TN0.levy, TN0.pi, TN0.rho, sigma, mu)
    traj = integrate_riccati(p, q, 200.0, grids(p, 6), step=0.01, growth=0.01)
    assert traj.psi_sup <= psi_bound(sigma, mu, q) * math.e * (1 + 1e-9)


def test_guard_trips_beyond_q_max():
    qm = q_max(TN0.levy, TN0.sigma, TN0.mu)
    # the smallest recession nodes carry psi up to the guard, so the full grid is needed
    res = mgf(TN0, 1.2 * qm)
    assert res.guard_tripped and not res.converged
    assert res.log_mgf == math.inf and res.mgf == math.inf
    assert res.to_dict()["log_mgf"] is None


def test_regularised_law_needs_reference_a2_for_guard():
    qm = q_max(TN0.levy, TN.sigma, TN.mu)
    res = mgf(TN, 1.2 * qm, a2_ref=TN0.levy.a2)
    assert res.guard_tripped and res.q_max == pytest.approx(qm)


def test_coarse_grid_misses_divergence():
    qm = q_max(TN0.levy, TN0.sigma, TN0.mu)
    assert not mgf(TN0, 1.2 * qm, grids(TN0, 8)).guard_tripped


def test_q_zero_is_trivial():
    res = mgf(TN, 0.0)
    assert res.log_mgf == 0.0 and res.converged and res.n_steps == 0


def test_q_max_formula():
    nu = TN0.levy
    for sigma, mu in ((0.1077, 0.02752), (0.05, -0.3), (0.2, 0.0)):
        q = q_max(nu, sigma, mu)
        assert max(mu, 0) * q + sigma**2 * q**2 / 4 == pytest.approx(nu.a2 * math.e)
    assert q_max(nu, 0.0, 0.0) == math.inf
    assert q_max(nu, 0.0, 0.01) == pytest.approx(nu.a2 * math.e / 0.01)
    with pytest.raises(DomainError):
        q_max(nu, -1.0, 0.0)


def test_t_max_exhaustion_raises():
    with pytest.raises(ConvergenceError):
        mgf(TN0, 0.1, grids(TN0, 4), t_max=10.0)


def test_negative_q_is_finite():
    res = mgf(TN0, -0.1, grids(TN0, 8))
    assert res.converged and res.log_mgf > 0


def test_grid_rules():
    g_mid, _ = riccati_grids(TN, 32)
    g_har, g_rho = riccati_grids(TN, 32, "harmonic")
    assert not np.allclose(g_mid.nodes, g_har.nodes)
    assert len(g_rho) == 32
    with pytest.raises(DomainError):
        riccati_grids(TN, 32, "gauss")


def test_integrate_argument_checks():
    with pytest.raises(DomainError):
        integrate_riccati(TN0, 0.1, 1.0, step=0.0)
    with pytest.raises(DomainError):
        integrate_riccati(TN0, 0.1, -1.0)
