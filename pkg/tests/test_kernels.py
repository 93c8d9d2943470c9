import subprocess
import sys

import numpy as np
import pytest

from supousv import kernels
from supousv.analytics import DriftIntegrals
from supousv.measures import quantile_grid
from supousv.presets import reference_params
from supousv.simulate import SimConfig, simulate_supousv

TN = reference_params("TN")

try:
    CY = kernels.get_backend("cython")
except ImportError:  # extension not built
    CY = None
PY = kernels.get_backend("python")
needs_ext = pytest.mark.skipif(CY is None, reason="compiled kernels not built")


def _grids(n):
    return quantile_grid(TN.pi, n), quantile_grid(TN.rho, n)


@needs_ext
def test_drift_tables_agree():
    gp, gr = _grids(300)
    a = CY.drift_tables(gp.nodes, gp.weights, gr.nodes, gr.weights, 1e-2)
    b = PY.drift_tables(gp.nodes, gp.weights, gr.nodes, gr.weights, 1e-2)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-300)


@needs_ext
def test_drift_integrals_agree():
    gp, gr = _grids(200)
    h = np.array([0.0, 0.3, 7.0, 365.0])
    ta = DriftIntegrals(gp, gr, backend=CY)
    tb = DriftIntegrals(gp, gr, backend=PY)
    assert ta.n_near_pairs == tb.n_near_pairs > 0
    np.testing.assert_allclose(ta.i3(h), tb.i3(h), rtol=1e-11)
    assert ta.i2_zero == pytest.approx(tb.i2_zero, rel=1e-13)


@needs_ext
def test_simulated_paths_agree():
    cfg = SimConfig(burn_in=20.0, horizon=100.0, i_r=32, i_R=32, seed=5)
    a = simulate_supousv(TN, cfg, backend=CY)
    b = simulate_supousv(TN, cfg, backend=PY)
    np.testing.assert_allclose(a.y, b.y, rtol=1e-10)
    np.testing.assert_allclose(a.x, b.x, rtol=1e-9, atol=1e-12)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_environment_forces_fallback():
    code = "import supousv.kernels as k; print(k.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"SUPOUSV_PURE_PYTHON": "1", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"
