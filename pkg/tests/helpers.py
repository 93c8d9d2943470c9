"""Shared synthetic parameter sets and fixture builders for the test suite."""

import numpy as np

from supousv.analytics import SupOUSVParams
from supousv.dataio import write_csv
from supousv.measures import TemperedStableLevy
from supousv.presets import reference_params, reference_seasonal
from supousv.simulate import DAYS_PER_YEAR, SimConfig, reconstruct_wqi, simulate_supousv

# moderate-tailed jump law (mean 17, variance 300, normalized skewness 3.5
# under the TN recession measure); the reference law is too heavy-tailed for
# its moments to be recovered from a few centuries of data
SYNTHETIC_LEVY = TemperedStableLevy(1.0436, 0.009769, 0.3831, 0.1)


def synthetic_params(index="TN"):
    p = reference_params(index)
    return SupOUSVParams(SYNTHETIC_LEVY, p.pi, p.rho, p.sigma, p.mu)


def write_fixture(out_dir, years, seed, index="TN", burn_years=50, i_r=2048, i_R=256,
                  wqi_every=7.0, jitter=2.0):
    """Simulate a path and write daily discharge and irregular concentration CSVs."""
    p = synthetic_params(index)
    cfg = SimConfig(dt=0.02, burn_in=burn_years * DAYS_PER_YEAR, horizon=years * DAYS_PER_YEAR,
                    seed=seed, stride=50, i_r=i_r, i_R=i_R)
    path = simulate_supousv(p, cfg)
    conc = reconstruct_wqi(reference_seasonal(index), path)
    write_csv(out_dir / "discharge.csv", ["timestamp", "value"], [path.times, path.y])
    rng = np.random.default_rng(seed + 1)
    if wqi_every <= 1.0:
        idx = np.arange(path.times.size)
    else:
        gaps = np.maximum(1, np.round(wqi_every + rng.uniform(-jitter, jitter,
                                                              path.times.size)).astype(int))
        idx = np.cumsum(gaps)
        idx = idx[idx < path.times.size]
    write_csv(out_dir / "wqi.csv", ["timestamp", "value"], [path.times[idx], conc[idx]])
    return p, path
