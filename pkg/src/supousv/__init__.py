"""supOU discharge with a stochastic-volatility water-quality index.

The discharge ``Y`` is a superposition of Ornstein-Uhlenbeck processes
driven by a tempered stable subordinator; the log-deviation ``X`` of a
water-quality index reverts on a superposed spectrum of rates with drift
``mu (Y - Ybar)`` and diffusion ``sigma sqrt(Y)``.
"""

__version__ = "0.1.0"

from .analytics import (
    DischargeModel,
    SupOUSVParams,
    discharge_acf,
    discharge_cumulants,
    x_acf,
    x_variance,
    xy_covariance,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    DomainError,
    OptimizationError,
    SupOUSVError,
)
from .kernels import BACKEND
from .measures import GammaMeasure, TemperedStableLevy
from .presets import reference_params, reference_seasonal
from .riccati import MGFResult, mgf, q_max
from .simulate import SeasonalModel, SimConfig, simulate_supou, simulate_supousv

__all__ = [
    "BACKEND",
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "DischargeModel",
    "DomainError",
    "GammaMeasure",
    "MGFResult",
    "OptimizationError",
    "SeasonalModel",
    "SimConfig",
    "SupOUSVError",
    "SupOUSVParams",
    "TemperedStableLevy",
    "discharge_acf",
    "discharge_cumulants",
    "mgf",
    "q_max",
    "reference_params",
    "reference_seasonal",
    "simulate_supou",
    "simulate_supousv",
    "x_acf",
    "x_variance",
    "xy_covariance",
]
