"""Reference parameter sets for a mountain-river discharge record and four
water-quality indices (total nitrogen, total phosphorus, total organic carbon
and dissolved silica).  Handy defaults for the CLI, examples and tests."""

from .analytics import SupOUSVParams
from .measures import GammaMeasure, TemperedStableLevy
from .simulate import SeasonalModel

__all__ = ["RECESSION", "LEVY", "WQI", "SEASONAL", "reference_params", "reference_seasonal"]

RECESSION = GammaMeasure(2.143, 1.034)

# tempered stable jump laws keyed by the regularisation exponent
LEVY = {
    0.0: TemperedStableLevy(1.266, 1.960e-3, 0.8084, epsilon=0.0),
    0.1: TemperedStableLevy(1.124, 8.920e-4, 0.7500, epsilon=0.1),
}

# (alpha_R, beta_R, sigma, mu); alpha_R is the coupled-fit value when mu != 0
WQI = {
    "TN": (0.3750, 0.2699, 0.1077, 0.02752),
    "TP": (0.4850, 0.5253, 0.1483, 0.02917),
    "TOC": (2.650, 0.02506, 0.1037, 0.02567),
    "DSi": (2.510, 0.02806, 0.05483, 0.0),
}

SEASONAL = {
    "TN": (0.5553, ((0.07104, 0.7198), (0.06562, 0.7185))),
    "TP": (0.02642, ((-0.2752, 1.344), (0.07639, 0.8146))),
    "TOC": (0.7676, ((-0.2512, 0.5396), (0.06511, 1.640))),
    "DSi": (5.745, ((-0.1133, 1.801), (-0.02330, 0.4360))),
}


def reference_params(name: str, epsilon: float = 0.1) -> SupOUSVParams:
    try:
        aR, bR, sigma, mu = WQI[name]
    except KeyError:
        raise KeyError(f"unknown index {name!r}; choose from {sorted(WQI)}") from None
    return SupOUSVParams(LEVY[epsilon], RECESSION, GammaMeasure(aR, bR), sigma, mu)


def reference_seasonal(name: str) -> SeasonalModel:
    c_bar, harmonics = SEASONAL[name]
    return SeasonalModel(c_bar, harmonics)
