"""End-to-end orchestration: fit discharge, fit water quality, report
statistics, optionally simulate and compute exponential moments."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytics, riccati
from .analytics import DischargeModel, SupOUSVParams
from .dataio import dump_config, load_timeseries, write_csv, write_json
from .errors import SupOUSVError
from .measures import inv_first_moment
from .identify import (
    EmpiricalACF,
    FitReport,
    TimeSeries,
    empirical_acf,
    empirical_covariance,
    empirical_stats,
    fit_levy,
    fit_pi,
    fit_rho,
    fit_seasonal,
    fit_x_coupled,
)
from .simulate import (
    SimConfig,
    daily_average,
    extract_cd_events,
    reconstruct_wqi,
    simulate_supousv,
)

__all__ = [
    "EXIT_CODES",
    "PipelineConfig",
    "DischargeFit",
    "StageError",
    "fit_discharge",
    "fit_wqi",
    "model_stats",
    "DEFAULT_ACF_LAGS",
    "run_pipeline",
    "sweep_epsilon",
    "sweep_max_lag",
]

log = logging.getLogger(__name__)

EXIT_CODES = {
    "ok": 0,
    "usage": 2,
    "ingest": 3,
    "fit-discharge": 4,
    "fit-wqi": 5,
    "stats": 6,
    "simulate": 7,
    "riccati": 8,
}

# |corr(X, Y)| above which an uncoupled fit is reported as inconsistent
COV_WARN_CORR = 0.05


class StageError(SupOUSVError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.stage]

    def payload(self):
        return {"stage": self.stage, "error": type(self.cause).__name__, "message": str(self.cause)}


@dataclass
class PipelineConfig:
    discharge: str
    out_dir: str
    wqi: str | None = None
    discharge_only: bool = False
    coupling: str = "auto"  # auto | coupled | uncoupled
    epsilon: float = 0.1
    pi_max_lag: float = 30.0
    pi_bin_width: float = 1.0
    x_max_lag: float = 730.0
    x_bin_width: float | None = None
    n_harmonics: int = 2
    alpha_grid_step: float = 0.005
    grid_size: int = analytics.DEFAULT_GRID_SIZE
    simulate: bool = False
    sim: SimConfig = field(default_factory=lambda: SimConfig(horizon=10 * 365.25, burn_in=10 * 365.25,
                                                              stride=50))
    cd_quantile: float = 0.95
    riccati_q: tuple = ()
    a2_ref: float | None = None


@dataclass
class DischargeFit:
    stats: object
    acf: EmpiricalACF
    pi_fit: object
    levy_fit: object

    @property
    def model(self) -> DischargeModel:
        return DischargeModel(self.levy_fit.levy, self.pi_fit.measure)

    def to_dict(self):
        lv = self.levy_fit.levy
        return {
            "pi": {"alpha": self.pi_fit.alpha, "beta": self.pi_fit.beta},
            "levy": {"a1": lv.a1, "a2": lv.a2, "a3": lv.a3, "epsilon": lv.epsilon},
            "objectives": {"acf": self.pi_fit.objective, "moments": self.levy_fit.objective},
            "flags": list(self.pi_fit.flags),
            "empirical": self.stats.to_dict(),
            "model": dict(self.levy_fit.model),
        }


def fit_discharge(y: TimeSeries, epsilon: float = 0.1, max_lag: float = 30.0,
                  bin_width: float = 1.0) -> DischargeFit:
    stats = empirical_stats(y)
    acf = empirical_acf(y, max_lag, bin_width)
    pi_fit = fit_pi(acf, max_lag)
    levy_fit = fit_levy(stats, pi_fit.measure, epsilon)
    return DischargeFit(stats, acf, pi_fit, levy_fit)


def fit_wqi(c: TimeSeries, y: TimeSeries, discharge: DischargeFit, coupling: str = "auto",
            n_harmonics: int = 2, max_lag: float = 730.0, bin_width: float | None = None,
            alpha_grid_step: float = 0.005, grid_size: int = analytics.DEFAULT_GRID_SIZE):
    """Seasonal fit plus the ``X`` calibration; returns ``(FitReport, acf_x)``."""
    if coupling not in ("auto", "coupled", "uncoupled"):
        raise ValueError(f"unknown coupling mode {coupling!r}")
    seasonal, x = fit_seasonal(c, n_harmonics)
    stats_x = empirical_stats(x)
    acf_x = empirical_acf(x, max_lag, bin_width)
    cov = empirical_covariance(x, y)
    stats_y = discharge.stats
    corr = cov / math.sqrt(stats_x.variance * stats_y.variance) if stats_x.variance > 0 else 0.0
    warn = []
    if coupling == "uncoupled" or (coupling == "auto" and cov == 0):
        report = fit_x_coupled(acf_x, stats_x, stats_y, 0.0, discharge.model,
                               alpha_grid_step, max_lag, grid_size=grid_size)
        report.diagnostics["cov_empirical"] = cov
        report.diagnostics["corr_empirical"] = corr
        if abs(corr) > COV_WARN_CORR:
            warn.append(
                f"covariance mismatch: observed cov(X, Y) = {cov:.4g} (corr {corr:.3g}) "
                "but the uncoupled model implies 0"
            )
    else:
        report = fit_x_coupled(acf_x, stats_x, stats_y, cov, discharge.model,
                               alpha_grid_step, max_lag, grid_size=grid_size)
        report.diagnostics["corr_empirical"] = corr
    report.seasonal = seasonal
    report.diagnostics["warnings"] = warn
    for msg in warn:
        log.warning(msg)
    return report, acf_x


DEFAULT_ACF_LAGS = np.unique(np.concatenate([np.arange(0.0, 31.0), np.geomspace(1.0, 5000.0, 49)]))


def model_stats(p, grid_size: int = analytics.DEFAULT_GRID_SIZE, a2_ref=None,
                lags=DEFAULT_ACF_LAGS) -> dict:
    """Closed-form statistics of a parameter set as a JSON-ready dict.

    ``p`` is a :class:`DischargeModel` (discharge only) or
    :class:`SupOUSVParams`; water-quality entries are ``None`` for the former.
    """
    full = isinstance(p, SupOUSVParams)
    model = p.discharge if full else p
    cum = analytics.discharge_cumulants(model)
    lags = np.asarray(lags, dtype=float)
    doc = {
        "cumulants": {
            "mean": cum.mean,
            "variance": cum.variance,
            "skewness_unnormalized": cum.skewness_unnormalized,
            "kurtosis_unnormalized": cum.kurtosis_unnormalized,
            "skewness_normalized": cum.skewness_normalized,
            "kurtosis_normalized": cum.kurtosis_normalized,
        },
        "acf_curve": {"Y": np.column_stack([lags, analytics.discharge_acf(model.pi, lags)])},
        "covariance": None,
        "variance_terms": None,
        "tail_exponents": None,
        "q_max": None,
        "coupling_weight": None,
    }
    if full:
        grids = analytics.default_grids(p, grid_size)
        var = analytics.x_variance(p, *grids)
        tails = analytics.acf_tail_exponents(p)
        nu = p.levy
        if a2_ref is not None:
            nu = type(nu)(nu.a1, a2_ref, nu.a3, nu.epsilon)
        doc["acf_curve"]["X"] = np.column_stack([lags, analytics.x_acf(p, lags, *grids)])
        doc["covariance"] = analytics.xy_covariance(p, *grids)
        doc["variance_terms"] = {"diffusion": var.diffusion, "drift": var.drift,
                                 "total": var.total}
        doc["tail_exponents"] = {"regime": tails.regime, "exponents": list(tails.exponents),
                                 "condition_satisfied": tails.condition_satisfied}
        doc["q_max"] = riccati.q_max(nu, p.sigma, p.mu)
        if p.sigma > 0:
            doc["coupling_weight"] = analytics.coupling_weight(
                p.mu, p.sigma, cum.variance, cum.mean, inv_first_moment(p.pi))
    return doc


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except SupOUSVError as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(name, exc) from exc
    except (ValueError, OSError, RuntimeError, ArithmeticError) as exc:
        raise StageError(name, exc) from exc


def _acf_rows(name, acf: EmpiricalACF):
    return [name] * acf.lags.size, acf.lags, acf.values, acf.counts


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run all stages and write artifacts into ``cfg.out_dir``.

    Returns a summary dict.  Raises :class:`StageError` carrying the failing
    stage (its ``exit_code`` distinguishes stages).
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"artifacts": [], "warnings": []}

    y = _stage("ingest", load_timeseries, cfg.discharge, "discharge")
    c = None
    if cfg.wqi and not cfg.discharge_only:
        c = _stage("ingest", load_timeseries, cfg.wqi, "concentration")

    dfit = _stage("fit-discharge", fit_discharge, y, cfg.epsilon, cfg.pi_max_lag, cfg.pi_bin_width)
    report = None
    acf_x = None
    if c is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            report, acf_x = _stage("fit-wqi", fit_wqi, c, y, dfit, cfg.coupling, cfg.n_harmonics,
                                   cfg.x_max_lag, cfg.x_bin_width, cfg.alpha_grid_step,
                                   cfg.grid_size)
        summary["warnings"] += report.diagnostics.get("warnings", [])

    fit_doc = {"discharge": dfit.to_dict()}
    if report is not None:
        fit_doc["wqi"] = report.to_dict()
    write_json(out / "fit_report.json", fit_doc)
    summary["artifacts"].append("fit_report.json")
    params = report.params if report is not None else None
    (out / "model.cfg").write_text(
        dump_config(params, report.seasonal if report else None, discharge=dfit.model),
        encoding="utf-8")
    summary["artifacts"].append("model.cfg")

    def stats_stage():
        doc = model_stats(params if params is not None else dfit.model,
                          cfg.grid_size, cfg.a2_ref)
        doc["empirical"] = {"discharge": dfit.stats.to_dict()}
        if report is not None:
            doc["empirical"]["x"] = {
                "variance": report.diagnostics.get("var_x_empirical"),
                "covariance_xy": report.diagnostics.get("cov_empirical"),
            }
        return doc

    stats_doc = _stage("stats", stats_stage)
    write_json(out / "stats.json", stats_doc)
    summary["artifacts"].append("stats.json")

    # empirical and model ACFs as long-format CSVs
    rows = [_acf_rows("Y", dfit.acf)]
    if acf_x is not None:
        rows.append(_acf_rows("X", acf_x))
    write_csv(out / "acf_emp.csv", ["series", "lag_days", "acf", "pairs"],
              [np.concatenate([np.asarray(r[i], dtype=object) for r in rows]) for i in range(4)])
    lag_y = dfit.acf.lags
    model_series = [["Y"] * lag_y.size]
    model_lags = [lag_y]
    model_vals = [analytics.discharge_acf(dfit.pi_fit.measure, lag_y)]
    if params is not None:
        lag_x = acf_x.lags
        model_series.append(["X"] * lag_x.size)
        model_lags.append(lag_x)
        model_vals.append(_stage("stats", analytics.x_acf, params, lag_x,
                                 *analytics.default_grids(params, cfg.grid_size)))
    write_csv(out / "acf_model.csv", ["series", "lag_days", "acf"],
              [np.concatenate(model_series), np.concatenate(model_lags),
               np.concatenate(model_vals)])
    summary["artifacts"] += ["acf_emp.csv", "acf_model.csv"]

    if cfg.simulate and params is not None:
        path = _stage("simulate", simulate_supousv, params, cfg.sim)
        conc = reconstruct_wqi(report.seasonal, path)
        write_csv(out / "path.csv", ["time_days", "Y", "X", "C"],
                  [path.times, path.y, path.x, conc])
        days, y_day = daily_average(path.times, path.y)
        _, c_day = daily_average(path.times, conc)
        events = _stage("simulate", extract_cd_events, y_day, c_day, cfg.cd_quantile)
        write_json(out / "cd_events.json", [e.to_dict() for e in events])
        summary["artifacts"] += ["path.csv", "cd_events.json"]

    if cfg.riccati_q and params is not None:
        def ric():
            return [riccati.mgf(params, q, riccati.riccati_grids(params, cfg.grid_size),
                                a2_ref=cfg.a2_ref).to_dict() for q in cfg.riccati_q]
        write_json(out / "riccati.json", _stage("riccati", ric))
        summary["artifacts"].append("riccati.json")
    return summary


def sweep_epsilon(y: TimeSeries, eps_values, max_lag: float = 30.0, bin_width: float = 1.0):
    """Jump-law fits over regularisation exponents; returns ``(row_names, matrix)``."""
    stats = empirical_stats(y)
    pi = fit_pi(empirical_acf(y, max_lag, bin_width), max_lag).measure
    names = ["a1", "a2", "a3", "mean", "variance", "skewness", "kurtosis"]
    cols = []
    for eps in eps_values:
        lf = fit_levy(stats, pi, float(eps))
        cum = analytics.discharge_cumulants(DischargeModel(lf.levy, pi))
        cols.append([lf.levy.a1, lf.levy.a2, lf.levy.a3, cum.mean, cum.variance,
                     cum.skewness_normalized, cum.kurtosis_normalized])
    return names, np.array(cols).T


def sweep_max_lag(c: TimeSeries, lags, n_harmonics: int = 2, bin_width: float | None = None):
    """Reversion-measure fits (``mu = 0``) over autocorrelation windows."""
    _, x = fit_seasonal(c, n_harmonics)
    cols = []
    for lag in lags:
        acf = empirical_acf(x, float(lag), bin_width)
        fit = fit_rho(acf, float(lag))
        cols.append([fit.alpha, fit.beta])
    return ["alpha_R", "beta_R"], np.array(cols).T
