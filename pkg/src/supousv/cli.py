"""Command-line interface (``supousv``).

Every subcommand writes machine-readable output (JSON with sorted keys, CSV)
with floats rounded to 9 significant digits.  Relative output paths resolve
against ``--out-dir``, which defaults to ``$SUPOUSV_OUTPUT_DIR`` or the
working directory.  Exit status is 0 on success, 2 for usage or
configuration errors and a stage-specific code otherwise (see
:data:`supousv.pipeline.EXIT_CODES`).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, analytics, riccati
from .dataio import (dump_config, format_csv, load_config, load_timeseries, parse_config,
                     round_floats, write_csv, write_json)
from .errors import ConfigError, SupOUSVError
from .identify import empirical_acf, empirical_stats
from .pipeline import (
    EXIT_CODES,
    PipelineConfig,
    StageError,
    fit_discharge,
    fit_wqi,
    model_stats,
    run_pipeline,
    sweep_epsilon,
    sweep_max_lag,
)
from .presets import LEVY, WQI, reference_params, reference_seasonal
from .simulate import (
    DAYS_PER_YEAR,
    SimConfig,
    daily_average,
    extract_cd_events,
    reconstruct_wqi,
    simulate_supou,
    simulate_supousv,
)

log = logging.getLogger("supousv")

OUTPUT_ENV = "SUPOUSV_OUTPUT_DIR"
DEFAULT_SEED = SimConfig.seed


class UsageError(SupOUSVError):
    pass


def _out_dir(args) -> Path:
    d = Path(args.out_dir or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _resolve(args, name) -> Path | None:
    """``None`` means stdout."""
    if name is None or name == "-":
        return None
    p = Path(name)
    return p if p.is_absolute() else _out_dir(args) / p


def _emit_json(args, obj, name):
    path = _resolve(args, name)
    if path is None:
        sys.stdout.write(json.dumps(round_floats(obj), indent=2, sort_keys=True,
                                    allow_nan=False) + "\n")
    else:
        write_json(path, obj)
        log.info("wrote %s", path)


def _emit_csv(args, header, columns, name):
    path = _resolve(args, name)
    if path is None:
        sys.stdout.write(format_csv(header, columns))
    else:
        write_csv(path, header, columns)
        log.info("wrote %s", path)


def _staged(stage, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except StageError:
        raise
    except ConfigError:
        raise
    except (SupOUSVError, ValueError, OSError, RuntimeError, ArithmeticError) as exc:
        raise StageError(stage, exc) from exc


def _model_config(args):
    if args.preset:
        p = reference_params(args.preset, args.preset_eps)
        return parse_config(dump_config(p, reference_seasonal(args.preset)))
    if not args.config:
        raise UsageError("need --config or --preset")
    return load_config(args.config)


def _parse_floats(text, name):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None


def _parse_q(text):
    """``0.05`` or a range ``start:stop:count`` (inclusive, linear)."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError("--q range must be start:stop:count")
        try:
            a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(f"bad --q range {text!r}") from None
        if n < 1:
            raise UsageError("--q range count must be >= 1")
        return list(np.linspace(a, b, n))
    return _parse_floats(text, "--q")


# -- subcommands -------------------------------------------------------------


def cmd_ingest(args):
    out = {}
    for kind, path in (("discharge", args.discharge), ("concentration", args.wqi)):
        if path is None:
            continue
        ts = _staged("ingest", load_timeseries, path, kind, args.value_column)
        st = empirical_stats(ts)
        out[kind] = {
            "n": len(ts),
            "t_start_days": float(ts.times[0]),
            "t_end_days": float(ts.times[-1]),
            "regular": ts.is_regular(),
            "stats": st.to_dict(),
        }
    if not out:
        raise UsageError("ingest needs --discharge and/or --wqi")
    _emit_json(args, out, args.out)


def cmd_stats(args):
    cfg = _model_config(args)
    p = cfg.params() if cfg.has_wqi else cfg.discharge()
    lags = None
    if args.lags:
        lags = np.asarray(_parse_floats(args.lags, "--lags"))
    doc = _staged("stats", model_stats, p, args.grid_size, args.a2_ref,
                  *(() if lags is None else (lags,)))
    _emit_json(args, doc, args.out)
    if args.acf_csv:
        for name, curve in doc["acf_curve"].items():
            _emit_csv(args, ["lag_days", "acf"], [curve[:, 0], curve[:, 1]],
                      f"{args.acf_csv}_{name}.csv")


def _write_fit(args, doc, params, seasonal, discharge):
    _emit_json(args, doc, args.out)
    if args.config_out:
        path = _resolve(args, args.config_out)
        path.write_text(dump_config(params, seasonal, discharge=discharge), encoding="utf-8")


def cmd_fit_discharge(args):
    y = _staged("ingest", load_timeseries, args.discharge, "discharge")
    fit = _staged("fit-discharge", fit_discharge, y, args.eps, args.max_lag, args.bin_width)
    _write_fit(args, {"discharge": fit.to_dict()}, None, None, fit.model)


def cmd_fit_wqi(args):
    y = _staged("ingest", load_timeseries, args.discharge, "discharge")
    c = _staged("ingest", load_timeseries, args.wqi, "concentration")
    dfit = _staged("fit-discharge", fit_discharge, y, args.eps, args.pi_max_lag, 1.0)
    report, _ = _staged("fit-wqi", fit_wqi, c, y, dfit, args.coupling, args.harmonics,
                        args.max_lag, args.bin_width, args.alpha_step, args.grid_size)
    for msg in report.diagnostics.get("warnings", []):
        print(f"warning: {msg}", file=sys.stderr)
    _write_fit(args, {"discharge": dfit.to_dict(), "wqi": report.to_dict()},
               report.params, report.seasonal, dfit.model)


def _sim_config(args) -> SimConfig:
    return SimConfig(dt=args.dt, burn_in=args.burn_in_days, horizon=args.horizon_days,
                     i_r=args.nodes, i_R=args.nodes, seed=args.seed, stride=args.stride)


def cmd_simulate(args):
    cfg = _model_config(args)
    sim = _sim_config(args)
    seasonal = cfg.seasonal()
    if cfg.has_wqi:
        p = cfg.params()
        path = _staged("simulate", simulate_supousv, p, sim)
    else:
        path = _staged("simulate", simulate_supou, cfg.discharge(), sim)
    header = ["time_days", "Y"]
    cols = [path.times, path.y]
    conc = None
    if path.x is not None:
        header.append("X")
        cols.append(path.x)
        if seasonal is not None:
            conc = reconstruct_wqi(seasonal, path)
            header.append("C")
            cols.append(conc)
    _emit_csv(args, header, cols, args.out)
    if args.events:
        if conc is None:
            raise UsageError("--events needs a config with water-quality and seasonal keys")
        _, yd = daily_average(path.times, path.y)
        _, cd = daily_average(path.times, conc)
        events = extract_cd_events(yd, cd, args.event_quantile)
        _emit_json(args, [e.to_dict() for e in events], args.events)


def cmd_riccati(args):
    cfg = _model_config(args)
    p = cfg.params()
    grids = riccati.riccati_grids(p, args.grid_size)
    qs = _parse_q(args.q)

    def run():
        return [riccati.mgf(p, q, grids, step=args.step, t_max=args.t_end,
                            a2_ref=args.a2_ref).to_dict() for q in qs]

    res = _staged("riccati", run)
    _emit_json(args, res[0] if len(res) == 1 else res, args.out)


def cmd_acf(args):
    if args.config or args.preset:
        cfg = _model_config(args)
        lags = np.arange(0.0, args.max_lag + 0.5 * args.step, args.step)
        if cfg.has_wqi and args.series == "X":
            p = cfg.params()
            vals = _staged("stats", analytics.x_acf, p, lags,
                           *analytics.default_grids(p, args.grid_size))
        else:
            vals = analytics.discharge_acf(cfg.discharge().pi, lags)
        _emit_csv(args, ["lag_days", "acf"], [lags, vals], args.out)
        return
    if not args.input:
        raise UsageError("acf needs --input or --config")
    kind = "concentration" if args.series == "X" else "discharge"
    ts = _staged("ingest", load_timeseries, args.input, kind)
    acf = _staged("stats", empirical_acf, ts, args.max_lag, args.bin_width)
    ok = np.isfinite(acf.values)
    _emit_csv(args, ["lag_days", "acf"], [acf.lags[ok], acf.values[ok]], args.out)


def cmd_cdcurve(args):
    import csv

    try:
        with open(args.path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise StageError("ingest", exc) from exc
    if not rows or not {"time_days", "Y", "C"} <= set(rows[0]):
        raise StageError("ingest", ValueError("path CSV needs columns time_days, Y, C"))
    t = np.array([float(r["time_days"]) for r in rows])
    y = np.array([float(r["Y"]) for r in rows])
    c = np.array([float(r["C"]) for r in rows])
    _, yd = daily_average(t, y)
    _, cd = daily_average(t, c)
    events = _staged("stats", extract_cd_events, yd, cd, args.quantile)
    _emit_json(args, [e.to_dict() for e in events], args.out)
    if args.curve_csv:
        ev, k, ys, cs = [], [], [], []
        for i, e in enumerate(events):
            ev += [i] * e.y.size
            k += list(range(e.y.size))
            ys.append(e.y)
            cs.append(e.c)
        _emit_csv(args, ["event", "step", "Y", "C"],
                  [np.array(ev, dtype=int), np.array(k, dtype=int),
                   np.concatenate(ys) if ys else [], np.concatenate(cs) if cs else []],
                  args.curve_csv)


def cmd_sweep(args):
    name, _, values = args.sweep.partition("=")
    vals = _parse_floats(values, "--sweep")
    if not vals:
        raise UsageError("--sweep needs at least one value")
    if name == "eps":
        y = _staged("ingest", load_timeseries, args.discharge, "discharge")
        rows, mat = _staged("fit-discharge", sweep_epsilon, y, vals, args.pi_max_lag)
        key = "epsilon"
    elif name == "maxlag":
        if not args.wqi:
            raise UsageError("--sweep maxlag needs --wqi")
        c = _staged("ingest", load_timeseries, args.wqi, "concentration")
        rows, mat = _staged("fit-wqi", sweep_max_lag, c, vals)
        key = "max_lag_days"
    else:
        raise UsageError(f"unknown sweep {name!r} (use eps=... or maxlag=...)")
    header = [key] + [format(v, "g") for v in vals]
    cols = [np.array(rows, dtype=object)] + [mat[:, j] for j in range(mat.shape[1])]
    _emit_csv(args, header, cols, args.out)


def cmd_pipeline(args):
    if args.wqi is None and not args.discharge_only:
        raise UsageError("pipeline needs --wqi unless --discharge-only is given")
    sim = _sim_config(args)
    cfg = PipelineConfig(
        discharge=args.discharge,
        wqi=args.wqi,
        out_dir=str(_out_dir(args)),
        discharge_only=args.discharge_only,
        coupling=args.coupling,
        epsilon=args.eps,
        x_max_lag=args.max_lag,
        simulate=args.simulate,
        sim=sim,
        riccati_q=tuple(_parse_q(args.riccati_q)) if args.riccati_q else (),
        a2_ref=args.a2_ref,
        grid_size=args.grid_size,
    )
    summary = run_pipeline(cfg)
    for msg in summary["warnings"]:
        print(f"warning: {msg}", file=sys.stderr)
    _emit_json(args, summary, "-")


# -- parser ------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--out-dir", help=f"output directory (default ${OUTPUT_ENV} or .)")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_model(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--config", help="flat key = value model file")
    g.add_argument("--preset", choices=sorted(WQI), help="built-in reference parameters")
    p.add_argument("--preset-eps", type=float, default=0.1, choices=sorted(LEVY),
                   help="jump-law regularisation of the preset")


def _add_sim(p, dt=0.02, burn=50 * DAYS_PER_YEAR, horizon=10 * DAYS_PER_YEAR, stride=50):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--dt", type=float, default=dt, help="time step in days")
    p.add_argument("--burn-in-days", type=float, default=burn)
    p.add_argument("--horizon-days", type=float, default=horizon)
    p.add_argument("--nodes", type=int, default=256, help="lift nodes per measure")
    p.add_argument("--stride", type=int, default=stride, help="record every n-th step")


def _add_coupling(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--coupled", dest="coupling", action="store_const", const="coupled")
    g.add_argument("--uncoupled", dest="coupling", action="store_const", const="uncoupled")
    p.set_defaults(coupling="auto")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="supousv", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and summarise input CSVs")
    p.add_argument("--discharge")
    p.add_argument("--wqi")
    p.add_argument("--value-column", default="value")
    p.add_argument("--out", default="-")
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", help="closed-form statistics of a model config")
    _add_model(p)
    p.add_argument("--grid-size", type=int, default=analytics.DEFAULT_GRID_SIZE)
    p.add_argument("--a2-ref", type=float, help="tempering used for q_max")
    p.add_argument("--lags", help="comma-separated ACF lags in days")
    p.add_argument("--acf-csv", metavar="PREFIX", help="also write PREFIX_Y.csv / PREFIX_X.csv")
    p.add_argument("--out", default="stats.json")
    _add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("fit-discharge", help="identify the discharge model")
    p.add_argument("--discharge", required=True)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--max-lag", type=float, default=30.0)
    p.add_argument("--bin-width", type=float, default=1.0)
    p.add_argument("--out", default="fit_report.json")
    p.add_argument("--config-out", default="model.cfg")
    _add_common(p)
    p.set_defaults(func=cmd_fit_discharge)

    p = sub.add_parser("fit-wqi", help="identify discharge and water-quality models")
    p.add_argument("--discharge", required=True)
    p.add_argument("--wqi", required=True)
    _add_coupling(p)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--pi-max-lag", type=float, default=30.0)
    p.add_argument("--max-lag", type=float, default=730.0)
    p.add_argument("--bin-width", type=float)
    p.add_argument("--harmonics", type=int, default=2)
    p.add_argument("--alpha-step", type=float, default=0.005)
    p.add_argument("--grid-size", type=int, default=analytics.DEFAULT_GRID_SIZE)
    p.add_argument("--out", default="fit_report.json")
    p.add_argument("--config-out", default="model.cfg")
    _add_common(p)
    p.set_defaults(func=cmd_fit_wqi)

    p = sub.add_parser("simulate", help="Monte-Carlo path of the Markovian lift")
    _add_model(p)
    _add_sim(p)
    p.add_argument("--out", default="path.csv")
    p.add_argument("--events", help="write flood-event CD loops to this JSON file")
    p.add_argument("--event-quantile", type=float, default=0.95)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("riccati", help="stationary moment generating function of X")
    _add_model(p)
    p.add_argument("--q", required=True, help="value, list a,b,c or range start:stop:count")
    p.add_argument("--t-end", type=float, default=1e10, help="integration horizon cap (days)")
    p.add_argument("--step", type=float, default=1e-3, help="initial step (days)")
    p.add_argument("--a2-ref", type=float, help="tempering for the divergence guard")
    p.add_argument("--grid-size", type=int, default=analytics.DEFAULT_GRID_SIZE)
    p.add_argument("--out", default="-")
    _add_common(p)
    p.set_defaults(func=cmd_riccati)

    p = sub.add_parser("acf", help="empirical or model autocorrelation as plot data")
    p.add_argument("--input", help="time-series CSV")
    _add_model(p)
    p.add_argument("--series", choices=("Y", "X"), default="Y")
    p.add_argument("--max-lag", type=float, default=30.0)
    p.add_argument("--bin-width", type=float)
    p.add_argument("--step", type=float, default=1.0, help="lag spacing for model curves")
    p.add_argument("--grid-size", type=int, default=analytics.DEFAULT_GRID_SIZE)
    p.add_argument("--out", default="-")
    _add_common(p)
    p.set_defaults(func=cmd_acf)

    p = sub.add_parser("cdcurve", help="flood-event concentration-discharge loops")
    p.add_argument("--path", required=True, help="CSV written by 'simulate' (needs C)")
    p.add_argument("--quantile", type=float, default=0.95)
    p.add_argument("--out", default="cd_events.json")
    p.add_argument("--curve-csv", help="also write event,step,Y,C rows")
    _add_common(p)
    p.set_defaults(func=cmd_cdcurve)

    p = sub.add_parser("sweep", help="sensitivity sweeps over eps or the ACF window")
    p.add_argument("--sweep", required=True, help="eps=v1,v2,... or maxlag=v1,v2,...")
    p.add_argument("--discharge")
    p.add_argument("--wqi")
    p.add_argument("--pi-max-lag", type=float, default=30.0)
    p.add_argument("--out", default="-")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pipeline", help="fit, report and optionally simulate in one run")
    p.add_argument("--discharge", required=True)
    p.add_argument("--wqi")
    p.add_argument("--discharge-only", action="store_true")
    _add_coupling(p)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--max-lag", type=float, default=730.0)
    p.add_argument("--grid-size", type=int, default=analytics.DEFAULT_GRID_SIZE)
    p.add_argument("--simulate", action="store_true")
    _add_sim(p)
    p.add_argument("--riccati-q")
    p.add_argument("--a2-ref", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        args.func(args)
    except StageError as exc:
        print(json.dumps(exc.payload(), sort_keys=True), file=sys.stderr)
        return exc.exit_code
    except (ConfigError, UsageError) as exc:
        print(json.dumps({"stage": "usage", "error": type(exc).__name__,
                          "message": str(exc)}, sort_keys=True), file=sys.stderr)
        return EXIT_CODES["usage"]
    return EXIT_CODES["ok"]


if __name__ == "__main__":
    sys.exit(main())
