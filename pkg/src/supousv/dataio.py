"""Flat key-value model configs, time-series CSV ingestion and report writers.

Config files are line oriented::

    # comment
    pi.alpha = 2.143
    [levy]            # optional section header, prefixes following keys
    a1 = 1.124

Recognised keys: ``pi.alpha``, ``pi.beta``, ``rho.alpha``, ``rho.beta``,
``levy.a1``, ``levy.a2``, ``levy.a3``, ``levy.epsilon`` (default 0.1),
``sigma``, ``mu`` and, optionally, ``seasonal.c_bar``, ``seasonal.period``,
``seasonal.A<i>`` / ``seasonal.B<i>``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .analytics import DischargeModel, SupOUSVParams
from .errors import ConfigError, DataError
from .identify import TimeSeries
from .measures import GammaMeasure, TemperedStableLevy
from .simulate import DAYS_PER_YEAR, SeasonalModel

__all__ = [
    "ModelConfig",
    "parse_config",
    "load_config",
    "dump_config",
    "load_timeseries",
    "fmt",
    "round_floats",
    "write_json",
    "format_csv",
    "write_csv",
]

log = logging.getLogger(__name__)

SIG_DIGITS = 9
MODEL_KEYS = ("pi.alpha", "pi.beta", "rho.alpha", "rho.beta", "levy.a1", "levy.a2",
              "levy.a3", "levy.epsilon", "sigma", "mu")
_SEASONAL_KEY = re.compile(r"^seasonal\.(c_bar|period|[AB][1-9][0-9]*)$")
_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


@dataclass
class ModelConfig:
    values: dict

    @property
    def has_wqi(self) -> bool:
        return all(k in self.values for k in ("rho.alpha", "rho.beta", "sigma", "mu"))

    def levy(self) -> TemperedStableLevy:
        v = self._require("levy.a1", "levy.a2", "levy.a3")
        return TemperedStableLevy(v["levy.a1"], v["levy.a2"], v["levy.a3"],
                                  self.values.get("levy.epsilon", 0.1))

    def discharge(self) -> DischargeModel:
        v = self._require("pi.alpha", "pi.beta")
        return DischargeModel(self.levy(), GammaMeasure(v["pi.alpha"], v["pi.beta"]))

    def params(self) -> SupOUSVParams:
        d = self.discharge()
        v = self._require("rho.alpha", "rho.beta", "sigma", "mu")
        return SupOUSVParams(d.levy, d.pi, GammaMeasure(v["rho.alpha"], v["rho.beta"]),
                             v["sigma"], v["mu"])

    def seasonal(self) -> SeasonalModel | None:
        if "seasonal.c_bar" not in self.values:
            return None
        harmonics = []
        i = 1
        while f"seasonal.A{i}" in self.values or f"seasonal.B{i}" in self.values:
            harmonics.append((self.values.get(f"seasonal.A{i}", 0.0),
                              self.values.get(f"seasonal.B{i}", 0.0)))
            i += 1
        return SeasonalModel(self.values["seasonal.c_bar"], tuple(harmonics),
                             self.values.get("seasonal.period", DAYS_PER_YEAR))

    def _require(self, *keys):
        missing = [k for k in keys if k not in self.values]
        if missing:
            raise ConfigError(f"config is missing required keys: {', '.join(missing)}")
        return self.values


def parse_config(text: str) -> ModelConfig:
    values = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigError(f"line {lineno}: empty section header")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if section:
            key = f"{section}.{key}"
        if key not in MODEL_KEYS and not _SEASONAL_KEY.match(key):
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            num = float(val.strip("\"'"))
        except ValueError:
            raise ConfigError(f"line {lineno}: value for {key!r} is not a number: {val!r}") from None
        if not math.isfinite(num):
            raise ConfigError(f"line {lineno}: value for {key!r} must be finite")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = num
    return ModelConfig(values)


def load_config(path) -> ModelConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def fmt(x) -> str:
    """Locale-independent float formatting with 9 significant digits."""
    return format(float(x), f".{SIG_DIGITS}g")


def dump_config(p=None, seasonal: SeasonalModel | None = None, discharge=None) -> str:
    """Serialise parameters to the flat config format."""
    lines = []
    src = p if p is not None else discharge
    if src is None:
        raise ConfigError("nothing to serialise")
    lines += [f"pi.alpha = {fmt(src.pi.alpha)}", f"pi.beta = {fmt(src.pi.beta)}"]
    lv = src.levy
    lines += [f"levy.a1 = {fmt(lv.a1)}", f"levy.a2 = {fmt(lv.a2)}",
              f"levy.a3 = {fmt(lv.a3)}", f"levy.epsilon = {fmt(lv.epsilon)}"]
    if p is not None:
        lines += [f"rho.alpha = {fmt(p.rho.alpha)}", f"rho.beta = {fmt(p.rho.beta)}",
                  f"sigma = {fmt(p.sigma)}", f"mu = {fmt(p.mu)}"]
    if seasonal is not None:
        lines += [f"seasonal.c_bar = {fmt(seasonal.c_bar)}",
                  f"seasonal.period = {fmt(seasonal.period)}"]
        for i, (a, b) in enumerate(seasonal.harmonics, start=1):
            lines += [f"seasonal.A{i} = {fmt(a)}", f"seasonal.B{i} = {fmt(b)}"]
    return "\n".join(lines) + "\n"


def _parse_time(text: str, lineno: int) -> float:
    s = text.strip()
    try:
        return float(s)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(s[:-1] + "+00:00" if s.endswith("Z") else s)
    except ValueError:
        raise DataError(f"cannot parse timestamp {s!r}", line=lineno) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return (dt - _EPOCH).total_seconds() / 86400.0


def load_timeseries(path, kind: str = "discharge", value_column: str = "value") -> TimeSeries:
    """Read a ``timestamp,<value_column>`` CSV file.

    Timestamps are ISO-8601 (naive means UTC) or plain numbers of days.
    Rows are sorted by time (with a warning if they were not); duplicate
    timestamps and, for concentrations, non-positive values are rejected
    with the offending line number.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("empty file (header expected)", line=1) from None
        if "timestamp" not in header or value_column not in header:
            raise DataError(f"header must contain 'timestamp' and {value_column!r}", line=1)
        it, iv = header.index("timestamp"), header.index(value_column)
        times, values, lines = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) <= max(it, iv):
                raise DataError("too few columns", line=lineno)
            t = _parse_time(row[it], lineno)
            try:
                v = float(row[iv])
            except ValueError:
                raise DataError(f"cannot parse value {row[iv]!r}", line=lineno) from None
            if not math.isfinite(v):
                raise DataError("value is not finite", line=lineno)
            if kind == "concentration" and v <= 0:
                raise DataError(f"non-positive concentration {v!r}", line=lineno)
            times.append(t)
            values.append(v)
            lines.append(lineno)
    if not times:
        raise DataError("no data rows")
    t = np.array(times)
    v = np.array(values)
    ln = np.array(lines)
    order = np.argsort(t, kind="stable")
    if np.any(order != np.arange(t.size)):
        warnings.warn(f"{path}: rows were not in time order; sorted", UserWarning, stacklevel=2)
        t, v, ln = t[order], v[order], ln[order]
    dup = np.flatnonzero(np.diff(t) == 0)
    if dup.size:
        raise DataError(f"duplicate timestamp {t[dup[0]]!r}", line=int(ln[dup[0] + 1]))
    return TimeSeries(t, v, kind)


def round_floats(obj):
    """Recursively round floats to 9 significant digits; NaN/inf become None."""
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(fmt(x)) if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [round_floats(v) for v in obj]
    return obj


def write_json(path, obj):
    text = json.dumps(round_floats(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def format_csv(header, columns) -> str:
    cols = [np.asarray(c) for c in columns]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*cols):
        w.writerow(["" if (isinstance(x, float) and not math.isfinite(x)) else
                    (fmt(x) if isinstance(x, (float, np.floating)) else x) for x in row])
    return buf.getvalue()


def write_csv(path, header, columns):
    Path(path).write_text(format_csv(header, columns), encoding="utf-8")
