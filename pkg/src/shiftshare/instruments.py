"""Shift-share exposure measures.

Three constructions share one weighting scheme, lagged local employment
shares:

* ``baseline_world_exports``: shares times one-period log growth of
  rest-of-world exports by industry;
* ``destination_gdp``: shares times each industry's export-share-weighted
  log GDP growth of foreign destinations;
* ``long_difference``: start-of-window shares times the log change of world
  exports over the whole window.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ._csv import parse_float, parse_int, read_rows, write_rows
from .errors import ConfigError, DataValidationError
from .panel import (
    DestinationData,
    Exclusion,
    RegionPanel,
    WorldExportsSeries,
    share_matrix,
)

__all__ = [
    "KINDS",
    "InstrumentConfig",
    "InstrumentSeries",
    "build_instrument_series",
    "read_instrument_csv",
    "shift_share_baseline",
    "shift_share_destination",
    "shift_share_long",
    "write_instrument_csv",
]

KINDS = ("baseline_world_exports", "destination_gdp", "long_difference")
SHARE_TOL = 1e-9


def _check_shares(shares: Mapping[str, float]) -> None:
    total = math.fsum(shares.values())
    if abs(total - 1.0) > SHARE_TOL:
        raise ValueError(f"shares sum to {total!r}, not 1")
    neg = [k for k, s in shares.items() if s < 0]
    if neg:
        raise ValueError(f"negative shares for {neg}")


def shift_share_baseline(shares: Mapping[str, float], world_growth: Mapping[str, float]) -> float:
    """Share-weighted sum of industry shifters.

    Industries with zero share may be absent from ``world_growth``; any
    positive-share industry without a shifter is an error.
    """
    _check_shares(shares)
    total = []
    for k, s in shares.items():
        if s == 0:
            continue
        if k not in world_growth or not np.isfinite(world_growth[k]):
            raise KeyError(f"no world-export shifter for industry {k!r} (share {s:g})")
        total.append(s * world_growth[k])
    return math.fsum(total)


def shift_share_destination(
    shares: Mapping[str, float],
    dest_shares: Mapping[str, Mapping[str, float]],
    gdp_growth: Mapping[str, float],
) -> float:
    """Exposure to destination GDP growth through each industry's export destinations.

    ``dest_shares[k][d]`` is the share of destination ``d`` in the region's
    exports of industry ``k``. Industries without destination entries
    contribute nothing.
    """
    _check_shares(shares)
    total = []
    for k, s in shares.items():
        if s == 0 or k not in dest_shares or not dest_shares[k]:
            continue
        lam = dest_shares[k]
        lsum = math.fsum(lam.values())
        if abs(lsum - 1.0) > SHARE_TOL:
            raise ValueError(f"destination shares of industry {k!r} sum to {lsum!r}, not 1")
        inner = []
        for d, w in lam.items():
            if w == 0:
                continue
            if d not in gdp_growth or not np.isfinite(gdp_growth[d]):
                raise KeyError(f"no GDP growth for destination {d!r}")
            inner.append(w * gdp_growth[d])
        total.append(s * math.fsum(inner))
    return math.fsum(total)


def shift_share_long(
    shares_at_start: Mapping[str, float],
    start_levels: Mapping[str, float],
    end_levels: Mapping[str, float],
) -> float:
    """Start-of-window shares times the log change of world export levels."""
    growth = {}
    for k, s in shares_at_start.items():
        if s == 0:
            continue
        a, b = start_levels.get(k), end_levels.get(k)
        if a is None or b is None:
            raise KeyError(f"world export level for industry {k!r} missing at an endpoint")
        if not (a > 0 and b > 0):
            raise ValueError(f"world export levels for industry {k!r} must be positive, got {a}, {b}")
        growth[k] = math.log(b) - math.log(a)
    return shift_share_baseline(shares_at_start, growth)


@dataclass(frozen=True)
class InstrumentConfig:
    """Settings for :func:`build_instrument_series`.

    ``nontraded`` industries carry a zero shifter. ``window`` is the
    ``(start, end)`` pair of the long-difference kind. ``dest_share_year``
    pins one destination-share snapshot; by default each period ``t`` uses
    the ``t - 1`` snapshot.
    """

    nontraded: tuple[str, ...] = ()
    window: tuple[int, int] | None = None
    dest_share_year: int | None = None
    shifter_note: str = ""


@dataclass(frozen=True, eq=False)
class InstrumentSeries:
    """Instrument values by region and base period (NaN where ineligible)."""

    kind: str
    regions: tuple[str, ...]
    periods: tuple[int, ...]
    values: np.ndarray
    metadata: dict = field(default_factory=dict)
    exclusions: tuple[Exclusion, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown instrument kind {self.kind!r}; expected one of {KINDS}")
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != (len(self.regions), len(self.periods)):
            raise DataValidationError("instrument array shape does not match labels")
        if np.isinf(v).any():
            raise DataValidationError("instrument values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "periods", tuple(int(p) for p in self.periods))

    def value(self, region: str, period: int) -> float:
        return float(self.values[self.regions.index(region), int(period) - self.periods[0]])

    def entries(self):
        for i, r in enumerate(self.regions):
            for t, p in enumerate(self.periods):
                v = self.values[i, t]
                if np.isfinite(v):
                    yield r, p, float(v)

    def to_frame(self) -> pd.DataFrame:
        rows = [(r, p, self.kind, v) for r, p, v in self.entries()]
        return pd.DataFrame(rows, columns=["region_id", "base_year", "kind", "value"])


def _world_growth(world: WorldExportsSeries, industries, periods, nontraded):
    """One-period log growth on (industries, periods); rows of non-traded industries are 0."""
    ext = (periods[0] - 1,) + tuple(periods)
    lv = world.log_levels(industries, ext)
    g = lv[:, 1:] - lv[:, :-1]
    for a, k in enumerate(industries):
        if k in nontraded:
            g[a] = 0.0
    return g


def _combine(panel, shares, shifter, t, period, values, exclusions):
    """Fill ``values[:, t]`` with shares @ shifter; hard error on uncovered positive shares."""
    ok = np.isfinite(shares).all(axis=1)
    for i in np.flatnonzero(~ok):
        exclusions.append(Exclusion(panel.regions[i], period, "degenerate shares"))
    s = shares[ok]
    used = s > 0
    bad = used & ~np.isfinite(shifter)[None, :]
    if bad.any():
        i, k = np.argwhere(bad)[0]
        r = np.asarray(panel.regions)[ok][i]
        raise DataValidationError(
            f"industry {panel.industries[k]!r} has positive employment share in region {r!r} "
            f"at {period - 1} but no shifter for {period}"
        )
    values[ok, t] = np.where(used, s, 0.0) @ np.where(np.isfinite(shifter), shifter, 0.0)


def build_instrument_series(
    panel: RegionPanel,
    shifters,
    kind: str = "baseline_world_exports",
    config: InstrumentConfig | None = None,
) -> InstrumentSeries:
    """Vectorize one of the three constructions over all regions and periods.

    ``shifters`` is a :class:`WorldExportsSeries` for the baseline and long
    kinds and a :class:`DestinationData` for ``destination_gdp``. Values for
    period ``t`` use employment shares at ``t - 1``; the long kind fills only
    the window's end period.
    """
    config = config or InstrumentConfig()
    if kind not in KINDS:
        raise ConfigError(f"unknown instrument kind {kind!r}; expected one of {KINDS}")
    if kind == "destination_gdp" and not isinstance(shifters, DestinationData):
        raise ConfigError("destination_gdp instrument needs DestinationData shifters")
    if kind != "destination_gdp" and not isinstance(shifters, WorldExportsSeries):
        raise ConfigError(f"{kind} instrument needs WorldExportsSeries shifters")
    nontraded = set(config.nontraded)
    R, T = len(panel.regions), len(panel.periods)
    values = np.full((R, T), np.nan)
    exclusions: list[Exclusion] = []
    meta = {"kind": kind, "share_lag": 1, "nontraded": sorted(nontraded), "shifter_note": config.shifter_note}

    if kind == "baseline_world_exports":
        g = _world_growth(shifters, panel.industries, panel.periods, nontraded)
        for t in range(1, T):
            _combine(panel, share_matrix(panel, panel.periods[t - 1]), g[:, t], t, panel.periods[t], values, exclusions)
        meta["shifter_source"] = "world exports, one-period log growth"
    elif kind == "long_difference":
        if config.window is None:
            raise ConfigError("long_difference instrument needs a (start, end) window")
        start, end = (int(x) for x in config.window)
        if not (panel.periods[0] <= start < end <= panel.periods[-1]):
            raise ConfigError(f"window {start}..{end} outside panel {panel.periods[0]}..{panel.periods[-1]}")
        lv = shifters.log_levels(panel.industries, (start, end))
        g = lv[:, 1] - lv[:, 0]
        for a, k in enumerate(panel.industries):
            if k in nontraded:
                g[a] = 0.0
        e = panel.period_index(end)
        shares = share_matrix(panel, start)
        for i, r in enumerate(panel.regions):
            s = shares[i]
            if not np.isfinite(s).all():
                exclusions.append(Exclusion(r, end, "degenerate shares"))
                continue
            bad = (s > 0) & ~np.isfinite(g)
            if bad.any():
                k = panel.industries[int(np.flatnonzero(bad)[0])]
                raise DataValidationError(
                    f"world export level for industry {k!r} missing at an endpoint of {start}..{end}"
                )
            used = s > 0
            values[i, e] = float(s[used] @ g[used])
        meta.update(window=[start, end], shifter_source="world exports, long log difference")
    else:
        dest = shifters
        rpos = {r: i for i, r in enumerate(dest.regions)}
        kpos = [dest.industries.index(k) if k in dest.industries else -1 for k in panel.industries]
        ext = (panel.periods[0] - 1,) + panel.periods
        gdp = np.full((len(dest.destinations), len(ext)), np.nan)
        for b, p in enumerate(ext):
            j = p - dest.periods[0]
            if 0 <= j < len(dest.periods):
                gdp[:, b] = dest.log_gdp[:, j]
        dy = gdp[:, 1:] - gdp[:, :-1]
        for t in range(1, T):
            period = panel.periods[t]
            snap = config.dest_share_year if config.dest_share_year is not None else period - 1
            lam_all = dest.shares.get(int(snap))
            shares = share_matrix(panel, period - 1)
            for i, r in enumerate(panel.regions):
                s = shares[i]
                if not np.isfinite(s).all():
                    exclusions.append(Exclusion(r, period, "degenerate shares"))
                    continue
                if lam_all is None or r not in rpos:
                    exclusions.append(Exclusion(r, period, f"no destination shares for {snap}"))
                    continue
                lam = np.full((len(panel.industries), len(dest.destinations)), np.nan)
                for a, ka in enumerate(kpos):
                    if ka >= 0:
                        lam[a] = lam_all[rpos[r], ka]
                has = np.isfinite(lam).any(axis=1) & (s > 0)
                if not has.any():
                    exclusions.append(Exclusion(r, period, f"no destination shares for {snap}"))
                    continue
                lam = np.nan_to_num(lam[has])
                need = (lam > 0) & ~np.isfinite(dy[:, t])[None, :]
                if need.any():
                    d = dest.destinations[int(np.argwhere(need)[0][1])]
                    raise DataValidationError(f"no GDP growth for destination {d!r} at {period}")
                inner = lam @ np.nan_to_num(dy[:, t])
                values[i, t] = float(s[has] @ inner)
        meta.update(
            shifter_source="destination log GDP growth",
            dest_share_year=config.dest_share_year if config.dest_share_year is not None else "t-1",
        )

    if not np.isfinite(values).any():
        raise DataValidationError(f"no eligible (region, period) pairs for the {kind} instrument")
    return InstrumentSeries(kind, panel.regions, panel.periods, values, meta, tuple(exclusions))


def write_instrument_csv(series: InstrumentSeries, path) -> None:
    write_rows(path, ["region_id", "base_year", "kind", "value"], ((r, p, series.kind, v) for r, p, v in series.entries()))


def read_instrument_csv(path, regions: Iterable[str], periods: Iterable[int]) -> InstrumentSeries:
    """Load ``instrument.csv`` onto a panel's label grid."""
    regions = tuple(regions)
    periods = tuple(int(p) for p in periods)
    rpos = {r: i for i, r in enumerate(regions)}
    values = np.full((len(regions), len(periods)), np.nan)
    kinds = set()
    seen = set()
    for line, row in read_rows(path, ["region_id", "base_year", "kind", "value"]):
        key = (row["region_id"], parse_int(row["base_year"], "base_year", path, line))
        if key in seen:
            raise DataValidationError(f"duplicate instrument entry {key}", path, line)
        seen.add(key)
        kinds.add(row["kind"])
        v = parse_float(row["value"], "value", path, line)
        i = rpos.get(key[0])
        t = key[1] - periods[0]
        if i is None or not 0 <= t < len(periods):
            continue
        values[i, t] = v
    if len(kinds) != 1:
        raise DataValidationError(f"instrument file must hold exactly one kind, found {sorted(kinds)}", path)
    return InstrumentSeries(kinds.pop(), regions, periods, values, {"source": Path(path).name})
