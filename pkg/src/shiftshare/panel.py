"""Region x industry x period data model and the derived series estimators use.

Everything is stored densely: ``RegionPanel.employment`` has shape
``(regions, industries, periods)`` and absent cells are zero. Series that can
be missing (exports, outcomes, instruments) use NaN.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DataValidationError,
    DegenerateRegionError,
    EmptySampleError,
)

log = logging.getLogger(__name__)

__all__ = [
    "ControlsConfig",
    "ControlsVector",
    "DestinationData",
    "EstimationSample",
    "Exclusion",
    "ExportsSeries",
    "OutcomeSeries",
    "RegionPanel",
    "WorldExportsSeries",
    "build_controls",
    "build_long_sample",
    "build_sample",
    "employment_outcome",
    "growth_matrix",
    "industry_shares",
    "log_growth",
    "share_matrix",
    "transform_levels",
    "wage_outcome",
]

TRANSFORMS = ("log", "ihs")


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


def _check_contiguous(periods: Sequence[int]) -> tuple[int, ...]:
    periods = tuple(int(p) for p in periods)
    if not periods:
        raise DataValidationError("panel has no periods")
    if periods != tuple(range(periods[0], periods[0] + len(periods))):
        raise DataValidationError(f"periods must form a contiguous range, got {periods}")
    return periods


class _Indexed:
    """Label lookups shared by the dense containers."""

    def region_index(self, region: str) -> int:
        try:
            return self._rpos[region]
        except KeyError:
            raise KeyError(f"unknown region {region!r}") from None

    def period_index(self, period: int) -> int:
        i = int(period) - self.periods[0]
        if not 0 <= i < len(self.periods):
            raise KeyError(f"period {period} outside {self.periods[0]}..{self.periods[-1]}")
        return i


@dataclass(frozen=True, eq=False)
class RegionPanel(_Indexed):
    """Formal employment and wage bill by region, industry and period."""

    regions: tuple[str, ...]
    industries: tuple[str, ...]
    periods: tuple[int, ...]
    employment: np.ndarray
    wage_bill: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(str(r) for r in self.regions))
        object.__setattr__(self, "industries", tuple(str(k) for k in self.industries))
        object.__setattr__(self, "periods", _check_contiguous(self.periods))
        shape = (len(self.regions), len(self.industries), len(self.periods))
        emp = _frozen(self.employment)
        wb = _frozen(self.wage_bill)
        if emp.shape != shape or wb.shape != shape:
            raise DataValidationError(f"arrays must have shape {shape}, got {emp.shape} and {wb.shape}")
        if len(set(self.regions)) != len(self.regions) or len(set(self.industries)) != len(self.industries):
            raise DataValidationError("region and industry labels must be unique")
        if not (np.isfinite(emp).all() and np.isfinite(wb).all()):
            raise DataValidationError("employment and wage bill must be finite")
        if (emp < 0).any():
            raise DataValidationError("negative employment")
        if (wb < 0).any():
            raise DataValidationError("negative wage bill")
        if ((wb > 0) & (emp <= 0)).any():
            raise DataValidationError("positive wage bill with zero employment")
        object.__setattr__(self, "employment", emp)
        object.__setattr__(self, "wage_bill", wb)
        object.__setattr__(self, "_rpos", {r: i for i, r in enumerate(self.regions)})
        object.__setattr__(self, "_kpos", {k: i for i, k in enumerate(self.industries)})

    def industry_index(self, industry: str) -> int:
        try:
            return self._kpos[industry]
        except KeyError:
            raise KeyError(f"unknown industry {industry!r}") from None

    @property
    def total_employment(self) -> np.ndarray:
        """Region totals, shape (regions, periods)."""
        return self.employment.sum(axis=1)

    @property
    def total_wage_bill(self) -> np.ndarray:
        return self.wage_bill.sum(axis=1)

    def rows(self):
        for i, r in enumerate(self.regions):
            for j, k in enumerate(self.industries):
                for t, p in enumerate(self.periods):
                    yield r, k, p, float(self.employment[i, j, t]), float(self.wage_bill[i, j, t])

    def select_industries(self, mask) -> RegionPanel:
        """Panel restricted to the industries where ``mask`` is true."""
        mask = np.asarray(mask, dtype=bool)
        return RegionPanel(
            self.regions,
            tuple(k for k, m in zip(self.industries, mask) if m),
            self.periods,
            self.employment[:, mask, :],
            self.wage_bill[:, mask, :],
        )


@dataclass(frozen=True, eq=False)
class ExportsSeries(_Indexed):
    """FOB export values by region and period; NaN where not observed."""

    regions: tuple[str, ...]
    periods: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(str(r) for r in self.regions))
        object.__setattr__(self, "periods", _check_contiguous(self.periods))
        v = _frozen(self.values)
        if v.shape != (len(self.regions), len(self.periods)):
            raise DataValidationError("exports array shape does not match labels")
        if (v[np.isfinite(v)] < 0).any() or np.isinf(v).any():
            raise DataValidationError("export values must be finite and non-negative")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_rpos", {r: i for i, r in enumerate(self.regions)})

    def value(self, region: str, period: int) -> float:
        return float(self.values[self.region_index(region), self.period_index(period)])

    def aligned(self, regions: Sequence[str], periods: Sequence[int]) -> np.ndarray:
        """Values re-indexed onto another label set (NaN where absent)."""
        out = np.full((len(regions), len(periods)), np.nan)
        for i, r in enumerate(regions):
            if r not in self._rpos:
                continue
            src = self._rpos[r]
            for t, p in enumerate(periods):
                j = int(p) - self.periods[0]
                if 0 <= j < len(self.periods):
                    out[i, t] = self.values[src, j]
        return out


@dataclass(frozen=True, eq=False)
class WorldExportsSeries:
    """Rest-of-world export values by industry and period (home country excluded)."""

    industries: tuple[str, ...]
    periods: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "industries", tuple(str(k) for k in self.industries))
        object.__setattr__(self, "periods", _check_contiguous(self.periods))
        v = _frozen(self.values)
        if v.shape != (len(self.industries), len(self.periods)):
            raise DataValidationError("world exports array shape does not match labels")
        seen = v[np.isfinite(v)]
        if (seen <= 0).any() or np.isinf(v).any():
            raise DataValidationError("world export values must be strictly positive and finite")
        object.__setattr__(self, "values", v)

    def log_level(self, industry: str, period: int) -> float:
        k = self.industries.index(industry)
        return float(np.log(self.values[k, int(period) - self.periods[0]]))

    def log_levels(self, industries: Sequence[str], periods: Sequence[int]) -> np.ndarray:
        """Log levels on another label set, NaN where not covered."""
        pos = {k: i for i, k in enumerate(self.industries)}
        out = np.full((len(industries), len(periods)), np.nan)
        for a, k in enumerate(industries):
            if k not in pos:
                continue
            for b, p in enumerate(periods):
                j = int(p) - self.periods[0]
                if 0 <= j < len(self.periods):
                    out[a, b] = np.log(self.values[pos[k], j])
        return out


@dataclass(frozen=True, eq=False)
class DestinationData:
    """Destination GDP and region-industry export shares by destination.

    ``shares[base_year]`` has shape (regions, industries, destinations) with
    NaN where a (region, industry) has no entry for that snapshot.
    """

    destinations: tuple[str, ...]
    periods: tuple[int, ...]
    gdp: np.ndarray
    regions: tuple[str, ...]
    industries: tuple[str, ...]
    shares: Mapping[int, np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "destinations", tuple(str(d) for d in self.destinations))
        object.__setattr__(self, "regions", tuple(str(r) for r in self.regions))
        object.__setattr__(self, "industries", tuple(str(k) for k in self.industries))
        object.__setattr__(self, "periods", _check_contiguous(self.periods))
        g = _frozen(self.gdp)
        if g.shape != (len(self.destinations), len(self.periods)):
            raise DataValidationError("GDP array shape does not match labels")
        if (g[np.isfinite(g)] <= 0).any() or np.isinf(g).any():
            raise DataValidationError("GDP must be positive and finite")
        object.__setattr__(self, "gdp", g)
        shape = (len(self.regions), len(self.industries), len(self.destinations))
        frozen = {}
        for year, lam in sorted(self.shares.items()):
            lam = _frozen(lam)
            if lam.shape != shape:
                raise DataValidationError(f"destination shares for {year} must have shape {shape}")
            seen = lam[np.isfinite(lam)]
            if ((seen < 0) | (seen > 1)).any():
                raise DataValidationError(f"destination shares for {year} outside [0, 1]")
            has = np.isfinite(lam).any(axis=2)
            sums = np.nansum(lam, axis=2)
            bad = has & (np.abs(sums - 1.0) > 1e-9)
            if bad.any():
                i, k = np.argwhere(bad)[0]
                raise DataValidationError(
                    f"destination shares for ({self.regions[i]}, {self.industries[k]}, {year}) "
                    f"sum to {sums[i, k]!r}, not 1"
                )
            frozen[int(year)] = lam
        object.__setattr__(self, "shares", frozen)

    @property
    def log_gdp(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.log(self.gdp)


@dataclass(frozen=True, eq=False)
class OutcomeSeries(_Indexed):
    """Log-level outcome by region and period; NaN where undefined."""

    name: str
    regions: tuple[str, ...]
    periods: tuple[int, ...]
    values: np.ndarray
    exclusions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "periods", _check_contiguous(self.periods))
        v = _frozen(self.values)
        if v.shape != (len(self.regions), len(self.periods)):
            raise DataValidationError("outcome array shape does not match labels")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "_rpos", {r: i for i, r in enumerate(self.regions)})


@dataclass(frozen=True)
class Exclusion:
    region: str
    period: int | None
    reason: str


def industry_shares(panel: RegionPanel, region: str, period: int) -> dict[str, float]:
    """Employment share of each industry in ``region`` at ``period``."""
    emp = panel.employment[panel.region_index(region), :, panel.period_index(period)]
    total = emp.sum()
    if total <= 0:
        raise DegenerateRegionError(f"region {region!r} has zero total employment in {period}")
    return {k: float(e / total) for k, e in zip(panel.industries, emp)}


def share_matrix(panel: RegionPanel, period: int) -> np.ndarray:
    """Employment shares at ``period``, shape (regions, industries); NaN rows for empty regions."""
    emp = panel.employment[:, :, panel.period_index(period)]
    total = emp.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = emp / total
    s[(total <= 0).ravel()] = np.nan
    return s


def transform_levels(values, mode: str = "log") -> np.ndarray:
    """Log (NaN at non-positive values) or inverse hyperbolic sine of levels."""
    v = np.asarray(values, dtype=float)
    if mode == "log":
        out = np.full(v.shape, np.nan)
        ok = np.isfinite(v) & (v > 0)
        out[ok] = np.log(v[ok])
        return out
    if mode == "ihs":
        return np.arcsinh(v)
    raise ConfigError(f"unknown transform {mode!r}; expected one of {TRANSFORMS}")


def log_growth(series: ExportsSeries, region: str, period: int, mode: str = "log", exclusions: list | None = None) -> float:
    """Growth of ``series`` between ``period - 1`` and ``period``.

    Under the default log policy a zero or missing value in either period
    yields NaN and an :class:`Exclusion` appended to ``exclusions``; nothing
    is zero-filled.
    """
    i = series.region_index(region)
    t = series.period_index(period)
    if t == 0:
        reason = "no previous period"
        v0 = v1 = np.nan
    else:
        v0, v1 = series.values[i, t - 1], series.values[i, t]
        reason = None
        if not (np.isfinite(v0) and np.isfinite(v1)):
            reason = "missing value"
        elif mode == "log" and (v0 <= 0 or v1 <= 0):
            reason = "non-positive value under log transform"
    if reason is not None:
        log.info("excluding (%s, %s) from growth: %s", region, period, reason)
        if exclusions is not None:
            exclusions.append(Exclusion(region, int(period), reason))
        return float("nan")
    if mode == "log":
        return float(np.log(v1) - np.log(v0))
    return float(transform_levels(v1, mode) - transform_levels(v0, mode))


def growth_matrix(series: ExportsSeries, regions: Sequence[str], periods: Sequence[int], mode: str = "log"):
    """Vectorized :func:`log_growth` on a label grid.

    Returns ``(growth, exclusions)``; ``growth[:, 0]`` is NaN (no previous
    period in the grid's first column is looked up from the series when
    available).
    """
    periods = tuple(periods)
    ext = (periods[0] - 1,) + periods
    lv = transform_levels(series.aligned(regions, ext), mode)
    g = lv[:, 1:] - lv[:, :-1]
    raw = series.aligned(regions, ext)
    exclusions = []
    bad = ~np.isfinite(g)
    for i, t in zip(*np.nonzero(bad)):
        v0, v1 = raw[i, t], raw[i, t + 1]
        if not (np.isfinite(v0) and np.isfinite(v1)):
            if periods[t] - 1 < series.periods[0]:
                continue
            reason = "missing value"
        else:
            reason = "non-positive value under log transform"
        exclusions.append(Exclusion(regions[i], int(periods[t]), reason))
    return g, exclusions


def employment_outcome(panel: RegionPanel, name: str = "employment") -> OutcomeSeries:
    """Log total employment per region and period."""
    tot = panel.total_employment
    exclusions = tuple(
        Exclusion(panel.regions[i], panel.periods[t], "zero employment")
        for i, t in zip(*np.nonzero(tot <= 0))
    )
    return OutcomeSeries(name, panel.regions, panel.periods, transform_levels(tot, "log"), exclusions)


def wage_outcome(panel: RegionPanel, name: str = "wage") -> OutcomeSeries:
    """Log average wage, wage bill over employment, per region and period."""
    emp = panel.total_employment
    wb = panel.total_wage_bill
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = np.where(emp > 0, wb / np.where(emp > 0, emp, 1.0), np.nan)
    exclusions = tuple(
        Exclusion(panel.regions[i], panel.periods[t], "no positive wage")
        for i, t in zip(*np.nonzero(~(avg > 0)))
    )
    return OutcomeSeries(name, panel.regions, panel.periods, transform_levels(avg, "log"), exclusions)


@dataclass(frozen=True)
class ControlsConfig:
    """Control construction settings.

    ``base_year`` defaults to the first panel period. ``pre_window=(2, 5)``
    gives the pre-trend ``o[t-2] - o[t-5]``.
    """

    base_year: int | None = None
    pre_window: tuple[int, int] = (2, 5)

    def __post_init__(self):
        a, b = self.pre_window
        if not (0 < a < b):
            raise ConfigError(f"pre_window must satisfy 0 < near < far, got {self.pre_window}")


@dataclass(frozen=True, eq=False)
class ControlsVector(_Indexed):
    """Pre-trend (per base period), initial log wage and non-export share per region."""

    regions: tuple[str, ...]
    periods: tuple[int, ...]
    pre_trend: np.ndarray
    initial_wage: np.ndarray
    nonexport_share: np.ndarray
    base_year: int
    ineligible: tuple[Exclusion, ...] = ()

    NAMES = ("pre_trend", "initial_wage", "nonexport_share")

    def __post_init__(self):
        object.__setattr__(self, "pre_trend", _frozen(self.pre_trend))
        object.__setattr__(self, "initial_wage", _frozen(self.initial_wage))
        object.__setattr__(self, "nonexport_share", _frozen(self.nonexport_share))
        s = self.nonexport_share[np.isfinite(self.nonexport_share)]
        if ((s < 0) | (s > 1)).any():
            raise DataValidationError("non-export share outside [0, 1]")
        object.__setattr__(self, "_rpos", {r: i for i, r in enumerate(self.regions)})

    def matrix(self, t_index: int) -> np.ndarray:
        """Controls for every region at base period index ``t_index``, shape (regions, 3)."""
        return np.column_stack([self.pre_trend[:, t_index], self.initial_wage, self.nonexport_share])

    def vector(self, region: str, period: int) -> dict[str, float]:
        i, t = self.region_index(region), self.period_index(period)
        return dict(zip(self.NAMES, self.matrix(t)[i]))


def build_controls(
    panel: RegionPanel,
    outcome: OutcomeSeries,
    exporting: Iterable[str],
    config: ControlsConfig | None = None,
) -> ControlsVector:
    """Pre-trend of ``outcome``, base-year log average wage and non-export share.

    ``exporting`` names the industries with export activity; every other
    panel industry counts toward the non-export share.
    """
    config = config or ControlsConfig()
    base = panel.periods[0] if config.base_year is None else int(config.base_year)
    if base not in panel.periods:
        raise ConfigError(f"base year {base} outside panel periods {panel.periods[0]}..{panel.periods[-1]}")
    if outcome.periods != panel.periods or outcome.regions != panel.regions:
        raise DataValidationError("outcome series must share the panel's regions and periods")
    near, far = config.pre_window
    R, T = len(panel.regions), len(panel.periods)
    o = outcome.values
    pre = np.full((R, T), np.nan)
    if T > far:
        pre[:, far:] = o[:, far - near : T - near] - o[:, : T - far]
    ineligible: list[Exclusion] = []

    b = panel.period_index(base)
    wage = wage_outcome(panel).values[:, b]
    exporting = set(exporting)
    is_exp = np.array([k in exporting for k in panel.industries])
    emp = panel.employment[:, :, b]
    tot = emp.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        nonexp = np.where(tot > 0, emp[:, ~is_exp].sum(axis=1) / np.where(tot > 0, tot, 1.0), np.nan)
    for i, r in enumerate(panel.regions):
        if not np.isfinite(wage[i]):
            ineligible.append(Exclusion(r, None, f"missing base-year ({base}) wage"))
        if not np.isfinite(nonexp[i]):
            ineligible.append(Exclusion(r, None, f"zero base-year ({base}) employment"))
        for t in range(T):
            if not np.isfinite(pre[i, t]):
                p = panel.periods[t]
                why = (
                    f"no outcome coverage for t-{far}..t-{near}"
                    if t < far or not (np.isfinite(o[i, t - far]) and np.isfinite(o[i, t - near]))
                    else "undefined pre-trend"
                )
                ineligible.append(Exclusion(r, p, why))
    return ControlsVector(panel.regions, panel.periods, pre, wage, nonexp, base, tuple(ineligible))


@dataclass(frozen=True, eq=False)
class EstimationSample:
    """Regression frame: one row per (region, base period).

    ``outcomes[h]`` holds ``o[t+h] - o[t-1]`` with NaN where the horizon is
    not fully observed; :meth:`frame` returns the complete cases for one
    horizon.
    """

    regions: np.ndarray
    periods: np.ndarray
    endog: np.ndarray
    instrument: np.ndarray
    controls: np.ndarray
    control_names: tuple[str, ...]
    cluster_ids: np.ndarray | None
    outcomes: Mapping[int, np.ndarray]
    metadata: dict = field(default_factory=dict)
    exclusions: tuple[Exclusion, ...] = ()

    @property
    def horizons(self) -> list[int]:
        return sorted(self.outcomes)

    def mask(self, h: int) -> np.ndarray:
        return np.isfinite(self.outcomes[h])

    def n_obs(self, h: int) -> int:
        return int(self.mask(h).sum())

    def counts(self) -> dict[int, int]:
        return {h: self.n_obs(h) for h in self.horizons}

    def frame(self, h: int):
        """``(y, endog, instrument, controls, cluster_ids)`` restricted to complete cases at ``h``."""
        m = self.mask(h)
        cl = None if self.cluster_ids is None else self.cluster_ids[m]
        return self.outcomes[h][m], self.endog[m], self.instrument[m], self.controls[m], cl

    def n_clusters(self, h: int | None = None) -> int:
        if self.cluster_ids is None:
            return 0
        ids = self.cluster_ids if h is None else self.cluster_ids[self.mask(h)]
        return int(np.unique(ids).size)

    def with_outcomes(self, outcomes: Mapping[int, np.ndarray], **meta) -> EstimationSample:
        md = dict(self.metadata)
        md.update(meta)
        return EstimationSample(
            self.regions, self.periods, self.endog, self.instrument, self.controls,
            self.control_names, self.cluster_ids, dict(outcomes), md, self.exclusions,
        )


def _control_columns(names: Sequence[str]) -> list[int]:
    unknown = [n for n in names if n not in ControlsVector.NAMES]
    if unknown:
        raise ConfigError(f"unknown controls {unknown}; choose from {ControlsVector.NAMES}")
    return [ControlsVector.NAMES.index(n) for n in names]


def _cluster_labels(panel: RegionPanel, cluster_key, regions: np.ndarray, periods: np.ndarray, base_index: int):
    if cluster_key is None:
        return None
    if isinstance(cluster_key, str):
        if cluster_key == "region":
            return regions.astype(str)
        if cluster_key == "period":
            return periods.astype(str)
        if cluster_key == "dominant_industry":
            dom = np.asarray(panel.industries)[panel.employment[:, :, base_index].argmax(axis=1)]
            lookup = dict(zip(panel.regions, dom))
            return np.array([lookup[r] for r in regions], dtype=str)
        raise ConfigError(
            f"unknown cluster key {cluster_key!r}; use 'region', 'period', 'dominant_industry' "
            "or a region -> cluster mapping"
        )
    missing = sorted({r for r in regions if r not in cluster_key})
    if missing:
        raise ConfigError(f"cluster mapping lacks regions: {missing[:10]}")
    return np.array([str(cluster_key[r]) for r in regions], dtype=str)


def _horizon_diff(o: np.ndarray, t: np.ndarray, i: np.ndarray, h: int, contiguous: bool = True) -> np.ndarray:
    """``o[i, t+h] - o[i, t-1]``; with ``contiguous`` NaN unless every period in between is observed."""
    T = o.shape[1]
    lo, hi = (t - 1, t + h) if h >= 0 else (t + h, t - 1)
    ok = (lo >= 0) & (hi < T)
    out = np.full(t.shape, np.nan)
    if not ok.any():
        return out
    if not contiguous:
        out[ok] = o[i[ok], t[ok] + h] - o[i[ok], t[ok] - 1]
        return out
    finite = np.isfinite(o)
    # running count of observed periods makes the contiguity test O(1) per row
    csum = np.concatenate([np.zeros((o.shape[0], 1), int), np.cumsum(finite, axis=1)], axis=1)
    ii, tt, lo_, hi_ = i[ok], t[ok], lo[ok], hi[ok]
    full = (csum[ii, hi_ + 1] - csum[ii, lo_]) == (hi_ - lo_ + 1)
    vals = np.full(ii.shape, np.nan)
    vals[full] = o[ii[full], (tt + h)[full]] - o[ii[full], (tt - 1)[full]]
    out[ok] = vals
    return out


def build_sample(
    panel: RegionPanel,
    exports: ExportsSeries,
    instrument,
    outcome: OutcomeSeries,
    controls: ControlsVector,
    horizons: Iterable[int],
    cluster_key="region",
    transform: str = "log",
    control_names: Sequence[str] = ControlsVector.NAMES,
) -> EstimationSample:
    """Assemble the local-projection regression frame.

    Rows are (region, base period) pairs with observed export growth,
    instrument and controls, ordered by region then period. Each horizon's
    outcome is the cumulative change since ``t-1``.
    """
    horizons = sorted({int(h) for h in horizons})
    if not horizons:
        raise ConfigError("no horizons requested")
    T = len(panel.periods)
    for h in horizons:
        if h >= T or h < -(T - 1):
            raise EmptySampleError(
                f"horizon {h} exceeds the panel window {panel.periods[0]}..{panel.periods[-1]}", horizon=h
            )
    if instrument.periods != panel.periods or tuple(instrument.regions) != panel.regions:
        raise DataValidationError("instrument must share the panel's regions and periods")

    g, excl = growth_matrix(exports, panel.regions, panel.periods, transform)
    z = instrument.values
    cols = _control_columns(control_names)
    ctl = np.stack([controls.matrix(t)[:, cols] for t in range(T)], axis=1)  # (R, T, p)
    o = outcome.values
    ok = np.isfinite(g) & np.isfinite(z) & np.isfinite(ctl).all(axis=2)
    ok[:, 0] = False
    ii, tt = np.nonzero(ok)  # row-major: region, then period
    regions = np.asarray(panel.regions, dtype=object)[ii].astype(str)
    periods = np.asarray(panel.periods)[tt]
    outcomes = {h: _horizon_diff(o, tt, ii, h) for h in horizons}
    for h in horizons:
        if not np.isfinite(outcomes[h]).any():
            raise EmptySampleError(f"empty estimation sample at horizon {h}", horizon=h)
    base_idx = panel.period_index(controls.base_year)
    clusters = _cluster_labels(panel, cluster_key, regions, periods, base_idx)
    meta = {
        "outcome": outcome.name,
        "instrument_kind": getattr(instrument, "kind", None),
        "cluster_key": cluster_key if isinstance(cluster_key, str) or cluster_key is None else "mapping",
        "transform": transform,
        "n_obs": {h: int(np.isfinite(outcomes[h]).sum()) for h in horizons},
    }
    return EstimationSample(
        regions=regions,
        periods=periods,
        endog=g[ii, tt],
        instrument=z[ii, tt],
        controls=ctl[ii, tt],
        control_names=tuple(control_names),
        cluster_ids=clusters,
        outcomes=outcomes,
        metadata=meta,
        exclusions=tuple(excl) + tuple(outcome.exclusions),
    )


def build_long_sample(
    panel: RegionPanel,
    exports: ExportsSeries,
    instrument,
    outcome: OutcomeSeries,
    controls: ControlsVector,
    start: int,
    end: int,
    cluster_key="region",
    transform: str = "log",
    control_names: Sequence[str] = ControlsVector.NAMES,
) -> EstimationSample:
    """Single cross-section over the window ``start -> end``.

    Export growth and outcome are cumulative changes over the window and the
    controls are those of base period ``start + 1`` (so they are dated
    ``start``). The instrument is read at period ``end``. The sample's one
    horizon key is ``end - start - 1``, which makes a one-period window
    coincide with the horizon-0 local projection.
    """
    start, end = int(start), int(end)
    if end <= start:
        raise ConfigError(f"long window must have end > start, got {start}..{end}")
    s = panel.period_index(start)
    e = panel.period_index(end)
    base = s + 1
    lv = transform_levels(exports.aligned(panel.regions, panel.periods), transform)
    dx = lv[:, e] - lv[:, s]
    z = instrument.values[:, e]
    ctl = controls.matrix(base)[:, _control_columns(control_names)]
    ok = np.isfinite(dx) & np.isfinite(z) & np.isfinite(ctl).all(axis=1)
    ii = np.flatnonzero(ok)
    h = end - start - 1
    tt = np.full(ii.shape, base)
    y = _horizon_diff(outcome.values, tt, ii, h, contiguous=False)
    if not np.isfinite(y).any():
        raise EmptySampleError(f"empty long-difference sample for {start}..{end}", horizon=h)
    regions = np.asarray(panel.regions, dtype=object)[ii].astype(str)
    periods = np.full(ii.shape, panel.periods[base])
    clusters = _cluster_labels(panel, cluster_key, regions, periods, panel.period_index(controls.base_year))
    excl = tuple(
        Exclusion(panel.regions[i], end, "undefined long-window export growth")
        for i in np.flatnonzero(~np.isfinite(dx))
    )
    return EstimationSample(
        regions=regions,
        periods=periods,
        endog=dx[ii],
        instrument=z[ii],
        controls=ctl[ii],
        control_names=tuple(control_names),
        cluster_ids=clusters,
        outcomes={h: y},
        metadata={
            "outcome": outcome.name,
            "instrument_kind": getattr(instrument, "kind", None),
            "window": (start, end),
            "transform": transform,
        },
        exclusions=excl,
    )
