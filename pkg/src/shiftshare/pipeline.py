"""End-to-end estimation wiring: outcome, instrument, controls, sample, fit."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace

from .errors import ConfigError, DataValidationError
from .instruments import InstrumentConfig, InstrumentSeries, build_instrument_series
from .loaders import PanelData
from .panel import (
    ControlsConfig,
    ControlsVector,
    EstimationSample,
    OutcomeSeries,
    RegionPanel,
    build_controls,
    build_long_sample,
    build_sample,
    employment_outcome,
    wage_outcome,
)
from .regress import IrfResult, LongRunResult, local_projection_irf, long_difference

__all__ = [
    "OUTCOMES",
    "SLICES",
    "EstimateConfig",
    "estimate_irf",
    "estimate_long",
    "make_instrument",
    "outcome_series",
    "parse_horizons",
    "prepare_long_sample",
    "prepare_sample",
    "slice_panel",
]

OUTCOMES = ("employment", "wage")
SLICES = ("formal", "informal", "total")
KIND_ALIASES = {
    "baseline": "baseline_world_exports",
    "world": "baseline_world_exports",
    "destination": "destination_gdp",
    "long": "long_difference",
}


def parse_horizons(text) -> tuple[int, int]:
    """``"-5:10"`` -> ``(-5, 10)``; sequences pass through as (min, max)."""
    if isinstance(text, str):
        try:
            lo, hi = (int(x) for x in text.split(":"))
        except ValueError:
            raise ConfigError(f"horizons must look like 'lo:hi', got {text!r}") from None
    else:
        lo, hi = (int(x) for x in text)
    if lo > hi:
        raise ConfigError(f"empty horizon window {lo}:{hi}")
    return lo, hi


@dataclass(frozen=True)
class EstimateConfig:
    """Everything that shapes one local-projection or long-difference run.

    ``industries`` restricts the outcome to a subset of panel industries
    (for example the risky ones); the instrument and endogenous regressor
    always use the full panel.
    """

    kind: str = "baseline_world_exports"
    horizons: tuple[int, int] = (-5, 10)
    outcome: str = "employment"
    slice: str = "formal"
    cluster_key: object = "region"
    cov_type: str = "cluster"
    estimator: str = "tsls"
    transform: str = "log"
    base_year: int | None = None
    pre_window: tuple[int, int] = (2, 5)
    controls: tuple[str, ...] = ControlsVector.NAMES
    dest_share_year: int | None = None
    industries: tuple[str, ...] | None = None
    period_effects: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", KIND_ALIASES.get(self.kind, self.kind))
        object.__setattr__(self, "horizons", parse_horizons(self.horizons))
        object.__setattr__(self, "pre_window", tuple(int(x) for x in self.pre_window))
        object.__setattr__(self, "controls", tuple(self.controls))
        if self.outcome not in OUTCOMES:
            raise ConfigError(f"outcome must be one of {OUTCOMES}, got {self.outcome!r}")
        if self.slice not in SLICES:
            raise ConfigError(f"slice must be one of {SLICES}, got {self.slice!r}")
        if self.estimator not in ("tsls", "ols"):
            raise ConfigError(f"estimator must be 'tsls' or 'ols', got {self.estimator!r}")

    @property
    def horizon_range(self) -> list[int]:
        return list(range(self.horizons[0], self.horizons[1] + 1))


def slice_panel(data: PanelData, slice: str) -> RegionPanel:
    """Formal, informal or combined employment panel."""
    if slice == "formal":
        return data.panel
    if data.informal is None:
        raise DataValidationError(f"slice {slice!r} needs informal_panel.csv")
    if slice == "informal":
        return data.informal
    p, q = data.panel, data.informal
    return RegionPanel(p.regions, p.industries, p.periods, p.employment + q.employment, p.wage_bill + q.wage_bill)


def outcome_series(data: PanelData, outcome="employment", slice="formal", industries=None) -> OutcomeSeries:
    panel = slice_panel(data, slice)
    if industries is not None:
        wanted = set(industries)
        unknown = wanted - set(panel.industries)
        if unknown:
            raise ConfigError(f"unknown industries {sorted(unknown)}")
        panel = panel.select_industries([k in wanted for k in panel.industries])
    make = employment_outcome if outcome == "employment" else wage_outcome
    return make(panel, name=f"{outcome}:{slice}")


def make_instrument(data: PanelData, kind: str, window=None, dest_share_year=None) -> InstrumentSeries:
    kind = KIND_ALIASES.get(kind, kind)
    cfg = InstrumentConfig(
        nontraded=tuple(data.schema.nontraded), window=window, dest_share_year=dest_share_year
    )
    if kind == "destination_gdp":
        if data.destinations is None:
            raise DataValidationError("destination instrument needs dest_gdp.csv and dest_shares.csv")
        return build_instrument_series(data.panel, data.destinations, kind, cfg)
    return build_instrument_series(data.panel, data.world, kind, cfg)


def _controls(data: PanelData, outcome: OutcomeSeries, config: EstimateConfig) -> ControlsVector:
    base = config.base_year if config.base_year is not None else data.schema.base_year
    return build_controls(
        data.panel, outcome, data.exporting_industries, ControlsConfig(base, config.pre_window)
    )


def prepare_sample(
    data: PanelData, config: EstimateConfig, instrument: InstrumentSeries | None = None
) -> EstimationSample:
    if config.kind == "long_difference":
        raise ConfigError("local projections need an annual instrument kind; use estimate_long for long windows")
    outcome = outcome_series(data, config.outcome, config.slice, config.industries)
    inst = instrument or make_instrument(data, config.kind, dest_share_year=config.dest_share_year)
    controls = _controls(data, outcome, config)
    return build_sample(
        data.panel,
        data.exports,
        inst,
        outcome,
        controls,
        config.horizon_range,
        cluster_key=config.cluster_key,
        transform=config.transform,
        control_names=config.controls,
    )


def estimate_irf(
    data: PanelData, config: EstimateConfig | None = None, threads: int = 1, instrument=None
) -> IrfResult:
    """Local-projection impulse response for one outcome slice."""
    config = config or EstimateConfig()
    sample = prepare_sample(data, config, instrument)
    return local_projection_irf(
        sample,
        config.horizon_range,
        cov_type=config.cov_type,
        estimator=config.estimator,
        threads=threads,
        period_effects=config.period_effects,
    )


def prepare_long_sample(data: PanelData, start: int, end: int, config: EstimateConfig) -> EstimationSample:
    outcome = outcome_series(data, config.outcome, config.slice, config.industries)
    if config.kind == "long_difference":
        inst = make_instrument(data, "long_difference", window=(start, end))
    else:
        raise ConfigError("long-difference estimation uses the long_difference instrument kind")
    controls = _controls(data, outcome, config)
    return build_long_sample(
        data.panel,
        data.exports,
        inst,
        outcome,
        controls,
        start,
        end,
        cluster_key=config.cluster_key,
        transform=config.transform,
        control_names=config.controls,
    )


def estimate_long(
    data: PanelData,
    start: int,
    end: int,
    config: EstimateConfig | None = None,
    rows: Sequence[tuple[str, str]] = (("employment", "formal"),),
    fixed_effects: Mapping[str, str] | None = None,
    slice_industries: Mapping[str, Sequence[str]] | None = None,
) -> LongRunResult:
    """Long-run elasticity table over ``start -> end``.

    ``rows`` lists (outcome, slice) pairs. Slices beyond formal/informal/total
    are looked up in ``slice_industries`` and estimated on formal employment
    in those industries. With ``fixed_effects`` every row is estimated both
    without and with the group effects.
    """
    config = replace(config or EstimateConfig(), kind="long_difference")
    slice_industries = dict(slice_industries or {})
    results = []
    for outcome, sl in rows:
        if sl in SLICES:
            cfg = replace(config, outcome=outcome, slice=sl, industries=None)
        elif sl in slice_industries:
            cfg = replace(config, outcome=outcome, slice="formal", industries=tuple(slice_industries[sl]))
        else:
            raise ConfigError(f"unknown slice {sl!r}")
        sample = prepare_long_sample(data, start, end, cfg)
        fes = [None] if fixed_effects is None else [None, fixed_effects]
        for fe in fes:
            results.append(
                long_difference(sample, fixed_effects=fe, outcome=outcome, slice=sl, cov_type=config.cov_type)
            )
    return LongRunResult.combine(results)
