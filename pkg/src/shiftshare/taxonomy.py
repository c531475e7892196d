"""Environmental taxonomy: activity flags, concordances, shares and subgroups.

An activity is *risky* when it needs environmental-impact licensing and
*sustainable* when its contribution level is ``"high"``. The two flags are
independent; an activity may carry both. Concordances carry flags from one
classification vintage to another; the default propagation rule is ``any``.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter
from pathlib import Path

import numpy as np
import pandas as pd

from ._csv import parse_bool, read_rows, write_rows
from .errors import ConfigError, DataValidationError, DegenerateRegionError
from .panel import Exclusion, OutcomeSeries, RegionPanel, transform_levels

__all__ = [
    "LEVELS",
    "RULES",
    "SEGMENTS",
    "SLICES",
    "ActivityClassification",
    "AnnotatedPanel",
    "Concordance",
    "SubgroupSeries",
    "apply_chain",
    "apply_concordance",
    "check_chain",
    "classify_panel",
    "compose",
    "read_classification_csv",
    "read_concordance_csv",
    "share_correlation",
    "share_table",
    "shares",
    "subgroup_outcomes",
    "write_annotated_csv",
    "write_classification_csv",
]

LEVELS = ("high", "moderate", "none")
RULES = ("any", "all", "majority")
SLICES = ("risky", "nonrisky", "sustainable", "nonsustainable")
SEGMENTS = ("formal", "informal", "total")


@dataclass(frozen=True)
class ActivityClassification:
    """Per-activity flags: ``records[code] = (risky, contribution_level)``.

    ``sustainable`` is derived, true exactly when the level is ``"high"``.
    """

    records: Mapping[str, tuple[bool, str]]

    def __post_init__(self):
        clean = {}
        for code, (risky, level) in self.records.items():
            level = str(level).strip().lower()
            if level not in LEVELS:
                raise DataValidationError(f"activity {code!r}: contribution level {level!r} not in {LEVELS}")
            clean[str(code)] = (bool(risky), level)
        object.__setattr__(self, "records", dict(sorted(clean.items())))

    @classmethod
    def from_flags(cls, risky: Mapping[str, bool], sustainable: Mapping[str, bool]) -> ActivityClassification:
        """Build from two boolean maps over the same codes (sustainable -> level ``high``)."""
        if set(risky) != set(sustainable):
            raise DataValidationError("risky and sustainable flags must cover the same codes")
        return cls({c: (risky[c], "high" if sustainable[c] else "none") for c in risky})

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(self.records)

    def __len__(self):
        return len(self.records)

    def __contains__(self, code):
        return code in self.records

    def risky(self, code: str) -> bool:
        return self.records[code][0]

    def sustainable(self, code: str) -> bool:
        return self.records[code][1] == "high"

    def level(self, code: str) -> str:
        return self.records[code][1]

    def rows(self):
        for code, (risky, level) in self.records.items():
            yield code, risky, level == "high", level


def read_classification_csv(path) -> ActivityClassification:
    """``activity_code,risky,contribution_level``; duplicate codes are rejected."""
    records: dict[str, tuple[bool, str]] = {}
    seen: dict[str, int] = {}
    for line, row in read_rows(path, ("activity_code", "risky", "contribution_level")):
        code = row["activity_code"]
        if not code:
            raise DataValidationError("empty activity code", path, line)
        if code in seen:
            raise DataValidationError(f"duplicate activity code {code!r} (first on line {seen[code]})", path, line)
        seen[code] = line
        level = row["contribution_level"].lower()
        if level not in LEVELS:
            raise DataValidationError(f"contribution level {level!r} not in {LEVELS}", path, line)
        records[code] = (parse_bool(row["risky"], "risky flag", path, line), level)
    return ActivityClassification(records)


def write_classification_csv(classification, path) -> None:
    """Write an :class:`ActivityClassification` or a ``code -> (risky, level)`` map."""
    records = classification.records if isinstance(classification, ActivityClassification) else classification
    write_rows(
        path,
        ["activity_code", "risky", "contribution_level"],
        ((c, "1" if r else "0", lvl) for c, (r, lvl) in sorted(records.items())),
    )


@dataclass(frozen=True)
class Concordance:
    """Links from source codes to target codes, deduplicated and sorted."""

    links: tuple[tuple[str, str], ...]
    name: str = ""

    def __post_init__(self):
        links = tuple(sorted({(str(a), str(b)) for a, b in self.links}))
        if not links:
            raise DataValidationError(f"concordance {self.name or ''} has no links".replace("  ", " "))
        object.__setattr__(self, "links", links)
        fwd: dict[str, list[str]] = {}
        for a, b in links:
            fwd.setdefault(a, []).append(b)
        object.__setattr__(self, "_fwd", {a: tuple(bs) for a, bs in fwd.items()})

    @property
    def sources(self) -> tuple[str, ...]:
        return tuple(self._fwd)

    @property
    def targets_all(self) -> tuple[str, ...]:
        return tuple(sorted({b for _, b in self.links}))

    def targets(self, source: str) -> tuple[str, ...]:
        return self._fwd.get(source, ())


def read_concordance_csv(path, name: str | None = None) -> Concordance:
    links = []
    for line, row in read_rows(path, ("source_code", "target_code")):
        if not row["source_code"] or not row["target_code"]:
            raise DataValidationError("empty code in concordance link", path, line)
        links.append((row["source_code"], row["target_code"]))
    if not links:
        raise DataValidationError("concordance has no links", path)
    return Concordance(tuple(links), name or Path(path).stem)


def check_chain(concordances: Sequence[Concordance]) -> None:
    """Reject chains whose links, taken together, map some code back to itself.

    Identity links (a code kept unchanged between vintages) are allowed.
    """
    graph: dict[str, set[str]] = {}
    for c in concordances:
        for a, b in c.links:
            if a != b:
                graph.setdefault(b, set()).add(a)
    try:
        tuple(TopologicalSorter(graph).static_order())
    except CycleError as exc:
        cycle = exc.args[1]
        raise DataValidationError(f"concordance chain contains a cycle: {' -> '.join(reversed(cycle))}") from None


def compose(first: Concordance, second: Concordance) -> Concordance:
    """Single concordance equivalent to applying ``first`` then ``second``."""
    links = [(a, c) for a, b in first.links for c in second.targets(b)]
    if not links:
        raise DataValidationError(f"concordances {first.name!r} and {second.name!r} share no codes")
    return Concordance(tuple(links), f"{first.name}+{second.name}")


def _combine(flags: Sequence[bool], rule: str) -> bool:
    n = sum(flags)
    if rule == "any":
        return n >= 1
    if rule == "all":
        return n == len(flags)
    return 2 * n > len(flags)


def apply_concordance(
    classification: ActivityClassification, concordance: Concordance, rule: str = "any"
) -> ActivityClassification:
    """Carry flags to the concordance's target codes.

    For each target reached from at least one classified source, the risky
    flag, the sustainable flag and the "at least moderate" flag are each
    combined across its classified sources under ``rule``: ``any`` (one
    flagged source suffices), ``all`` or ``majority`` (strictly more than
    half). Source codes of the concordance without a classification are
    ignored; classified codes missing from the concordance are an error.
    """
    if rule not in RULES:
        raise ConfigError(f"unknown propagation rule {rule!r}; expected one of {RULES}")
    if not len(classification):
        raise DataValidationError("empty classification")
    src = set(concordance.sources)
    unmapped = [c for c in classification.codes if c not in src]
    if unmapped:
        raise DataValidationError(f"classified codes missing from concordance {concordance.name!r}: {unmapped}")
    inbound: dict[str, list[str]] = {}
    for a, b in concordance.links:
        if a in classification:
            inbound.setdefault(b, []).append(a)
    out = {}
    for target in sorted(inbound):
        sources = inbound[target]
        risky = _combine([classification.risky(a) for a in sources], rule)
        if _combine([classification.sustainable(a) for a in sources], rule):
            level = "high"
        elif _combine([classification.level(a) != "none" for a in sources], rule):
            level = "moderate"
        else:
            level = "none"
        out[target] = (risky, level)
    return ActivityClassification(out)


def apply_chain(
    classification: ActivityClassification, concordances: Sequence[Concordance], rule: str = "any"
) -> ActivityClassification:
    """Apply concordances in the declared order after checking the chain for cycles."""
    check_chain(concordances)
    for c in concordances:
        classification = apply_concordance(classification, c, rule)
    return classification


@dataclass(frozen=True, eq=False)
class AnnotatedPanel:
    """A panel whose industry codes carry risky / sustainable flags."""

    panel: RegionPanel
    risky: np.ndarray
    sustainable: np.ndarray
    informal: RegionPanel | None = None
    sectors: tuple[str, ...] | None = None

    @property
    def risky_industries(self) -> tuple[str, ...]:
        return tuple(k for k, f in zip(self.panel.industries, self.risky) if f)

    @property
    def sustainable_industries(self) -> tuple[str, ...]:
        return tuple(k for k, f in zip(self.panel.industries, self.sustainable) if f)

    def counts_by_sector(self) -> pd.DataFrame:
        """Activities, risky activities and sustainable activities per sector."""
        sectors = self.sectors or self.panel.industries
        df = pd.DataFrame({"sector": sectors, "risky": self.risky.astype(int), "sustainable": self.sustainable.astype(int)})
        g = df.groupby("sector", sort=True)
        out = pd.DataFrame(
            {"n_activities": g.size(), "n_risky": g["risky"].sum(), "n_sustainable": g["sustainable"].sum()}
        )
        return out.reset_index()


def classify_panel(
    panel: RegionPanel,
    classification: ActivityClassification,
    informal: RegionPanel | None = None,
    sectors: Mapping[str, str] | None = None,
) -> AnnotatedPanel:
    """Attach flags to every panel activity code.

    ``sectors`` optionally maps activity codes to the sector used when
    counting flagged activities.
    """
    if not len(classification):
        raise DataValidationError("empty classification")
    missing = [k for k in panel.industries if k not in classification]
    if missing:
        raise DataValidationError(f"panel activity codes without a classification: {missing}")
    if informal is not None and informal.industries != panel.industries:
        raise DataValidationError("informal panel must use the formal panel's activity codes")
    sec = None
    if sectors is not None:
        nosec = [k for k in panel.industries if k not in sectors]
        if nosec:
            raise DataValidationError(f"activity codes without a sector: {nosec}")
        sec = tuple(str(sectors[k]) for k in panel.industries)
    risky = np.array([classification.risky(k) for k in panel.industries], dtype=bool)
    sust = np.array([classification.sustainable(k) for k in panel.industries], dtype=bool)
    risky.setflags(write=False)
    sust.setflags(write=False)
    return AnnotatedPanel(panel, risky, sust, informal, sec)


def shares(annotated: AnnotatedPanel, region: str, period: int) -> tuple[float, float]:
    """``(risky_share, sustainable_share)`` of formal employment.

    The non-risky share is ``1 - risky_share`` by definition, so the two
    always sum to one exactly.
    """
    p = annotated.panel
    emp = p.employment[p.region_index(region), :, p.period_index(period)]
    total = emp.sum()
    if total <= 0:
        raise DegenerateRegionError(f"region {region!r} has zero employment in {period}")
    return float(emp[annotated.risky].sum() / total), float(emp[annotated.sustainable].sum() / total)


def share_table(annotated: AnnotatedPanel, period: int) -> pd.DataFrame:
    """Shares for every region with positive employment at ``period``."""
    p = annotated.panel
    t = p.period_index(period)
    emp = p.employment[:, :, t]
    total = emp.sum(axis=1)
    ok = total > 0
    risky = emp[:, annotated.risky].sum(axis=1)
    sust = emp[:, annotated.sustainable].sum(axis=1)
    idx = np.flatnonzero(ok)
    return pd.DataFrame(
        {
            "region_id": [p.regions[i] for i in idx],
            "year": period,
            "employment": total[idx],
            "risky_share": risky[idx] / total[idx],
            "sustainable_share": sust[idx] / total[idx],
        }
    )


def share_correlation(annotated: AnnotatedPanel, period: int) -> float:
    """Cross-region Pearson correlation between risky and sustainable shares."""
    t = share_table(annotated, period)
    if len(t) < 2:
        raise DataValidationError("need at least two regions with employment")
    return float(np.corrcoef(t["risky_share"], t["sustainable_share"])[0, 1])


@dataclass(frozen=True, eq=False)
class SubgroupSeries:
    """Employment and wage bill per (slice, segment), each shaped (regions, periods).

    Slices are ``risky``, ``nonrisky``, ``sustainable`` and
    ``nonsustainable``; segments are ``formal``, ``informal`` (when an
    informal panel is attached) and ``total``. ``report`` lists slices with
    no employment anywhere.
    """

    regions: tuple[str, ...]
    periods: tuple[int, ...]
    employment: Mapping[tuple[str, str], np.ndarray]
    wage_bill: Mapping[tuple[str, str], np.ndarray]
    totals: Mapping[str, np.ndarray]
    report: tuple[str, ...] = ()

    @property
    def segments(self) -> tuple[str, ...]:
        return tuple(s for s in SEGMENTS if s in self.totals)

    def outcome(self, slice: str, segment: str = "formal", kind: str = "employment") -> OutcomeSeries:
        """Log-level outcome; cells with zero employment are NaN and listed as exclusions."""
        if (slice, segment) not in self.employment:
            raise KeyError((slice, segment))
        emp = self.employment[(slice, segment)]
        if kind == "employment":
            level = emp
        elif kind == "wage":
            with np.errstate(invalid="ignore", divide="ignore"):
                level = np.where(emp > 0, self.wage_bill[(slice, segment)] / np.where(emp > 0, emp, 1.0), 0.0)
        else:
            raise ValueError("kind must be 'employment' or 'wage'")
        excl = tuple(
            Exclusion(self.regions[i], self.periods[t], f"zero {slice} {segment} employment")
            for i, t in zip(*np.nonzero(~(emp > 0)))
        )
        return OutcomeSeries(f"{kind}:{slice}:{segment}", self.regions, self.periods, transform_levels(level, "log"), excl)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for (sl, seg), emp in self.employment.items():
            wb = self.wage_bill[(sl, seg)]
            for i, r in enumerate(self.regions):
                for t, p in enumerate(self.periods):
                    rows.append((r, p, sl, seg, emp[i, t], wb[i, t]))
        return pd.DataFrame(rows, columns=["region_id", "year", "slice", "segment", "employment", "wage_bill"])


def subgroup_outcomes(annotated: AnnotatedPanel) -> SubgroupSeries:
    """Aggregate each slice by region and period for every available segment."""
    panels = {"formal": annotated.panel}
    if annotated.informal is not None:
        panels["informal"] = annotated.informal
    masks = {
        "risky": annotated.risky,
        "nonrisky": ~annotated.risky,
        "sustainable": annotated.sustainable,
        "nonsustainable": ~annotated.sustainable,
    }
    emp, wb, totals = {}, {}, {}
    for seg, p in panels.items():
        totals[seg] = p.employment.sum(axis=1)
        for sl, m in masks.items():
            emp[(sl, seg)] = p.employment[:, m, :].sum(axis=1)
            wb[(sl, seg)] = p.wage_bill[:, m, :].sum(axis=1)
    if "informal" in panels:
        totals["total"] = totals["formal"] + totals["informal"]
        for sl in masks:
            emp[(sl, "total")] = emp[(sl, "formal")] + emp[(sl, "informal")]
            wb[(sl, "total")] = wb[(sl, "formal")] + wb[(sl, "informal")]
    report = tuple(
        f"{sl} {seg} employment is zero everywhere; series empty"
        for (sl, seg), e in emp.items()
        if not (e > 0).any()
    )
    p = annotated.panel
    return SubgroupSeries(p.regions, p.periods, emp, wb, totals, report)


def write_annotated_csv(annotated: AnnotatedPanel, path) -> None:
    """``panel.csv`` columns plus ``risky`` and ``sustainable`` flags per row."""
    p = annotated.panel
    flags = {k: ("1" if r else "0", "1" if s else "0") for k, r, s in zip(p.industries, annotated.risky, annotated.sustainable)}
    write_rows(
        path,
        ["region_id", "industry_id", "year", "employment", "wage_bill", "risky", "sustainable"],
        ((r, k, y, e, w) + flags[k] for r, k, y, e, w in p.rows()),
    )
