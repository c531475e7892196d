"""CSV ingestion and serialization for the panel data model.

File schemas (UTF-8, header row, comma separated)::

    panel.csv          region_id,industry_id,year,employment,wage_bill
    exports.csv        region_id,year,fob_value
    world_exports.csv  industry_id,year,value
    dest_gdp.csv       destination_id,year,gdp_usd
    dest_shares.csv    region_id,industry_id,destination_id,base_year,share

``informal_panel.csv`` (same columns as ``panel.csv``) optionally carries
informal employment. A TOML schema file may rename columns and declare the
window, the control base year and the non-traded industries.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._csv import parse_float, parse_int, read_rows, write_rows
from ._toml import load_toml
from .errors import ConfigError, DataValidationError
from .panel import DestinationData, ExportsSeries, RegionPanel, WorldExportsSeries

log = logging.getLogger(__name__)

__all__ = [
    "FILES",
    "LoadReport",
    "PanelData",
    "SchemaConfig",
    "load_panel",
    "load_schema",
    "write_panel_csv",
    "write_panel_data",
]

FILES = {
    "panel": "panel.csv",
    "exports": "exports.csv",
    "world_exports": "world_exports.csv",
    "dest_gdp": "dest_gdp.csv",
    "dest_shares": "dest_shares.csv",
    "informal_panel": "informal_panel.csv",
}
COLUMNS = {
    "panel": ("region_id", "industry_id", "year", "employment", "wage_bill"),
    "informal_panel": ("region_id", "industry_id", "year", "employment", "wage_bill"),
    "exports": ("region_id", "year", "fob_value"),
    "world_exports": ("industry_id", "year", "value"),
    "dest_gdp": ("destination_id", "year", "gdp_usd"),
    "dest_shares": ("region_id", "industry_id", "destination_id", "base_year", "share"),
}
REQUIRED = ("panel", "exports", "world_exports")
SCHEMA_KEYS = {"columns", "base_year", "start_year", "end_year", "nontraded"}


@dataclass(frozen=True)
class SchemaConfig:
    """Column remappings (``columns[file][canonical] = header``) plus window settings."""

    columns: Mapping[str, Mapping[str, str]] = field(default_factory=dict)
    base_year: int | None = None
    start_year: int | None = None
    end_year: int | None = None
    nontraded: tuple[str, ...] = ()

    @classmethod
    def from_mapping(cls, data: Mapping) -> SchemaConfig:
        unknown = set(data) - SCHEMA_KEYS
        if unknown:
            raise ConfigError(f"unknown schema keys: {sorted(unknown)}")
        cols = data.get("columns", {})
        for fname, mapping in cols.items():
            if fname not in COLUMNS:
                raise ConfigError(f"column remapping for unknown file {fname!r}")
            bad = set(mapping) - set(COLUMNS[fname])
            if bad:
                raise ConfigError(f"unknown columns for {fname}: {sorted(bad)}")
        return cls(
            columns={k: dict(v) for k, v in cols.items()},
            base_year=data.get("base_year"),
            start_year=data.get("start_year"),
            end_year=data.get("end_year"),
            nontraded=tuple(str(k) for k in data.get("nontraded", ())),
        )


def load_schema(path) -> SchemaConfig:
    return SchemaConfig.from_mapping(load_toml(path))


@dataclass
class LoadReport:
    """Rows dropped (outside the window) or flagged (kept but unusable under logs)."""

    dropped: list = field(default_factory=list)
    flagged: list = field(default_factory=list)

    def drop(self, path, line, reason):
        self.dropped.append((Path(path).name, line, reason))

    def flag(self, path, line, reason):
        self.flagged.append((Path(path).name, line, reason))

    def summary(self) -> str:
        return f"{len(self.dropped)} dropped, {len(self.flagged)} flagged"


@dataclass(frozen=True, eq=False)
class PanelData:
    panel: RegionPanel
    exports: ExportsSeries
    world: WorldExportsSeries
    destinations: DestinationData | None
    report: LoadReport
    informal: RegionPanel | None = None
    schema: SchemaConfig = field(default_factory=SchemaConfig)

    @property
    def exporting_industries(self) -> tuple[str, ...]:
        """Panel industries covered by the world series and not declared non-traded."""
        covered = set(self.world.industries)
        return tuple(k for k in self.panel.industries if k in covered and k not in self.schema.nontraded)


def _in_window(year, schema):
    return (schema.start_year is None or year >= schema.start_year) and (
        schema.end_year is None or year <= schema.end_year
    )


def _periods(years, schema, path):
    if not years:
        raise DataValidationError("no rows inside the panel window", path)
    lo = schema.start_year if schema.start_year is not None else min(years)
    hi = schema.end_year if schema.end_year is not None else max(years)
    return tuple(range(lo, hi + 1))


def _read_panel_file(path, schema, report, name="panel"):
    remap = schema.columns.get(name)
    cells = {}
    for line, row in read_rows(path, COLUMNS[name], remap):
        r, k = row["region_id"], row["industry_id"]
        if not r or not k:
            raise DataValidationError("empty region_id or industry_id", path, line)
        year = parse_int(row["year"], "year", path, line)
        emp = parse_float(row["employment"], "employment", path, line)
        wb = parse_float(row["wage_bill"], "wage_bill", path, line)
        if emp < 0:
            raise DataValidationError(f"negative employment {row['employment']!r}", path, line)
        if wb < 0:
            raise DataValidationError(f"negative wage_bill {row['wage_bill']!r}", path, line)
        if wb > 0 and emp <= 0:
            raise DataValidationError("positive wage_bill with zero employment", path, line)
        key = (r, k, year)
        if key in cells:
            raise DataValidationError(
                f"duplicate key (region_id={r}, industry_id={k}, year={year}); first seen on line {cells[key][0]}",
                path,
                line,
            )
        cells[key] = (line, emp, wb)
    kept = {}
    for key, (line, emp, wb) in cells.items():
        if _in_window(key[2], schema):
            kept[key] = (emp, wb)
        else:
            report.drop(path, line, f"year {key[2]} outside panel window")
    periods = _periods({k[2] for k in kept}, schema, path)
    present = {k[2] for k in kept}
    gaps = [p for p in periods if p not in present]
    if gaps:
        # e.g. census waves: the period axis stays contiguous, gap years hold zero cells
        report.flag(path, None, f"no rows for years {gaps}; treated as unobserved")
    regions = tuple(sorted({k[0] for k in kept}))
    industries = tuple(sorted({k[1] for k in kept}))
    rpos = {r: i for i, r in enumerate(regions)}
    kpos = {k: i for i, k in enumerate(industries)}
    shape = (len(regions), len(industries), len(periods))
    emp = np.zeros(shape)
    wb = np.zeros(shape)
    for (r, k, y), (e, w) in kept.items():
        emp[rpos[r], kpos[k], y - periods[0]] = e
        wb[rpos[r], kpos[k], y - periods[0]] = w
    return RegionPanel(regions, industries, periods, emp, wb)


def _align_panel(p: RegionPanel, regions, industries, periods) -> RegionPanel:
    emp = np.zeros((len(regions), len(industries), len(periods)))
    wb = np.zeros_like(emp)
    rpos = {r: i for i, r in enumerate(p.regions)}
    kpos = {k: i for i, k in enumerate(p.industries)}
    for i, r in enumerate(regions):
        if r not in rpos:
            continue
        for j, k in enumerate(industries):
            if k not in kpos:
                continue
            for t, y in enumerate(periods):
                s = y - p.periods[0]
                if 0 <= s < len(p.periods):
                    emp[i, j, t] = p.employment[rpos[r], kpos[k], s]
                    wb[i, j, t] = p.wage_bill[rpos[r], kpos[k], s]
    return RegionPanel(regions, industries, periods, emp, wb)


def _read_exports(path, schema, report, panel):
    remap = schema.columns.get("exports")
    rpos = {r: i for i, r in enumerate(panel.regions)}
    values = np.full((len(panel.regions), len(panel.periods)), np.nan)
    seen = {}
    for line, row in read_rows(path, COLUMNS["exports"], remap):
        r = row["region_id"]
        year = parse_int(row["year"], "year", path, line)
        v = parse_float(row["fob_value"], "fob_value", path, line)
        if v < 0:
            raise DataValidationError(f"negative fob_value {row['fob_value']!r}", path, line)
        if (r, year) in seen:
            raise DataValidationError(
                f"duplicate key (region_id={r}, year={year}); first seen on line {seen[(r, year)]}", path, line
            )
        seen[(r, year)] = line
        if r not in rpos:
            report.drop(path, line, f"region {r!r} not in panel")
            continue
        if not _in_window(year, schema) or not panel.periods[0] - 1 <= year <= panel.periods[-1]:
            report.drop(path, line, f"year {year} outside panel window")
            continue
        if v == 0:
            report.flag(path, line, "zero exports; log growth undefined")
        t = year - panel.periods[0]
        if t < 0:
            continue
        values[rpos[r], t] = v
    return ExportsSeries(panel.regions, panel.periods, values)


def _read_world(path, schema, report):
    remap = schema.columns.get("world_exports")
    data = {}
    for line, row in read_rows(path, COLUMNS["world_exports"], remap):
        k = row["industry_id"]
        year = parse_int(row["year"], "year", path, line)
        v = parse_float(row["value"], "value", path, line)
        if v <= 0:
            raise DataValidationError(f"world export value must be positive, got {row['value']!r}", path, line)
        if (k, year) in data:
            raise DataValidationError(f"duplicate key (industry_id={k}, year={year})", path, line)
        data[(k, year)] = v
    if not data:
        raise DataValidationError("no rows", path)
    industries = tuple(sorted({k for k, _ in data}))
    years = [y for _, y in data]
    periods = tuple(range(min(years), max(years) + 1))
    values = np.full((len(industries), len(periods)), np.nan)
    kpos = {k: i for i, k in enumerate(industries)}
    for (k, y), v in data.items():
        values[kpos[k], y - periods[0]] = v
    return WorldExportsSeries(industries, periods, values)


def _read_destinations(gdp_path, shares_path, schema, report, panel):
    gdp = {}
    for line, row in read_rows(gdp_path, COLUMNS["dest_gdp"], schema.columns.get("dest_gdp")):
        d = row["destination_id"]
        year = parse_int(row["year"], "year", gdp_path, line)
        v = parse_float(row["gdp_usd"], "gdp_usd", gdp_path, line)
        if v <= 0:
            raise DataValidationError(f"gdp_usd must be positive, got {row['gdp_usd']!r}", gdp_path, line)
        if (d, year) in gdp:
            raise DataValidationError(f"duplicate key (destination_id={d}, year={year})", gdp_path, line)
        gdp[(d, year)] = v
    if not gdp:
        raise DataValidationError("no rows", gdp_path)
    dests = tuple(sorted({d for d, _ in gdp}))
    years = [y for _, y in gdp]
    periods = tuple(range(min(years), max(years) + 1))
    levels = np.full((len(dests), len(periods)), np.nan)
    dpos = {d: i for i, d in enumerate(dests)}
    for (d, y), v in gdp.items():
        levels[dpos[d], y - periods[0]] = v

    rpos = {r: i for i, r in enumerate(panel.regions)}
    kpos = {k: i for i, k in enumerate(panel.industries)}
    shares = {}
    seen = set()
    sums = defaultdict(list)
    for line, row in read_rows(shares_path, COLUMNS["dest_shares"], schema.columns.get("dest_shares")):
        r, k, d = row["region_id"], row["industry_id"], row["destination_id"]
        year = parse_int(row["base_year"], "base_year", shares_path, line)
        s = parse_float(row["share"], "share", shares_path, line)
        if not 0 <= s <= 1:
            raise DataValidationError(f"share {row['share']!r} outside [0, 1]", shares_path, line)
        key = (r, k, d, year)
        if key in seen:
            raise DataValidationError(
                f"duplicate key (region_id={r}, industry_id={k}, destination_id={d}, base_year={year})",
                shares_path,
                line,
            )
        seen.add(key)
        sums[(r, k, year)].append((s, line))
        if d not in dpos:
            raise DataValidationError(f"destination {d!r} has no GDP series", shares_path, line)
        if r not in rpos or k not in kpos:
            report.drop(shares_path, line, "region or industry not in panel")
            continue
        lam = shares.setdefault(year, np.full((len(panel.regions), len(panel.industries), len(dests)), np.nan))
        lam[rpos[r], kpos[k], dpos[d]] = s
    for (r, k, year), items in sums.items():
        total = float(np.sum([s for s, _ in items]))
        if abs(total - 1.0) > 1e-9:
            raise DataValidationError(
                f"shares for (region_id={r}, industry_id={k}, base_year={year}) sum to {total!r}, not 1",
                shares_path,
                items[-1][1],
            )
    return DestinationData(dests, periods, levels, panel.regions, panel.industries, shares)


def _resolve_paths(paths) -> dict[str, Path]:
    if isinstance(paths, (str, Path)):
        base = Path(paths)
        out = {k: base / v for k, v in FILES.items()}
        return {k: p for k, p in out.items() if k in REQUIRED or p.exists()}
    out = {k: Path(v) for k, v in dict(paths).items() if v is not None}
    unknown = set(out) - set(FILES)
    if unknown:
        raise ConfigError(f"unknown input files: {sorted(unknown)}")
    return out


def load_panel(paths, schema: SchemaConfig | None = None) -> PanelData:
    """Read and validate the input CSVs.

    ``paths`` is either a directory holding the standard file names or a
    mapping from file key (``panel``, ``exports``, ``world_exports``,
    ``dest_gdp``, ``dest_shares``, ``informal_panel``) to path. Destination
    files are optional but must come as a pair. Without an explicit
    ``schema``, a directory's own ``schema.toml`` is used when present.
    """
    if schema is None and isinstance(paths, (str, Path)) and (Path(paths) / "schema.toml").exists():
        schema = load_schema(Path(paths) / "schema.toml")
    schema = schema or SchemaConfig()
    paths = _resolve_paths(paths)
    missing = [k for k in REQUIRED if k not in paths]
    if missing:
        raise ConfigError(f"missing required input files: {missing}")
    if ("dest_gdp" in paths) != ("dest_shares" in paths):
        raise ConfigError("dest_gdp and dest_shares must be given together")
    report = LoadReport()
    panel = _read_panel_file(paths["panel"], schema, report)
    informal = None
    if "informal_panel" in paths:
        inf = _read_panel_file(paths["informal_panel"], schema, report, "informal_panel")
        extra = sorted(set(inf.regions) - set(panel.regions))
        if extra:
            raise DataValidationError(f"informal panel has regions absent from the formal panel: {extra[:10]}", paths["informal_panel"])
        industries = tuple(sorted(set(panel.industries) | set(inf.industries)))
        if industries != panel.industries:
            panel = _align_panel(panel, panel.regions, industries, panel.periods)
        informal = _align_panel(inf, panel.regions, industries, panel.periods)
    exports = _read_exports(paths["exports"], schema, report, panel)
    world = _read_world(paths["world_exports"], schema, report)
    dest = None
    if "dest_gdp" in paths:
        dest = _read_destinations(paths["dest_gdp"], paths["dest_shares"], schema, report, panel)
    if schema.base_year is not None and schema.base_year not in panel.periods:
        raise ConfigError(f"base year {schema.base_year} outside panel periods")
    uncovered = [k for k in panel.industries if k not in world.industries and k not in schema.nontraded]
    if uncovered:
        log.info("industries without world exports (need zero shares or a nontraded declaration): %s", uncovered)
    log.info("loaded %d regions, %d industries, %d periods: %s", len(panel.regions), len(panel.industries), len(panel.periods), report.summary())
    return PanelData(panel, exports, world, dest, report, informal, schema)


def write_panel_csv(panel: RegionPanel, path) -> None:
    write_rows(path, COLUMNS["panel"], panel.rows())


def write_panel_data(data: PanelData, out_dir) -> list[Path]:
    """Serialize to the standard file names; returns the written paths in order."""
    out = Path(out_dir)
    written = []
    p = out / FILES["panel"]
    write_panel_csv(data.panel, p)
    written.append(p)
    ex = data.exports
    p = out / FILES["exports"]
    write_rows(
        p,
        COLUMNS["exports"],
        ((r, y, ex.values[i, t]) for i, r in enumerate(ex.regions) for t, y in enumerate(ex.periods) if np.isfinite(ex.values[i, t])),
    )
    written.append(p)
    w = data.world
    p = out / FILES["world_exports"]
    write_rows(
        p,
        COLUMNS["world_exports"],
        ((k, y, w.values[i, t]) for i, k in enumerate(w.industries) for t, y in enumerate(w.periods) if np.isfinite(w.values[i, t])),
    )
    written.append(p)
    if data.destinations is not None:
        d = data.destinations
        p = out / FILES["dest_gdp"]
        write_rows(
            p,
            COLUMNS["dest_gdp"],
            ((dd, y, d.gdp[i, t]) for i, dd in enumerate(d.destinations) for t, y in enumerate(d.periods) if np.isfinite(d.gdp[i, t])),
        )
        written.append(p)
        p = out / FILES["dest_shares"]

        def share_rows():
            for year, lam in sorted(d.shares.items()):
                for i, r in enumerate(d.regions):
                    for j, k in enumerate(d.industries):
                        for m, dd in enumerate(d.destinations):
                            if np.isfinite(lam[i, j, m]):
                                yield r, k, dd, year, lam[i, j, m]

        write_rows(p, COLUMNS["dest_shares"], share_rows())
        written.append(p)
    if data.informal is not None:
        p = out / FILES["informal_panel"]
        write_panel_csv(data.informal, p)
        written.append(p)
    return written
