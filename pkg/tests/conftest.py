"""Shared fixtures: tiny hand-checkable panels and cached simulations."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from shiftshare.dgp import ShockConfig, WorldConfig, simulate_panel, write_simulation
from shiftshare.loaders import LoadReport, PanelData, SchemaConfig
from shiftshare.panel import ExportsSeries, RegionPanel, WorldExportsSeries

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


@pytest.fixture
def tiny_dir(tmp_path):
    """3 regions x 2 industries x 2000..2002, exports and world from 1999."""
    panel = []
    emp = {"r1": (50, 150), "r2": (10, 10), "r3": (7, 0)}
    for r, (e1, e2) in emp.items():
        for y in (2000, 2001, 2002):
            panel.append((r, "k1", y, e1, e1 * 100.0))
            panel.append((r, "k2", y, e2, e2 * 120.0))
    write_csv(tmp_path / "panel.csv", ["region_id", "industry_id", "year", "employment", "wage_bill"], panel)
    exports = [(r, y, 100.0 * (1.1 ** (y - 1999)) * (i + 1)) for i, r in enumerate(emp) for y in range(1999, 2003)]
    write_csv(tmp_path / "exports.csv", ["region_id", "year", "fob_value"], exports)
    world = [(k, y, v * (1.05 ** (y - 1999))) for k, v in (("k1", 1000.0), ("k2", 500.0)) for y in range(1999, 2003)]
    write_csv(tmp_path / "world_exports.csv", ["industry_id", "year", "value"], world)
    return tmp_path


def make_data(n_regions=2, n_periods=8, n_industries=2, seed=0, start=2000) -> PanelData:
    """Random but fully observed in-memory panel data."""
    rng = np.random.default_rng(seed)
    R, K, T = n_regions, n_industries, n_periods
    regions = [f"r{i}" for i in range(R)]
    industries = [f"k{i}" for i in range(K)]
    periods = list(range(start, start + T))
    emp = np.rint(rng.uniform(50, 500, size=(R, K, T)))
    wb = emp * rng.uniform(80, 120, size=(R, 1, T))
    panel = RegionPanel(regions, industries, periods, emp, wb)
    ext = [start - 1] + periods
    exports = ExportsSeries(regions, ext, np.exp(rng.normal(5, 0.3, size=(R, T + 1))))
    world = WorldExportsSeries(industries, ext, np.exp(rng.normal(8, 0.2, size=(K, T + 1))))
    return PanelData(panel, exports, world, None, LoadReport(), None, SchemaConfig())


@pytest.fixture(scope="session")
def small_sim():
    return simulate_panel(WorldConfig(n_regions=60), ShockConfig(seed=7))


@pytest.fixture(scope="session")
def sim_dir(tmp_path_factory, small_sim):
    d = tmp_path_factory.mktemp("sim")
    write_simulation(small_sim, d)
    return d
