"""Synthetic region-industry panels from a multi-sector gravity block.

Trade is structural: each supplier's share of destination expenditure is
``T (tau c)^-theta / Phi``. Home regions are many small suppliers next to a
block of large outside suppliers, so rest-of-world exports are driven by
foreign demand and are (nearly) untouched by home shocks.

The labour side is semi-structural. Log employment of every home
region-industry cell moves with a distributed lag of the region's own
log export growth whose cumulative sums are a known elasticity path, plus a
confounder that also raises home productivity (and hence exports), plus
noise. Estimators never see the truth; it travels alongside the panel.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from ._toml import load_toml
from .errors import ConfigError
from .loaders import LoadReport, PanelData, SchemaConfig, write_panel_data
from .panel import DestinationData, ExportsSeries, RegionPanel, WorldExportsSeries

__all__ = [
    "PAPER_SHAPED_PATH",
    "GravitySolution",
    "GravityWorld",
    "ShockConfig",
    "SimulatedPanel",
    "SyntheticTruth",
    "WorldConfig",
    "inject_confounder",
    "load_scenario",
    "make_world",
    "simulate_panel",
    "solve_shares",
    "write_simulation",
]

# impact 0.25, peak 0.40 at h=3, slow decline
PAPER_SHAPED_PATH = (0.25, 0.32, 0.37, 0.40, 0.38, 0.36, 0.34, 0.33, 0.32, 0.31, 0.30)
LOG_MAX = 700.0


@dataclass(frozen=True, eq=False)
class GravityWorld:
    """Structural trade parameters.

    Suppliers are indexed ``0..S-1`` with the first ``n_home`` being home
    regions; ``trade_cost`` has shape (suppliers, destinations, industries).
    """

    productivity: np.ndarray
    unit_cost: np.ndarray
    trade_cost: np.ndarray
    theta: np.ndarray
    expenditure: np.ndarray
    n_home: int

    def __post_init__(self):
        T = np.asarray(self.productivity, float)
        c = np.asarray(self.unit_cost, float)
        tau = np.asarray(self.trade_cost, float)
        th = np.asarray(self.theta, float)
        X = np.asarray(self.expenditure, float)
        S, K = T.shape
        D = X.shape[0]
        if c.shape != (S, K) or tau.shape != (S, D, K) or th.shape != (K,) or X.shape != (D, K):
            raise ConfigError("inconsistent gravity parameter shapes")
        if not (T > 0).all() or not (c > 0).all() or not (X > 0).all() or not (th > 0).all():
            raise ConfigError("productivity, unit cost, expenditure and theta must be positive")
        if not (tau >= 1).all():
            raise ConfigError("trade costs must be >= 1")
        if not 0 <= self.n_home <= S:
            raise ConfigError("n_home out of range")
        for name, v in (("productivity", T), ("unit_cost", c), ("trade_cost", tau), ("theta", th), ("expenditure", X)):
            object.__setattr__(self, name, v)

    @property
    def shape(self):
        S, K = self.productivity.shape
        return S, self.expenditure.shape[0], K


@dataclass(frozen=True, eq=False)
class GravitySolution:
    trade_shares: np.ndarray  # (S, D, K), sums to one over suppliers
    price_index: np.ndarray  # (D, K)
    income: np.ndarray  # (S, K)
    income_weights: np.ndarray  # (S, K), rows sum to one


def solve_shares(world: GravityWorld) -> GravitySolution:
    """Trade shares, price indices, supplier income and income weights.

    Shares are formed as ``exp(a_s - m) / sum_s' exp(a_s' - m)`` with
    ``a = log T - theta log(tau c)`` and ``m`` the per-(d, k) maximum, which
    equals ``T (tau c)^-theta / Phi`` without overflowing the power terms.
    """
    T, c, tau, th, X = world.productivity, world.unit_cost, world.trade_cost, world.theta, world.expenditure
    a = np.log(T)[:, None, :] - th[None, None, :] * (np.log(tau) + np.log(c)[:, None, :])
    if np.abs(a).max() > LOG_MAX:
        raise ConfigError(
            "power terms T (tau c)^-theta overflow double precision "
            f"(|log| up to {np.abs(a).max():.0f}); rescale productivities, costs or theta"
        )
    m = a.max(axis=0)
    e = np.exp(a - m[None])
    tot = e.sum(axis=0)
    lam = e / tot[None]
    phi = np.exp(m) * tot
    income = np.einsum("sdk,dk->sk", lam, X)
    ysum = income.sum(axis=1, keepdims=True)
    mu = income / np.where(ysum > 0, ysum, 1.0)
    return GravitySolution(lam, phi, income, mu)


@dataclass(frozen=True)
class WorldConfig:
    """Size and calibration of the simulated economy.

    Defaults are arbitrary calibrations, not estimates of any real economy.
    """

    n_regions: int = 200
    n_industries: int = 12
    n_destinations: int = 8
    n_outside: int = 20
    n_periods: int = 25
    start_year: int = 2000
    burn_in: int = 15
    n_nontraded: int = 2
    n_risky: int = 4
    n_sustainable: int = 3
    theta_range: tuple[float, float] = (3.0, 6.0)
    tau_range: tuple[float, float] = (1.2, 2.0)
    home_productivity: float = 0.001
    specialization_sd: float = 1.5
    nontraded_share_range: tuple[float, float] = (0.2, 0.6)
    mean_region_employment: float = 50000.0
    region_size_sd: float = 1.0
    mean_log_wage: float = 7.0
    wage_sd: float = 0.3
    informal_ratio: float = 0.8

    def __post_init__(self):
        if min(self.n_regions, self.n_industries, self.n_destinations, self.n_outside) < 1:
            raise ConfigError("world dimensions must be positive")
        if self.n_regions < 2:
            raise ConfigError("need at least two home regions")
        if self.n_nontraded >= self.n_industries:
            raise ConfigError("at least one industry must be traded")
        if self.n_risky + self.n_sustainable > self.n_industries:
            raise ConfigError("risky and sustainable industry counts exceed the number of industries")
        if self.mean_region_employment <= 0:
            raise ConfigError("employment scale must be positive")
        if self.n_periods < 2:
            raise ConfigError("need at least two periods")


@dataclass(frozen=True)
class ShockConfig:
    """Shock processes and the true responses.

    ``elasticity_path[h]`` is the true cumulative elasticity of formal
    employment at horizon ``h`` (held at its last value beyond the path).
    ``risky_path`` / ``sustainable_path`` override it for flagged
    industries; ``wage_path`` defaults to ``wage_scale`` times the
    employment path. ``confounder_strength`` is the direct loading of the
    confounder on employment growth; ``confounder_scale`` is its loading on
    home productivity growth. Employment noise has a permanent part
    (``region_noise_sd``, ``cell_noise_sd``) and a transitory part
    (``transitory_noise_sd``) that shifts recorded log levels without
    persisting.
    """

    elasticity_path: tuple[float, ...] = PAPER_SHAPED_PATH
    risky_path: tuple[float, ...] | None = None
    sustainable_path: tuple[float, ...] | None = None
    wage_path: tuple[float, ...] | None = None
    wage_scale: float = 0.5
    informal_psi: float = -0.5
    industry_demand_sd: float = 0.10
    destination_demand_sd: float = 0.03
    supply_sd: float = 0.05
    confounder_scale: float = 0.05
    confounder_strength: float = 0.0
    region_noise_sd: float = 0.14
    cell_noise_sd: float = 0.04
    transitory_noise_sd: float = 0.14
    wage_noise_sd: float = 0.02
    informal_noise_sd: float = 0.03
    seed: int = 0

    def __post_init__(self):
        for name in ("elasticity_path", "risky_path", "sustainable_path", "wage_path"):
            v = getattr(self, name)
            if v is None:
                continue
            v = tuple(float(x) for x in v)
            if not v or not np.isfinite(v).all():
                raise ConfigError(f"{name} must be a non-empty sequence of finite numbers")
            object.__setattr__(self, name, v)
        if self.informal_psi > 0:
            raise ConfigError("informal_psi must be <= 0 (substitution)")
        for name in (
            "industry_demand_sd", "destination_demand_sd", "supply_sd", "confounder_scale",
            "region_noise_sd", "cell_noise_sd", "transitory_noise_sd", "wage_noise_sd", "informal_noise_sd",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    @property
    def max_horizon(self) -> int:
        paths = [self.elasticity_path, self.risky_path, self.sustainable_path, self.wage_path]
        return max(len(p) for p in paths if p is not None) - 1

    def resolved_wage_path(self) -> tuple[float, ...]:
        if self.wage_path is not None:
            return self.wage_path
        return tuple(self.wage_scale * e for e in self.elasticity_path)


def inject_confounder(shocks: ShockConfig, strength: float) -> ShockConfig:
    """Turn on the confounder's direct effect on employment growth.

    The same draws already move home productivity (scaled by
    ``confounder_scale``), so a non-zero strength makes OLS inconsistent
    while the foreign-demand instrument stays valid. The sign of the OLS
    bias follows the sign of ``strength``; negative values are accepted for
    that symmetry check.
    """
    return replace(shocks, confounder_strength=float(strength))


@dataclass(frozen=True)
class SyntheticTruth:
    """Ground truth carried next to a simulated panel; estimators never read it.

    ``instrument_relevance`` is the pooled correlation of world-export
    exposure with own export growth. ``demand_noise_corr`` is the pooled
    correlation of each region's industry-demand exposure with its
    idiosyncratic employment shock, zero in expectation.
    """

    elasticity_path: tuple[float, ...]
    informal_path: tuple[float, ...]
    wage_path: tuple[float, ...]
    risky_path: tuple[float, ...]
    sustainable_path: tuple[float, ...]
    confounder_strength: float
    seed: int
    instrument_relevance: float
    home_share_of_world: float
    demand_noise_corr: float
    risky_industries: tuple[str, ...]
    sustainable_industries: tuple[str, ...]
    nontraded_industries: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True, eq=False)
class SimulatedPanel:
    data: PanelData
    truth: SyntheticTruth
    classification: dict  # industry -> (risky, contribution_level)

    @property
    def panel(self) -> RegionPanel:
        return self.data.panel


def _lag_weights(path: Sequence[float]) -> np.ndarray:
    """Per-lag growth loadings whose running sums reproduce ``path``."""
    p = np.asarray(path, float)
    return np.diff(np.concatenate([[0.0], p]))


def _labels(prefix, n):
    width = len(str(n))
    return tuple(f"{prefix}{i + 1:0{width}d}" for i in range(n))


def make_world(config: WorldConfig, rng: np.random.Generator) -> GravityWorld:
    """Draw static gravity parameters for ``config``."""
    R, N, D = config.n_regions, config.n_outside, config.n_destinations
    Kt = config.n_industries - config.n_nontraded
    S = R + N
    theta = rng.uniform(*config.theta_range, size=Kt)
    tau = rng.uniform(*config.tau_range, size=(S, D, Kt))
    logT = np.empty((S, Kt))
    logT[:R] = np.log(config.home_productivity) + config.specialization_sd * rng.standard_normal((R, Kt))
    logT[R:] = 0.3 * rng.standard_normal((N, Kt))
    expenditure = np.exp(np.log(1000.0) + 0.5 * rng.standard_normal((D, Kt)))
    return GravityWorld(np.exp(logT), np.ones((S, Kt)), tau, theta, expenditure, R)


def simulate_panel(
    world_config: WorldConfig | None = None,
    shocks: ShockConfig | None = None,
    periods: int | None = None,
    horizons: Sequence[int] | None = None,
    pre_window: int = 5,
) -> SimulatedPanel:
    """Draw one synthetic panel and its ground truth.

    ``periods`` overrides ``world_config.n_periods``. When ``horizons`` is
    given the window must be long enough to estimate them with the
    pre-trend control: ``periods >= max(h) + pre_window + 1``.
    """
    cfg = world_config or WorldConfig()
    shocks = shocks or ShockConfig()
    if periods is not None:
        cfg = replace(cfg, n_periods=int(periods))
    n_periods = cfg.n_periods
    if horizons is not None:
        need = max(max(horizons), 0) + pre_window + 1
        if n_periods < need:
            raise ConfigError(f"{n_periods} periods cannot support horizon {max(horizons)} (need >= {need})")
    rng = np.random.default_rng(shocks.seed)
    R, D, K = cfg.n_regions, cfg.n_destinations, cfg.n_industries
    Kt = K - cfg.n_nontraded
    world = make_world(cfg, rng)

    industries = _labels("k", K)
    order = rng.permutation(K)
    nontraded_idx = np.sort(order[: cfg.n_nontraded])
    traded_idx = np.setdiff1d(np.arange(K), nontraded_idx)
    flag_order = rng.permutation(K)
    risky = np.zeros(K, bool)
    sust = np.zeros(K, bool)
    risky[flag_order[: cfg.n_risky]] = True
    sust[flag_order[cfg.n_risky : cfg.n_risky + cfg.n_sustainable]] = True

    base_path = shocks.elasticity_path
    risky_path = shocks.risky_path or base_path
    sust_path = shocks.sustainable_path or base_path
    wage_path = shocks.resolved_wage_path()
    H = shocks.max_horizon
    L = H + 1

    def pad(p):
        p = list(p)
        return np.array(p + [p[-1]] * (L - len(p)))

    weights = np.stack([_lag_weights(pad(base_path)), _lag_weights(pad(risky_path)), _lag_weights(pad(sust_path))])
    group = np.where(risky, 1, np.where(sust, 2, 0))
    w_wage = _lag_weights(pad(wage_path))

    # initial employment: traded cells proportional to gravity income, non-traded a drawn share
    sol = solve_shares(world)
    size = cfg.mean_region_employment * np.exp(cfg.region_size_sd * rng.standard_normal(R) - 0.5 * cfg.region_size_sd**2)
    inc = sol.income[:R]
    traded_sh = inc / inc.sum(axis=1, keepdims=True)
    nt_total = rng.uniform(*cfg.nontraded_share_range, size=R)
    nt_split = rng.dirichlet(np.ones(max(cfg.n_nontraded, 1)), size=R)
    logL = np.empty((R, K))
    with np.errstate(divide="ignore"):
        logL[:, traded_idx] = np.log(size[:, None] * (1 - nt_total)[:, None] * traded_sh)
        if cfg.n_nontraded:
            logL[:, nontraded_idx] = np.log(size[:, None] * nt_total[:, None] * nt_split)
    logI = logL + np.log(cfg.informal_ratio) + 0.2 * rng.standard_normal((R, K))
    logw = cfg.mean_log_wage + cfg.wage_sd * rng.standard_normal(R)

    total = cfg.burn_in + n_periods + 1
    logT = np.log(world.productivity).copy()
    logX = np.log(world.expenditure).copy()
    g_hist = np.zeros((R, L))  # g_hist[:, j] = growth j periods ago
    prev_exports = None
    rec_emp = np.empty((n_periods, R, K))
    rec_inf = np.empty((n_periods, R, K))
    rec_wage = np.empty((n_periods, R))
    rec_exports = np.empty((n_periods + 1, R))
    rec_world = np.empty((n_periods + 1, Kt))
    rec_gdp = np.empty((n_periods + 1, D))
    rec_dest = np.empty((n_periods + 1, R, D, Kt))
    z_pairs = []
    noise_pairs = []
    last_world = None

    for step in range(total):
        if step > 0:
            a = shocks.industry_demand_sd * rng.standard_normal(Kt)
            b = shocks.destination_demand_sd * rng.standard_normal((D, Kt))
            logX = logX + a[None, :] + b
            conf = rng.standard_normal(R)
            eta = rng.standard_normal((R, Kt))
            logT[:R] += shocks.supply_sd * eta + shocks.confounder_scale * conf[:, None]
            u = rng.standard_normal(R)
            v = rng.standard_normal((R, K))
            omega = rng.standard_normal(R)
            xi = rng.standard_normal(R)
            iota = rng.standard_normal((R, K))
        cur = GravityWorld(np.exp(logT), world.unit_cost, world.trade_cost, world.theta, np.exp(logX), R)
        sol = solve_shares(cur)
        exports = sol.income[:R].sum(axis=1)
        world_exp = sol.income[R:].sum(axis=0)
        if step > 0:
            g = np.log(exports) - np.log(prev_exports)
            g_hist = np.roll(g_hist, 1, axis=1)
            g_hist[:, 0] = g
            resp = g_hist @ weights.T  # (R, 3): base, risky, sustainable responses
            dlogL = resp[:, group] + shocks.confounder_strength * conf[:, None]
            dlogL += shocks.region_noise_sd * u[:, None] + shocks.cell_noise_sd * v
            logL = logL + dlogL
            logI = logI + shocks.informal_psi * resp[:, group] + shocks.informal_noise_sd * (u[:, None] + iota) / np.sqrt(2)
            logw = logw + g_hist @ w_wage + shocks.wage_noise_sd * omega
            if last_world is not None and step > cfg.burn_in:
                z_pairs.append((np.log(world_exp) - np.log(last_world), g))
                noise_pairs.append((traded_sh @ a, u))
        prev_exports = exports
        last_world = world_exp
        rec = step - cfg.burn_in
        if rec >= 0:
            rec_exports[rec] = exports
            rec_world[rec] = world_exp
            rec_gdp[rec] = np.exp(logX).sum(axis=1)
            flows = sol.trade_shares[:R] * np.exp(logX)[None]  # (R, D, Kt)
            rec_dest[rec] = flows / flows.sum(axis=1, keepdims=True)
            if rec >= 1:
                # transitory level noise: shows up in every difference but does not accumulate
                rec_emp[rec - 1] = logL + shocks.transitory_noise_sd * xi[:, None]
                rec_inf[rec - 1] = logI
                rec_wage[rec - 1] = logw

    emp = np.rint(np.exp(rec_emp)).transpose(1, 2, 0)
    inf = np.rint(np.exp(rec_inf)).transpose(1, 2, 0)
    if (emp.sum(axis=1) <= 0).any():
        raise ConfigError("configuration drives some region's employment to zero; raise the employment scale")
    wage = np.exp(rec_wage).T  # (R, T)
    wb = emp * wage[:, None, :]
    wb_inf = inf * (0.6 * wage)[:, None, :]

    regions = _labels("r", R)
    years = tuple(range(cfg.start_year, cfg.start_year + n_periods))
    ext_years = (cfg.start_year - 1,) + years
    panel = RegionPanel(regions, industries, years, emp, wb)
    informal = RegionPanel(regions, industries, years, inf, wb_inf)
    exports = ExportsSeries(regions, ext_years, rec_exports.T)
    traded_labels = tuple(industries[i] for i in traded_idx)
    world_series = WorldExportsSeries(traded_labels, ext_years, rec_world.T)
    dests = _labels("d", D)
    {k: i for i, k in enumerate(industries)}
    lam = {}
    for t, y in enumerate(ext_years):
        arr = np.full((R, K, D), np.nan)
        arr[:, traded_idx, :] = rec_dest[t].transpose(0, 2, 1)
        lam[y] = arr
    dest = DestinationData(dests, ext_years, rec_gdp.T, regions, industries, lam)

    nontraded = tuple(industries[i] for i in nontraded_idx)
    schema = SchemaConfig(base_year=years[0], nontraded=nontraded)
    data = PanelData(panel, exports, world_series, dest, LoadReport(), informal, schema)

    # pooled correlation between world-export growth exposure and own export growth
    zs, gs = [], []
    for dlw, g in z_pairs:
        zs.append(traded_sh @ dlw)
        gs.append(g)
    relevance = float(np.corrcoef(np.concatenate(zs), np.concatenate(gs))[0, 1]) if zs else float("nan")
    dz = np.concatenate([d for d, _ in noise_pairs]) if noise_pairs else np.zeros(0)
    du = np.concatenate([e for _, e in noise_pairs]) if noise_pairs else np.zeros(0)
    noise_corr = float(np.corrcoef(dz, du)[0, 1]) if dz.size > 2 else float("nan")
    home_share = float(rec_exports.sum() / (rec_exports.sum() + rec_world.sum()))
    truth = SyntheticTruth(
        elasticity_path=tuple(map(float, pad(base_path))),
        informal_path=tuple(map(float, shocks.informal_psi * pad(base_path))),
        wage_path=tuple(map(float, pad(wage_path))),
        risky_path=tuple(map(float, pad(risky_path))),
        sustainable_path=tuple(map(float, pad(sust_path))),
        confounder_strength=shocks.confounder_strength,
        seed=shocks.seed,
        instrument_relevance=relevance,
        home_share_of_world=home_share,
        demand_noise_corr=noise_corr,
        risky_industries=tuple(industries[i] for i in np.flatnonzero(risky)),
        sustainable_industries=tuple(industries[i] for i in np.flatnonzero(sust)),
        nontraded_industries=nontraded,
    )
    classification = {
        k: (bool(risky[i]), "high" if sust[i] else "none") for i, k in enumerate(industries)
    }
    return SimulatedPanel(data, truth, classification)


SCENARIO_SECTIONS = {"world": WorldConfig, "shocks": ShockConfig}


def load_scenario(path_or_mapping) -> tuple[WorldConfig, ShockConfig]:
    """Read a scenario TOML with optional ``[world]`` and ``[shocks]`` tables."""
    data = load_toml(path_or_mapping) if isinstance(path_or_mapping, (str, Path)) else dict(path_or_mapping)
    unknown = set(data) - set(SCENARIO_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown scenario sections: {sorted(unknown)}")
    out = []
    for name, cls in SCENARIO_SECTIONS.items():
        section = dict(data.get(name, {}))
        fields = set(cls.__dataclass_fields__)
        bad = set(section) - fields
        if bad:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
        for key, val in section.items():
            if isinstance(val, list):
                section[key] = tuple(val)
        try:
            out.append(cls(**section))
        except TypeError as exc:
            raise ConfigError(f"[{name}]: {exc}") from None
    return out[0], out[1]


def write_simulation(sim: SimulatedPanel, out_dir) -> list[Path]:
    """Write the panel CSVs, ``classification.csv``, ``schema.toml`` and ``truth.json``."""
    from .taxonomy import write_classification_csv

    out = Path(out_dir)
    written = write_panel_data(sim.data, out)
    p = out / "classification.csv"
    write_classification_csv(sim.classification, p)
    written.append(p)
    p = out / "schema.toml"
    p.write_text(schema_toml(sim.data.schema), encoding="utf-8")
    written.append(p)
    p = out / "truth.json"
    p.write_text(sim.truth.to_json(), encoding="utf-8")
    written.append(p)
    return written


def schema_toml(schema: SchemaConfig) -> str:
    """Base year and non-traded list as a loadable schema file."""
    lines = []
    if schema.base_year is not None:
        lines.append(f"base_year = {int(schema.base_year)}")
    lines.append("nontraded = [" + ", ".join(json.dumps(k) for k in schema.nontraded) + "]")
    return "\n".join(lines) + "\n"
