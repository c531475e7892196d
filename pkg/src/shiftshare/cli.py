"""Command-line front end.

Every subcommand reads its options from (lowest to highest precedence)
built-in defaults, the ``[<command>]`` table of ``--config``, environment
variables ``SHIFTSHARE_<COMMAND>_<KEY>`` and command-line flags. Global
settings (seed, out_dir, threads) live in ``[run]`` and in
``SHIFTSHARE_SEED`` / ``SHIFTSHARE_OUT_DIR`` / ``SHIFTSHARE_THREADS``.
Unknown tables, keys and prefixed environment variables are rejected
before any computation.

Exit codes: 0 success, 2 configuration error, 3 data validation error,
4 estimation failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import re
import sys
from collections.abc import Callable
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from ._csv import read_rows, write_rows
from ._toml import load_toml, tomllib
from .errors import ConfigError, DataValidationError, EstimationError
from .loaders import SchemaConfig, load_panel, load_schema
from .panel import ControlsVector

log = logging.getLogger("shiftshare")

ENV_PREFIX = "SHIFTSHARE_"
EXIT_CONFIG, EXIT_DATA, EXIT_ESTIMATION = 2, 3, 4


# option coercion ----------------------------------------------------------

def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    t = str(v).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt(conv: Callable) -> Callable:
    def f(v):
        if v is None or (isinstance(v, str) and v.strip().lower() in ("", "none")):
            return None
        return conv(v)

    return f


def _pair(v) -> tuple[int, int]:
    if isinstance(v, str):
        parts = v.replace(",", ":").split(":")
    else:
        parts = list(v)
    if len(parts) != 2:
        raise ValueError(f"expected two integers like 'a:b', got {v!r}")
    return int(parts[0]), int(parts[1])


def _strlist(v) -> tuple[str, ...]:
    if isinstance(v, str):
        return tuple(x.strip() for x in v.split(",") if x.strip())
    return tuple(str(x) for x in v)


def _rows(v) -> tuple[tuple[str, str], ...]:
    """``"employment:formal,wage"`` or a list of such strings or of pairs."""
    items = [v] if isinstance(v, str) else list(v)
    out = []
    for it in items:
        if isinstance(it, str):
            for part in _strlist(it):
                a, _, b = part.partition(":")
                out.append((a, b or "formal"))
        else:
            a, b = it
            out.append((str(a), str(b)))
    return tuple(out)


@dataclass(frozen=True)
class Opt:
    default: object
    conv: Callable
    help: str


_INPUT = {
    "input": Opt("data", str, "directory with the input CSVs"),
    "schema": Opt(None, _opt(str), "schema TOML (default: <input>/schema.toml when present)"),
}
_SPEC = {
    "kind": Opt("baseline", str, "instrument kind: baseline, destination"),
    "outcome": Opt("employment", str, "employment or wage"),
    "slice": Opt("formal", str, "formal, informal or total"),
    "cluster": Opt("region", str, "cluster key: region, period, dominant_industry, or a region_id,cluster_id CSV"),
    "cov_type": Opt("cluster", str, "cluster, robust or classical"),
    "transform": Opt("log", str, "log or ihs for export levels"),
    "base_year": Opt(None, _opt(int), "share and controls base year"),
    "pre_window": Opt((2, 5), _pair, "pre-trend window lags 'a:b'"),
    "controls": Opt(ControlsVector.NAMES, _strlist, "comma-separated control names"),
    "dest_share_year": Opt(None, _opt(int), "pin destination shares to one year"),
    "period_effects": Opt(False, _bool, "demean by base period instead of a single intercept"),
}

OPTIONS: dict[str, dict[str, Opt]] = {
    "simulate": {
        "horizons": Opt((-5, 10), _pair, "horizon window the panel must support"),
        "pre_window": Opt(5, int, "longest pre-trend lag the panel must support"),
    },
    "instrument": {
        **_INPUT,
        "kind": Opt("baseline", str, "baseline, destination or long"),
        "window": Opt(None, _opt(_pair), "long-difference window 'start:end'"),
        "dest_share_year": _SPEC["dest_share_year"],
    },
    "estimate": {
        **_INPUT,
        **_SPEC,
        "horizons": Opt((-5, 10), _pair, "horizon window 'lo:hi'"),
        "estimator": Opt("tsls", str, "tsls or ols"),
        "subgroup": Opt(None, _opt(str), "restrict the outcome to risky, nonrisky, sustainable or nonsustainable"),
        "classification": Opt(None, _opt(str), "classification CSV (default: <input>/classification.csv)"),
        "long_window": Opt(None, _opt(_pair), "also write longrun.csv for window 'start:end'"),
        "long_rows": Opt((("employment", "formal"),), _rows, "long-run rows 'outcome:slice,...'"),
        "plot": Opt(True, _bool, "write irf.svg"),
    },
    "balance": {
        **_INPUT,
        **_SPEC,
        "horizons": Opt((-5, -1), _pair, "pre-period horizon window"),
    },
    "binscatter": {
        **_INPUT,
        **_SPEC,
        "stage": Opt("first", str, "first (export growth on instrument) or reduced (outcome on instrument)"),
        "horizon": Opt(0, int, "outcome horizon for the reduced form"),
        "bins": Opt(20, int, "number of equal-count bins"),
        "residualize": Opt(True, _bool, "partial out the controls before binning"),
        "plot": Opt(True, _bool, "write binscatter.svg"),
    },
    "taxonomy_shares": {
        **_INPUT,
        "classification": Opt(None, _opt(str), "classification CSV (default: <input>/classification.csv)"),
        "concordances": Opt((), _strlist, "ordered concordance CSVs applied to the classification"),
        "rule": Opt("any", str, "propagation rule: any, all or majority"),
        "year": Opt(None, _opt(int), "single year (default: every panel year)"),
    },
}
GLOBALS = {
    "seed": Opt(0, int, "random seed"),
    "out_dir": Opt("out", str, "output directory"),
    "threads": Opt(1, int, "worker threads for per-horizon fits"),
}
SIM_SECTIONS = ("world", "shocks")


def _coerce(section: str, key: str, opt: Opt, value):
    try:
        return opt.conv(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def _env_value(text: str):
    """Environment values are read as TOML scalars/arrays when they parse, else as strings."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def resolve_config(command: str, config_path, flags: dict, environ=None) -> dict:
    """Merge defaults, config file, environment and flags into one validated mapping."""
    environ = os.environ if environ is None else environ
    section = command.replace("-", "_")
    file_cfg = load_toml(config_path) if config_path else {}
    allowed = {"run", *OPTIONS} | set(SIM_SECTIONS)
    unknown = sorted(set(file_cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown config tables: {unknown}")
    for name, table in file_cfg.items():
        if not isinstance(table, dict):
            raise ConfigError(f"config entry {name!r} must be a table")
        if name == "run":
            keys = GLOBALS
        elif name in SIM_SECTIONS:
            continue  # checked by the scenario loader below
        else:
            keys = OPTIONS[name]
        bad = sorted(set(table) - set(keys))
        if bad:
            raise ConfigError(f"unknown keys in [{name}]: {bad}")
    if any(name in file_cfg for name in SIM_SECTIONS):
        from .dgp import load_scenario

        load_scenario({name: file_cfg[name] for name in SIM_SECTIONS if name in file_cfg})

    run = {k: o.default for k, o in GLOBALS.items()}
    opts = {k: o.default for k, o in OPTIONS[section].items()}
    run.update(file_cfg.get("run", {}))
    opts.update(file_cfg.get(section, {}))

    cmd_prefix = f"{ENV_PREFIX}{section.upper()}_"
    for name, text in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX) or name == f"{ENV_PREFIX}CONFIG":
            continue
        key = name[len(ENV_PREFIX):].lower()
        if key in GLOBALS:
            run[key] = _env_value(text)
        elif name.startswith(cmd_prefix):
            key = name[len(cmd_prefix):].lower()
            if key not in opts:
                raise ConfigError(f"unknown environment override {name}")
            opts[key] = _env_value(text)

    for k, v in flags.items():
        if v is None:
            continue
        if k in GLOBALS:
            run[k] = v
        else:
            opts[k] = v

    resolved = {k: _coerce("run", k, GLOBALS[k], v) for k, v in run.items()}
    resolved.update({k: _coerce(section, k, OPTIONS[section][k], v) for k, v in opts.items()})
    if resolved["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    if section == "simulate":
        for name in SIM_SECTIONS:
            resolved[name] = dict(file_cfg.get(name, {}))
    return resolved


# run manifest -------------------------------------------------------------

def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def write_manifest(out_dir: Path, command: str, config: dict, inputs, outputs) -> Path:
    """``run.json``: resolved config plus sha256 of every input and output file."""
    manifest = {
        "command": command,
        "version": __version__,
        "config": _jsonable(config),
        "inputs": {str(p): sha256(p) for p in sorted(set(map(str, inputs)))},
        "outputs": {Path(p).name: sha256(p) for p in outputs},
    }
    path = out_dir / "run.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# shared helpers -----------------------------------------------------------

def _load(cfg: dict):
    inp = Path(cfg["input"])
    if not inp.is_dir():
        raise ConfigError(f"input directory not found: {inp}")
    schema_path = cfg["schema"] or (inp / "schema.toml" if (inp / "schema.toml").exists() else None)
    schema = load_schema(schema_path) if schema_path else SchemaConfig()
    data = load_panel(inp, schema)
    used = [p for p in sorted(inp.glob("*.csv")) if p.name in _INPUT_FILES]
    if schema_path:
        used.append(Path(schema_path))
    if _is_cluster_file(cfg.get("cluster")):
        used.append(Path(cfg["cluster"]))
    return data, used


def _is_cluster_file(key) -> bool:
    return isinstance(key, str) and key.lower().endswith(".csv")


def _cluster_key(key):
    """A built-in key name, or a ``region_id,cluster_id`` CSV read into a mapping."""
    if not _is_cluster_file(key):
        return key
    mapping = {}
    for line, row in read_rows(key, ("region_id", "cluster_id")):
        if row["region_id"] in mapping:
            raise DataValidationError(f"duplicate region {row['region_id']!r}", key, line)
        mapping[row["region_id"]] = row["cluster_id"]
    return mapping


_INPUT_FILES = {
    "panel.csv", "exports.csv", "world_exports.csv", "dest_gdp.csv", "dest_shares.csv", "informal_panel.csv",
}


def _estimate_config(cfg: dict, **over):
    from .pipeline import EstimateConfig

    base = dict(
        kind=cfg["kind"],
        horizons=cfg.get("horizons", (0, 0)),
        outcome=cfg["outcome"],
        slice=cfg["slice"],
        cluster_key=_cluster_key(cfg["cluster"]),
        cov_type=cfg["cov_type"],
        estimator=cfg.get("estimator", "tsls"),
        transform=cfg["transform"],
        base_year=cfg["base_year"],
        pre_window=cfg["pre_window"],
        controls=cfg["controls"],
        dest_share_year=cfg["dest_share_year"],
        period_effects=cfg["period_effects"],
    )
    base.update(over)
    return EstimateConfig(**base)


def _subgroup_industries(data, cfg, used) -> tuple[str, ...] | None:
    from .taxonomy import SLICES, classify_panel, read_classification_csv

    sub = cfg.get("subgroup")
    if sub is None:
        return None
    if sub not in SLICES:
        raise ConfigError(f"subgroup must be one of {SLICES}, got {sub!r}")
    path = Path(cfg["classification"] or Path(cfg["input"]) / "classification.csv")
    used.append(path)
    ann = classify_panel(data.panel, read_classification_csv(path))
    mask = {"risky": ann.risky, "nonrisky": ~ann.risky, "sustainable": ann.sustainable, "nonsustainable": ~ann.sustainable}[sub]
    inds = tuple(k for k, m in zip(data.panel.industries, mask) if m)
    if not inds:
        raise DataValidationError(f"no {sub} industries in the panel")
    return inds


def _irf_rows(res):
    for i, h in enumerate(res.horizons):
        yield (
            int(h), res.beta[i], res.se[i], res.ci_lo[i], res.ci_hi[i], int(res.n_obs[i]),
            int(res.n_clusters[i]), res.first_stage_f[i], res.first_stage_f_classical[i],
        )


IRF_HEADER = ["horizon", "beta", "se", "ci_lo", "ci_hi", "n_obs", "n_clusters", "first_stage_F", "first_stage_F_classical"]


def _fit_irf(sample, config, threads):
    """Fit every horizon; on failure keep the horizons that did fit."""
    from .regress import local_projection_irf

    kw = dict(cov_type=config.cov_type, estimator=config.estimator, period_effects=config.period_effects)
    try:
        return local_projection_irf(sample, config.horizon_range, threads=threads, **kw), None
    except EstimationError as exc:
        done = []
        for h in config.horizon_range:
            try:
                done.append(local_projection_irf(sample, [h], **kw))
            except EstimationError:
                continue
        return done, exc


# subcommands --------------------------------------------------------------

def cmd_simulate(cfg: dict, out: Path):
    from .dgp import load_scenario, simulate_panel, write_simulation

    world, shocks = load_scenario({k: cfg[k] for k in SIM_SECTIONS})
    shocks = replace(shocks, seed=cfg["seed"])
    lo, hi = cfg["horizons"]
    sim = simulate_panel(world, shocks, horizons=range(lo, hi + 1), pre_window=cfg["pre_window"])
    files = write_simulation(sim, out)
    p = sim.data.panel
    print(f"simulated {len(p.regions)} regions x {len(p.industries)} industries, periods {p.periods[0]}-{p.periods[-1]}")
    print("true elasticity path: " + " ".join(f"{x:.3f}" for x in sim.truth.elasticity_path))
    print("true informal path:   " + " ".join(f"{x:.3f}" for x in sim.truth.informal_path))
    print(f"instrument relevance {sim.truth.instrument_relevance:.3f}, home share of world exports {sim.truth.home_share_of_world:.4f}")
    return [], files


def cmd_instrument(cfg: dict, out: Path):
    from .instruments import write_instrument_csv
    from .pipeline import KIND_ALIASES, make_instrument

    data, used = _load(cfg)
    kind = KIND_ALIASES.get(cfg["kind"], cfg["kind"])
    if kind == "long_difference" and cfg["window"] is None:
        raise ConfigError("the long instrument needs window = 'start:end'")
    inst = make_instrument(data, kind, window=cfg["window"], dest_share_year=cfg["dest_share_year"])
    path = out / "instrument.csv"
    write_instrument_csv(inst, path)
    n = int(np.isfinite(inst.values).sum())
    print(f"{inst.kind}: {n} region-period values, {len(inst.exclusions)} exclusions")
    return used, [path]


def _write_diagnostics(path, sample, res_list):
    fitted = {int(r.horizons[i]): (r, i) for r in res_list for i in range(r.horizons.size)}
    rows = []
    for h in sample.horizons:
        r, i = fitted.get(h, (None, None))
        rows.append((
            h, sample.n_obs(h), sample.n_clusters(h),
            r.first_stage_f[i] if r is not None else float("nan"),
            r.first_stage_f_classical[i] if r is not None else float("nan"),
            "ok" if r is not None else "failed",
        ))
    write_rows(path, ["horizon", "n_obs", "n_clusters", "first_stage_F", "first_stage_F_classical", "status"], rows)


def cmd_estimate(cfg: dict, out: Path):
    from .pipeline import estimate_long, prepare_sample

    data, used = _load(cfg)
    industries = _subgroup_industries(data, cfg, used)
    config = _estimate_config(cfg, industries=industries)
    sample = prepare_sample(data, config)
    res, err = _fit_irf(sample, config, cfg["threads"])
    parts = res if err is not None else [res]
    files = []
    p = out / "irf.csv"
    write_rows(p, IRF_HEADER, (row for r in parts for row in _irf_rows(r)))
    files.append(p)
    p = out / "diagnostics.csv"
    _write_diagnostics(p, sample, parts)
    files.append(p)
    p = out / "exclusions.csv"
    write_rows(p, ["region_id", "year", "reason"], ((e.region, e.period, e.reason) for e in sample.exclusions))
    files.append(p)
    for r in parts:
        for row in _irf_rows(r):
            h, b, se, lo, hi, n, g, f, _ = row
            print(f"h={h:>3}  beta={b: .4f}  se={se:.4f}  ci=[{lo: .4f},{hi: .4f}]  N={n}  clusters={g}  F={f:.1f}")
    print(f"exclusions: {len(sample.exclusions)}")
    if err is not None:
        raise err
    if cfg["plot"]:
        from .plots import plot_irf

        files.append(plot_irf(res, out / "irf.svg", title=f"{config.outcome} ({config.slice})"))
    if cfg["long_window"] is not None:
        start, end = cfg["long_window"]
        lr = estimate_long(data, start, end, config, rows=cfg["long_rows"])
        p = out / "longrun.csv"
        write_rows(p, list(lr.CSV_COLUMNS), ([r[c] for c in lr.CSV_COLUMNS] for r in lr.rows))
        files.append(p)
        for r in lr.rows:
            print(f"long {start}-{end} {r['outcome']}/{r['slice']}: beta={r['beta']:.4f} se={r['se']:.4f} F={r['f_stat']:.1f} N={r['n']}")
    return used, files


def cmd_balance(cfg: dict, out: Path):
    from .pipeline import prepare_sample

    data, used = _load(cfg)
    config = _estimate_config(cfg)
    if config.horizons[1] >= 0:
        raise ConfigError("balance horizons must be negative")
    sample = prepare_sample(data, config)
    res, err = _fit_irf(sample, config, cfg["threads"])
    if err is not None:
        raise err
    p = out / "balance.csv"
    write_rows(
        p,
        IRF_HEADER + ["covers_zero"],
        (row + ("true" if row[3] <= 0 <= row[4] else "false",) for row in _irf_rows(res)),
    )
    for row in _irf_rows(res):
        print(f"h={row[0]:>3}  beta={row[1]: .4f}  ci=[{row[3]: .4f},{row[4]: .4f}]")
    return used, [p]


def cmd_binscatter(cfg: dict, out: Path):
    from .pipeline import prepare_sample
    from .regress import binscatter

    data, used = _load(cfg)
    h = cfg["horizon"]
    config = _estimate_config(cfg, horizons=(min(h, 0), max(h, 0)))
    sample = prepare_sample(data, config)
    y_out, endog, inst, W, clusters = sample.frame(h)
    if cfg["stage"] == "first":
        x, y, ylabel = inst, endog, "export growth"
    elif cfg["stage"] == "reduced":
        x, y, ylabel = inst, y_out, f"{config.outcome} change, h={h}"
    else:
        raise ConfigError("stage must be 'first' or 'reduced'")
    res = binscatter(x, y, cfg["bins"], controls=W if cfg["residualize"] else None, cluster_ids=clusters)
    p = out / "binscatter.csv"
    footer = [("slope", res.slope, "", ""), ("t", res.tstat, "", ""), ("n", res.nobs, "", "")]
    write_rows(p, ["bin", "x_mean", "y_mean", "count"], list(res.to_frame().itertuples(index=False)) + footer)
    files = [p]
    if cfg["plot"]:
        from .plots import plot_binscatter

        files.append(plot_binscatter(res, out / "binscatter.svg", xlabel="instrument", ylabel=ylabel))
    print(f"{cfg['stage']} stage: slope={res.slope:.4f} t={res.tstat:.2f} N={res.nobs}")
    return used, files


def cmd_taxonomy_shares(cfg: dict, out: Path):
    import pandas as pd

    from .taxonomy import (
        apply_chain,
        classify_panel,
        read_classification_csv,
        read_concordance_csv,
        share_correlation,
        share_table,
        subgroup_outcomes,
        write_annotated_csv,
    )

    if cfg["rule"] not in ("any", "all", "majority"):
        raise ConfigError(f"unknown propagation rule {cfg['rule']!r}")
    data, used = _load(cfg)
    path = Path(cfg["classification"] or Path(cfg["input"]) / "classification.csv")
    used.append(path)
    cl = read_classification_csv(path)
    if cfg["concordances"]:
        chain = [read_concordance_csv(c) for c in cfg["concordances"]]
        used.extend(Path(c) for c in cfg["concordances"])
        cl = apply_chain(cl, chain, cfg["rule"])
    ann = classify_panel(data.panel, cl, data.informal)
    years = [cfg["year"]] if cfg["year"] is not None else list(data.panel.periods)
    table = pd.concat([share_table(ann, y) for y in years], ignore_index=True)
    files = []
    p = out / "shares.csv"
    write_rows(p, list(table.columns), table.itertuples(index=False))
    files.append(p)
    p = out / "annotated_panel.csv"
    write_annotated_csv(ann, p)
    files.append(p)
    counts = ann.counts_by_sector()
    p = out / "sector_counts.csv"
    write_rows(p, list(counts.columns), counts.itertuples(index=False))
    files.append(p)
    sg = subgroup_outcomes(ann)
    p = out / "subgroups.csv"
    frame = sg.to_frame()
    write_rows(p, list(frame.columns), frame.itertuples(index=False))
    files.append(p)
    corr = [(y, share_correlation(ann, y)) for y in years]
    p = out / "share_correlation.csv"
    write_rows(p, ["year", "corr_risky_sustainable"], corr)
    files.append(p)
    y0 = years[0]
    med = table[table["year"] == y0][["risky_share", "sustainable_share"]].median()
    print(f"{y0}: median risky share {med['risky_share']:.3f}, median sustainable share {med['sustainable_share']:.3f}, correlation {corr[0][1]:.3f}")
    for msg in sg.report:
        print(f"note: {msg}")
    return used, files


COMMANDS = {
    "simulate": (cmd_simulate, "draw a synthetic panel with known elasticities"),
    "instrument": (cmd_instrument, "build the shift-share instrument"),
    "estimate": (cmd_estimate, "local-projection 2SLS impulse responses (and long differences)"),
    "balance": (cmd_balance, "pre-period balance regressions"),
    "binscatter": (cmd_binscatter, "binned first-stage or reduced-form scatter"),
    "taxonomy-shares": (cmd_taxonomy_shares, "risky / sustainable employment shares and subgroup series"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shiftshare", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--out-dir", dest="out_dir", help=GLOBALS["out_dir"].help)
        p.add_argument("--seed", type=int, help=GLOBALS["seed"].help)
        p.add_argument("--threads", type=int, help=GLOBALS["threads"].help)
        for key, opt in OPTIONS[name.replace("-", "_")].items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=opt.help)
    return parser


_NEGATIVE_VALUE = re.compile(r"-\d[\d:.,]*$")


def _glue_negative_values(argv):
    """Turn ``--horizons -5:10`` into ``--horizons=-5:10`` so argparse keeps the value."""
    out = []
    for a in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE_VALUE.match(a):
            out[-1] = f"{out[-1]}={a}"
        else:
            out.append(a)
    return out


def run(argv=None, environ=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_negative_values(sys.argv[1:] if argv is None else list(argv)))
    environ = os.environ if environ is None else environ
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    config_path = args.config or environ.get(f"{ENV_PREFIX}CONFIG")
    func = COMMANDS[args.command][0]
    try:
        cfg = resolve_config(args.command, config_path, flags, environ)
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        try:
            used, files = func(cfg, out)
        except EstimationError:
            write_manifest(out, args.command, cfg, _existing(cfg), sorted(out.glob("*.csv")))
            raise
        inputs = list(used) + ([config_path] if config_path else [])
        write_manifest(out, args.command, cfg, inputs, files)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    return 0


def _existing(cfg):
    inp = Path(cfg.get("input", "."))
    return [p for p in sorted(inp.glob("*.csv")) if p.name in _INPUT_FILES]


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
