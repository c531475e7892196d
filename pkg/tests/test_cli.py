import csv
import json

import numpy as np
import pytest

from shiftshare.cli import resolve_config, run
from shiftshare.errors import ConfigError
from shiftshare.loaders import load_panel
from shiftshare.pipeline import EstimateConfig, prepare_sample
from shiftshare.regress import ols
from shiftshare.taxonomy import classify_panel, read_classification_csv, shares

SIM_FILES = {
    "panel.csv", "exports.csv", "world_exports.csv", "dest_gdp.csv", "dest_shares.csv",
    "informal_panel.csv", "classification.csv", "schema.toml", "truth.json", "run.json",
}


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def outputs(d):
    """Bytes of every output, with run.json minus the run-specific out_dir."""
    got = {}
    for p in sorted(d.iterdir()):
        if p.name == "run.json":
            m = json.loads(p.read_text())
            m["config"].pop("out_dir")
            got[p.name] = json.dumps(m, sort_keys=True).encode()
        else:
            got[p.name] = p.read_bytes()
    return got


@pytest.fixture(scope="module")
def cli_sim(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "world.toml"
    cfg.write_text("[world]\nn_regions = 40\n")
    assert run(["simulate", "--config", str(cfg), "--out-dir", str(root / "sim"), "--seed", "11"], environ={}) == 0
    return root / "sim"


def test_simulate_writes_inputs_and_manifest(cli_sim):
    assert {p.name for p in cli_sim.iterdir()} == SIM_FILES
    m = json.loads((cli_sim / "run.json").read_text())
    assert m["command"] == "simulate" and m["config"]["seed"] == 11 and m["config"]["world"]["n_regions"] == 40
    assert set(m["outputs"]) == SIM_FILES - {"run.json"}
    assert not any(k in json.dumps(m) for k in ("timestamp", "time", "date"))


COMMANDS = [
    ["estimate", "--horizons", "-2:3", "--long-window", "2005:2015"],
    ["balance"],
    ["binscatter", "--stage", "reduced", "--horizon", "2"],
    ["taxonomy-shares"],
    ["instrument", "--kind", "long", "--window", "2004:2014"],
]


@pytest.mark.parametrize("argv", COMMANDS, ids=lambda a: a[0])
def test_reruns_are_byte_identical(cli_sim, tmp_path, argv):
    for d in ("a", "b"):
        assert run(argv + ["--input", str(cli_sim), "--out-dir", str(tmp_path / d)], environ={}) == 0
    a, b = outputs(tmp_path / "a"), outputs(tmp_path / "b")
    assert a.keys() == b.keys() and a == b


def test_simulate_rerun_is_byte_identical(tmp_path):
    cfg = tmp_path / "w.toml"
    cfg.write_text("[world]\nn_regions = 20\n")
    for d in ("a", "b"):
        assert run(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path / d)], environ={}) == 0
    assert outputs(tmp_path / "a") == outputs(tmp_path / "b")


def test_default_flags_equal_implicit_defaults(cli_sim, tmp_path):
    base = ["estimate", "--input", str(cli_sim), "--plot", "false"]
    assert run(base + ["--out-dir", str(tmp_path / "a")], environ={}) == 0
    assert run(base + ["--out-dir", str(tmp_path / "b"), "--horizons", "-5:10", "--cluster", "region"], environ={}) == 0
    assert outputs(tmp_path / "a") == outputs(tmp_path / "b")


# configuration layering ---------------------------------------------------

def test_precedence_default_file_env_flag(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[run]\nseed = 3\n[estimate]\nestimator = "ols"\nbins = 1\n'.replace("bins = 1\n", ""))
    assert resolve_config("estimate", None, {}, {})["estimator"] == "tsls"
    assert resolve_config("estimate", cfg, {}, {})["estimator"] == "ols"
    env = {"SHIFTSHARE_ESTIMATE_ESTIMATOR": "tsls", "SHIFTSHARE_SEED": "9"}
    r = resolve_config("estimate", cfg, {}, env)
    assert r["estimator"] == "tsls" and r["seed"] == 9
    r = resolve_config("estimate", cfg, {"estimator": "ols", "seed": 1}, env)
    assert r["estimator"] == "ols" and r["seed"] == 1


def test_unknown_settings_rejected(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[estimate]\nhorizon = 3\n")
    with pytest.raises(ConfigError, match="horizon"):
        resolve_config("estimate", cfg, {}, {})
    with pytest.raises(ConfigError):
        resolve_config("estimate", None, {}, {"SHIFTSHARE_ESTIMATE_NOPE": "1"})
    cfg.write_text("[estimat]\n")
    with pytest.raises(ConfigError):
        resolve_config("estimate", cfg, {}, {})


def test_env_override_changes_estimates(cli_sim, tmp_path):
    base = ["estimate", "--input", str(cli_sim), "--horizons", "0:2", "--plot", "false"]
    assert run(base + ["--out-dir", str(tmp_path / "a")], environ={}) == 0
    assert run(base + ["--out-dir", str(tmp_path / "b")], environ={"SHIFTSHARE_ESTIMATE_ESTIMATOR": "ols"}) == 0
    assert read(tmp_path / "a" / "irf.csv")[0]["beta"] != read(tmp_path / "b" / "irf.csv")[0]["beta"]
    assert json.loads((tmp_path / "b" / "run.json").read_text())["config"]["estimator"] == "ols"


def test_destination_kind_routes_to_gdp_instrument(cli_sim, tmp_path):
    assert run(["instrument", "--input", str(cli_sim), "--kind", "destination", "--out-dir", str(tmp_path)], environ={}) == 0
    rows = read(tmp_path / "instrument.csv")
    assert {r["kind"] for r in rows} == {"destination_gdp"}


# exit codes ---------------------------------------------------------------

def test_config_errors_exit_2(cli_sim, tmp_path, capsys):
    assert run(["simulate", "--out-dir", str(tmp_path / "s"), "--horizons", "-5:40"], environ={}) == 2
    assert run(["estimate", "--input", str(cli_sim), "--out-dir", str(tmp_path), "--estimator", "ml"], environ={}) == 2
    assert run(["estimate", "--input", str(tmp_path / "missing"), "--out-dir", str(tmp_path)], environ={}) == 2
    assert "config error" in capsys.readouterr().err


def test_malformed_input_exits_3(cli_sim, tmp_path):
    bad = tmp_path / "bad"
    bad.mkdir()
    for p in cli_sim.iterdir():
        (bad / p.name).write_bytes(p.read_bytes())
    text = (bad / "panel.csv").read_text().splitlines()
    parts = text[5].split(",")
    parts[2] = "20x1"
    text[5] = ",".join(parts)
    (bad / "panel.csv").write_text("\n".join(text) + "\n")
    assert run(["estimate", "--input", str(bad), "--out-dir", str(tmp_path / "o")], environ={}) == 3


def test_weak_instrument_exits_4_with_partial_outputs(cli_sim, tmp_path):
    weak = tmp_path / "weak"
    weak.mkdir()
    for p in cli_sim.iterdir():
        (weak / p.name).write_bytes(p.read_bytes())
    rows = read(weak / "world_exports.csv")
    with open(weak / "world_exports.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["industry_id", "year", "value"])
        w.writerows((r["industry_id"], r["year"], 1000) for r in rows)
    out = tmp_path / "o"
    assert run(["estimate", "--input", str(weak), "--out-dir", str(out)], environ={}) == 4
    diag = read(out / "diagnostics.csv")
    assert {r["status"] for r in diag} == {"failed"}
    assert (out / "irf.csv").exists() and (out / "run.json").exists()


# delegation ---------------------------------------------------------------

def test_binscatter_slope_matches_ols(cli_sim, tmp_path):
    assert run(["binscatter", "--input", str(cli_sim), "--out-dir", str(tmp_path), "--plot", "false"], environ={}) == 0
    footer = {r["bin"]: r["x_mean"] for r in read(tmp_path / "binscatter.csv") if r["bin"] in ("slope", "n")}
    sample = prepare_sample(load_panel(cli_sim), EstimateConfig(horizons=(0, 0)))
    _, endog, inst, W, cl = sample.frame(0)
    X = np.column_stack([np.ones(inst.size), inst, W])
    assert float(footer["slope"]) == ols(endog, X, cl).params[1]
    assert int(footer["n"]) == inst.size


def test_taxonomy_shares_match_library(cli_sim, tmp_path):
    assert run(["taxonomy-shares", "--input", str(cli_sim), "--out-dir", str(tmp_path)], environ={}) == 0
    data = load_panel(cli_sim)
    ann = classify_panel(data.panel, read_classification_csv(cli_sim / "classification.csv"))
    rows = read(tmp_path / "shares.csv")
    assert len(rows) == len(data.panel.regions) * len(data.panel.periods)
    for r in rows[::37]:
        risky, sust = shares(ann, r["region_id"], int(r["year"]))
        assert float(r["risky_share"]) == risky and float(r["sustainable_share"]) == sust


def test_subgroup_estimate_runs(cli_sim, tmp_path):
    argv = ["estimate", "--input", str(cli_sim), "--out-dir", str(tmp_path), "--subgroup", "risky", "--horizons", "0:1"]
    assert run(argv, environ={}) == 0
    assert len(read(tmp_path / "irf.csv")) == 2


def test_cluster_mapping_file(cli_sim, tmp_path):
    regions = sorted({r["region_id"] for r in read(cli_sim / "exports.csv")})
    own = tmp_path / "own.csv"
    own.write_text("region_id,cluster_id\n" + "".join(f"{r},{r}\n" for r in regions))
    groups = tmp_path / "groups.csv"
    groups.write_text("region_id,cluster_id\n" + "".join(f"{r},g{i % 4}\n" for i, r in enumerate(regions)))
    base = ["estimate", "--input", str(cli_sim), "--horizons", "0:2", "--plot", "false"]
    assert run(base + ["--out-dir", str(tmp_path / "a")], environ={}) == 0
    assert run(base + ["--out-dir", str(tmp_path / "b"), "--cluster", str(own)], environ={}) == 0
    assert (tmp_path / "a" / "irf.csv").read_bytes() == (tmp_path / "b" / "irf.csv").read_bytes()
    assert str(own) in json.loads((tmp_path / "b" / "run.json").read_text())["inputs"]
    assert run(base + ["--out-dir", str(tmp_path / "c"), "--cluster", str(groups)], environ={}) == 0
    assert {r["n_clusters"] for r in read(tmp_path / "c" / "irf.csv")} == {"4"}
    groups.write_text("region_id,cluster_id\n" + "".join(f"{r},g\n" for r in regions[1:]))
    assert run(base + ["--out-dir", str(tmp_path / "d"), "--cluster", str(groups)], environ={}) == 2
