"""Acceptance criteria 1-8, one pass/fail line each at the stated tolerance.

Monte Carlo criteria use held-out seeds 0..199; the calibration runs that
fixed the confounder strength and subgroup paths used seeds from 1000 up.
"""

import hashlib
import itertools
import json
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES, make_data
from test_regress import iv_data, long_vs_lp

from shiftshare.cli import run
from shiftshare.dgp import (
    PAPER_SHAPED_PATH,
    GravityWorld,
    ShockConfig,
    WorldConfig,
    inject_confounder,
    make_world,
    simulate_panel,
    solve_shares,
)
from shiftshare.instruments import InstrumentConfig, build_instrument_series
from shiftshare.panel import RegionPanel
from shiftshare.pipeline import (
    EstimateConfig,
    estimate_irf,
    estimate_long,
    prepare_sample,
)
from shiftshare.regress import (
    cluster_vcov,
    first_stage_f,
    local_projection_irf,
    long_difference,
    ols,
    robust_vcov,
    tsls,
)
from shiftshare.taxonomy import (
    ActivityClassification,
    Concordance,
    apply_chain,
    apply_concordance,
    classify_panel,
    compose,
    subgroup_outcomes,
)

N_REPS = 200
SEEDS = range(N_REPS)
HORIZONS = (-5, 10)
CONFOUNDER_STRENGTH = 0.015
RISKY_PATH = (0.45, 0.45, 0.35, 0.25, 0.15, 0.10, 0.05, 0.05, 0.05, 0.05, 0.05)
SUSTAINABLE_PATH = (0.05, 0.10, 0.20, 0.30, 0.40, 0.45, 0.50, 0.50, 0.50, 0.50, 0.50)
CENSUS_NOISE_SD = 0.05


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def truth_path():
    return np.array([0.0] * 5 + list(PAPER_SHAPED_PATH))


@pytest.fixture(scope="module")
def valid_runs():
    """200 replications of the valid-instrument DGP, default world, wall time included."""
    t0 = time.perf_counter()
    beta, lo, hi = [], [], []
    for s in SEEDS:
        sim = simulate_panel(WorldConfig(), ShockConfig(seed=s))
        irf = estimate_irf(sim.data, EstimateConfig(horizons=HORIZONS, period_effects=True))
        beta.append(irf.beta)
        lo.append(irf.ci_lo)
        hi.append(irf.ci_hi)
    elapsed = time.perf_counter() - t0
    return np.array(beta), np.array(lo), np.array(hi), elapsed, irf.horizons


def test_criterion_1_elasticity_recovery(valid_runs):
    beta, lo, hi, elapsed, horizons = valid_runs
    truth = truth_path()
    post = horizons >= 0
    # slack of 1e-12 absorbs rounding at the interval ends
    covered = ((lo <= truth + 1e-12) & (truth - 1e-12 <= hi)).mean(axis=0)[post]
    bias = np.abs(beta.mean(axis=0) - truth)[post]
    ok = covered.min() >= 0.90 and bias.mean() <= 0.03 and elapsed <= 120.0
    report(
        1, ok,
        f"min coverage {covered.min():.3f} (>= 0.90), mean |bias| {bias.mean():.4f} (<= 0.03), "
        f"max |bias| {bias.max():.4f}, runtime {elapsed:.1f}s (<= 120s), R=200 K=12 T=25, {N_REPS} reps",
    )
    assert covered.min() >= 0.90
    assert bias.mean() <= 0.03
    assert elapsed <= 120.0


def test_criterion_1_without_period_effects_informational():
    """Same check with a single intercept; reported, not asserted."""
    beta = []
    for s in range(50):
        sim = simulate_panel(WorldConfig(), ShockConfig(seed=s))
        beta.append(estimate_irf(sim.data, EstimateConfig(horizons=(0, 10))).beta)
    bias = np.abs(np.mean(beta, axis=0) - np.array(PAPER_SHAPED_PATH))
    line = f"criterion 1 (info, no period effects, 50 reps): mean |bias| {bias.mean():.4f}, max {bias.max():.4f}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_2_endogeneity_separation():
    truth = np.array(PAPER_SHAPED_PATH)
    b_ols, b_iv = [], []
    for s in SEEDS:
        sim = simulate_panel(WorldConfig(), inject_confounder(ShockConfig(seed=s), CONFOUNDER_STRENGTH))
        cfg = EstimateConfig(horizons=(0, 10), period_effects=True)
        sample = prepare_sample(sim.data, cfg)
        b_iv.append(local_projection_irf(sample, period_effects=True).beta)
        b_ols.append(local_projection_irf(sample, estimator="ols", period_effects=True).beta)
    bias_ols = np.mean(np.mean(b_ols, axis=0) - truth)
    bias_iv = np.mean(np.abs(np.mean(b_iv, axis=0) - truth))
    ok = bias_ols >= 0.10 and bias_iv <= 0.03
    report(
        2, ok,
        f"OLS mean bias {bias_ols:.4f} (>= 0.10), 2SLS mean |bias| {bias_iv:.4f} (<= 0.03), "
        f"confounder strength {CONFOUNDER_STRENGTH}, {N_REPS} reps",
    )
    assert bias_ols >= 0.10
    assert bias_iv <= 0.03


def test_criterion_3_balance(valid_runs):
    _, lo, hi, _, horizons = valid_runs
    pre = horizons < 0
    covered = ((lo <= 1e-12) & (-1e-12 <= hi)).mean(axis=0)[pre]
    detail = ", ".join(f"h={h}: {c:.3f}" for h, c in zip(horizons[pre], covered))
    ok = covered.min() >= 0.90
    report(3, ok, f"coverage of 0 per pre-horizon >= 0.90 [{detail}], {N_REPS} reps")
    assert ok


def test_criterion_4_identities(small_sim):
    errs = {}
    y, x, z, w, cl = iv_data()
    iv = tsls(y, x, x, w, cl)
    o = ols(y, np.column_stack([np.ones(y.size), x, w]), cl)
    errs["2SLS=OLS under identity instrument"] = max(np.abs(iv.params - o.params).max(), np.abs(iv.vcov - o.vcov).max())

    y, x, z, w, cl = iv_data(seed=3)
    r = tsls(y, x, z, w, cl)
    t = r.first_stage.tstat("instrument")
    errs["first-stage F = t^2 (relative)"] = abs(first_stage_f(r.first_stage) / (t * t) - 1)

    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(30), rng.normal(size=(30, 2))])
    e = ols(rng.normal(size=30), X).resid
    errs["singleton clusters = robust"] = np.abs(cluster_vcov(X, e, np.arange(30)) - robust_vcov(X, e)).max()

    data, start = small_sim.data, 2010
    lr = long_difference(long_vs_lp(data, start)).rows[0]
    lp_sample = prepare_sample(data, EstimateConfig(horizons=(0, 0)))
    keep = lp_sample.periods == start + 1
    sub = type(lp_sample)(
        lp_sample.regions[keep], lp_sample.periods[keep], lp_sample.endog[keep], lp_sample.instrument[keep],
        lp_sample.controls[keep], lp_sample.control_names, lp_sample.cluster_ids[keep],
        {0: lp_sample.outcomes[0][keep]},
    )
    lp = local_projection_irf(sub)
    errs["long difference = LP on two periods"] = max(abs(lr["beta"] - lp.beta[0]), abs(lr["se"] - lp.se[0]))

    d = make_data(n_regions=5, n_periods=7)
    e = np.repeat(np.array(d.panel.employment)[:, :, :1], 7, axis=2)
    panel = RegionPanel(d.panel.regions, d.panel.industries, d.panel.periods, e, e * 10)
    annual = build_instrument_series(panel, d.world)
    long = build_instrument_series(panel, d.world, "long_difference", InstrumentConfig(window=(2000, 2006)))
    errs["telescoped annual = long instrument"] = np.abs(np.nansum(annual.values[:, 1:], axis=1) - long.values[:, -1]).max()

    worst = max(errs.values())
    detail = "; ".join(f"{k} {v:.1e}" for k, v in errs.items())
    report(4, worst <= 1e-8, f"all identities within 1e-8 [{detail}]")
    assert worst <= 1e-8


def test_criterion_5_gravity_oracle():
    S, D, K = 5, 3, 2
    sym = GravityWorld(np.ones((S, K)), np.ones((S, K)), np.ones((S, D, K)), np.full(K, 4.0), np.full((D, K), 10.0), S)
    exact = bool((solve_shares(sym).trade_shares == 1 / S).all())

    w = make_world(WorldConfig(), np.random.default_rng(1))
    sol = solve_shares(w)
    rel = abs(sol.income.sum() / w.expenditure.sum() - 1)

    two = GravityWorld(np.array([[2.0], [1.0]]), np.ones((2, 1)), np.ones((2, 1, 1)), np.array([1.0]), np.array([[1.0]]), 2)
    lam = solve_shares(two).trade_shares[:, 0, 0]
    hand = np.abs(lam - [2 / 3, 1 / 3]).max()

    ok = exact and rel <= 1e-6 and hand <= 1e-15
    report(5, ok, f"symmetric shares exactly 1/R: {exact}; income/expenditure rel. error {rel:.1e} (<= 1e-6); "
                  f"2-region lambda {lam[0]:.6f},{lam[1]:.6f} (error {hand:.1e})")
    assert ok


def test_criterion_6_subgroup_pattern():
    crossing = []
    for s in SEEDS:
        sim = simulate_panel(shocks=ShockConfig(seed=s, risky_path=RISKY_PATH, sustainable_path=SUSTAINABLE_PATH))
        tr = sim.truth
        cfg = EstimateConfig(horizons=(0, 10), period_effects=True)
        r = estimate_irf(sim.data, EstimateConfig(**{**cfg.__dict__, "industries": tr.risky_industries})).beta
        su = estimate_irf(sim.data, EstimateConfig(**{**cfg.__dict__, "industries": tr.sustainable_industries})).beta
        crossing.append(bool((r[:2] > su[:2]).all() and (su[6:] > r[6:]).all()))

    signs = []
    for s in SEEDS:
        shocks = ShockConfig(seed=s, region_noise_sd=CENSUS_NOISE_SD, transitory_noise_sd=CENSUS_NOISE_SD)
        sim = simulate_panel(shocks=shocks)
        lr = estimate_long(sim.data, 2004, 2024, rows=(("employment", "formal"), ("employment", "informal")))
        signs.append(lr.row("employment", "formal")["beta"] > 0 and lr.row("employment", "informal")["beta"] < 0)

    c, g = np.mean(crossing), np.mean(signs)
    ok = c >= 0.80 and g >= 0.90
    report(6, ok, f"crossing (risky > sustainable at h<=1, sustainable > risky at h>=6) in {c:.3f} of reps (>= 0.80); "
                  f"long-difference formal>0, informal<0 in {g:.3f} (>= 0.90), {N_REPS} reps each")
    assert c >= 0.80
    assert g >= 0.90


def test_criterion_7_taxonomy_invariants(small_sim):
    ann = classify_panel(small_sim.data.panel, ActivityClassification(small_sim.classification),
                         informal=small_sim.data.informal)
    sub = subgroup_outcomes(ann)
    emp = sub.employment
    partition = all(
        np.array_equal(emp[(a, seg)] + emp[(b, seg)], sub.totals[seg])
        for seg in sub.segments
        for a, b in (("risky", "nonrisky"), ("sustainable", "nonsustainable"))
    ) and all(
        np.array_equal(emp[(sl, "formal")] + emp[(sl, "informal")], emp[(sl, "total")])
        for sl in ("risky", "nonrisky", "sustainable", "nonsustainable")
    )
    # wage bills are not integers; the two splits group the same floats differently
    wb = sub.wage_bill
    wage_rel = max(
        np.max(np.abs((wb[("sustainable", seg)] + wb[("nonsustainable", seg)]) - (wb[("risky", seg)] + wb[("nonrisky", seg)]))
               / (wb[("risky", seg)] + wb[("nonrisky", seg)]))
        for seg in sub.segments
    )

    # 10 source codes, 5 intermediate, 3 target; seeded random link sets
    rng = np.random.default_rng(7)
    src, mid, tgt = [f"a{i}" for i in range(10)], [f"m{i}" for i in range(5)], [f"t{i}" for i in range(3)]
    composition = True
    for _ in range(300):
        first = Concordance(tuple((a, m) for a in src for m in rng.choice(mid, rng.integers(1, 4), replace=False)))
        second = Concordance(tuple((m, t) for m in mid for t in rng.choice(tgt, rng.integers(1, 3), replace=False)))
        bits = dict(zip(src, rng.random(10) < 0.3))
        cl = ActivityClassification({a: (b, "none") for a, b in bits.items()})
        chained = apply_chain(cl, [first, second], "any")
        direct = apply_concordance(cl, compose(first, second), "any")
        oracle = {}
        for (a, m), (m2, t) in itertools.product(first.links, second.links):
            if m == m2:
                oracle[t] = oracle.get(t, False) or bits[a]
        composition &= chained.records == direct.records and {c: chained.risky(c) for c in chained.codes} == oracle

    one_of_two = apply_concordance(
        ActivityClassification({"A1": (True, "none"), "A2": (False, "none")}), Concordance((("A1", "A"), ("A2", "A"))), "any"
    ).risky("A")

    ok = partition and composition and one_of_two and wage_rel <= 1e-15
    report(7, ok, f"employment partition exact (zero tolerance): {partition}; wage-bill split rel. error {wage_rel:.1e}; chain = composed on 10-code fixture (300 draws): "
                  f"{composition}; one risky source flags the target under 'any': {one_of_two}")
    assert ok


def _digests(d):
    files = {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir()) if p.name != "run.json"}
    m = json.loads((d / "run.json").read_text())
    m["config"].pop("out_dir")
    files["run.json"] = hashlib.sha256(json.dumps(m, sort_keys=True).encode()).hexdigest()
    return files


def test_criterion_8_determinism(tmp_path):
    world = tmp_path / "world.toml"
    world.write_text("[world]\nn_regions = 40\n")
    commands = {
        "simulate": ["simulate", "--config", str(world), "--seed", "5"],
        "instrument": ["instrument", "--kind", "destination"],
        "estimate": ["estimate", "--horizons", "-5:10", "--long-window", "2004:2024"],
        "balance": ["balance"],
        "binscatter": ["binscatter"],
        "taxonomy-shares": ["taxonomy-shares"],
    }
    same, n_files = [], 0
    data_dir = tmp_path / "a" / "simulate"
    for name, argv in commands.items():
        runs = []
        for rep in ("a", "b"):
            out = tmp_path / rep / name
            extra = [] if name == "simulate" else ["--input", str(data_dir)]
            assert run(argv + extra + ["--out-dir", str(out)], environ={}) == 0
            runs.append(_digests(out))
        same.append(runs[0] == runs[1])
        n_files += len(runs[0])
    ok = all(same)
    report(8, ok, f"{len(commands)} commands re-run with identical config and seed: {n_files} files, sha256 identical: {ok}")
    assert ok
