import warnings

import numpy as np
import pytest
import statsmodels.api as sm
from conftest import make_data
from hypothesis import given, settings
from hypothesis import strategies as st
from statsmodels.sandbox.regression.gmm import IV2SLS

from shiftshare.errors import (
    EmptySampleError,
    EstimationError,
    RankDeficiencyError,
    WeakInstrumentError,
)
from shiftshare.panel import build_long_sample
from shiftshare.pipeline import (
    EstimateConfig,
    _controls,
    make_instrument,
    outcome_series,
    prepare_sample,
)
from shiftshare.regress import (
    binscatter,
    cluster_vcov,
    first_stage_f,
    local_projection_irf,
    long_difference,
    ols,
    robust_vcov,
    tsls,
    within_transform,
)


def design(n=40, k=3, seed=0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
    y = X @ rng.normal(size=k) + rng.normal(size=n) * (1 + np.abs(X[:, 1]))
    return y, X, rng


def iv_data(n=200, seed=0, strength=1.0):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=n)
    w = rng.normal(size=(n, 2))
    u = rng.normal(size=n)
    x = strength * z + 0.5 * u + w @ [0.3, -0.2] + rng.normal(size=n)
    y = 0.7 * x + w @ [1.0, 0.5] + u
    cl = np.repeat(np.arange(n // 5), 5)
    return y, x, z, w, cl


# ols -----------------------------------------------------------------------

def test_ols_exact_fit():
    X = np.column_stack([np.ones(3), [1.0, 2.0, 3.0]])
    r = ols([2.0, 4.0, 6.0], X, names=("const", "x"))
    assert r.coef("x") == pytest.approx(2.0, abs=1e-10)
    assert r.coef("const") == pytest.approx(0.0, abs=1e-10)


def test_ols_constant_y():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    r = ols(np.full(5, 3.2), X)
    np.testing.assert_allclose(r.params, [3.2, 0.0], atol=1e-12)


def test_ols_matches_normal_equations():
    y = np.array([1.0, 3.0, 2.0, 5.0, 4.0])
    X = np.column_stack([np.ones(5), [0.5, 1.0, 2.0, 3.5, 3.0], [1.0, 0.0, 1.0, 0.0, 2.0]])
    oracle = np.linalg.inv(X.T @ X) @ X.T @ y
    np.testing.assert_allclose(ols(y, X).params, oracle, rtol=0, atol=1e-8)


def test_rank_deficiency_names_columns():
    X = np.column_stack([np.ones(6), np.arange(6.0), 2 * np.arange(6.0)])
    with pytest.raises(RankDeficiencyError, match="b.*c") as exc:
        ols(np.arange(6.0), X, names=("a", "b", "c"))
    assert set(exc.value.columns) == {"b", "c"}


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.integers(8, 60), st.integers(1, 5))
def test_residual_orthogonality(seed, n, k):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, k))])
    y = rng.normal(size=n) * 10
    r = ols(y, X)
    assert np.abs(X.T @ r.resid).max() <= 1e-8 * max(np.linalg.norm(y), 1.0) * np.abs(X).max() * n


def test_ols_vcov_matches_statsmodels():
    y, X, rng = design()
    cl = rng.integers(0, 8, size=y.size)
    sm_cl = sm.OLS(y, X).fit(cov_type="cluster", cov_kwds={"groups": cl})
    np.testing.assert_allclose(ols(y, X, cl).vcov, sm_cl.cov_params(), rtol=1e-10)
    sm_hc = sm.OLS(y, X).fit(cov_type="HC1")
    np.testing.assert_allclose(ols(y, X, cov_type="robust").vcov, sm_hc.cov_params(), rtol=1e-10)
    np.testing.assert_allclose(ols(y, X).vcov, sm.OLS(y, X).fit().cov_params(), rtol=1e-10)


def test_vcov_symmetric_psd():
    y, X, rng = design(n=60, k=4)
    V = ols(y, X, rng.integers(0, 10, size=60)).vcov
    np.testing.assert_array_equal(V, V.T)
    assert np.linalg.eigvalsh(V).min() >= -1e-9


# cluster vcov -------------------------------------------------------------

def test_singleton_clusters_equal_robust():
    y, X, _ = design(n=30)
    r = ols(y, X)
    np.testing.assert_allclose(cluster_vcov(X, r.resid, np.arange(30)), robust_vcov(X, r.resid), rtol=1e-10, atol=1e-14)


def test_two_cluster_hand_sandwich():
    X = np.column_stack([np.ones(4), [0.0, 1.0, 2.0, 4.0]])
    y = np.array([1.0, 0.5, 2.5, 3.0])
    cl = np.array([0, 0, 1, 1])
    r = ols(y, X)
    e = r.resid
    bread = np.linalg.inv(X.T @ X)
    s0 = X[0] * e[0] + X[1] * e[1]
    s1 = X[2] * e[2] + X[3] * e[3]
    meat = np.outer(s0, s0) + np.outer(s1, s1)
    factor = 2 / 1 * 3 / 2
    np.testing.assert_allclose(cluster_vcov(X, e, cl), factor * bread @ meat @ bread, rtol=1e-10, atol=1e-14)


def test_single_cluster_is_error():
    y, X, _ = design(n=10)
    with pytest.raises(EstimationError, match="2 clusters"):
        ols(y, X, np.zeros(10))


def test_clustered_se_close_to_classical_under_homoskedasticity():
    rng = np.random.default_rng(11)
    ratios = []
    for _ in range(200):
        n = 400
        X = np.column_stack([np.ones(n), rng.normal(size=n)])
        y = X @ [1.0, 0.5] + rng.normal(size=n)
        r = ols(y, X, np.repeat(np.arange(100), 4))
        ratios.append(np.sqrt(r.vcov[1, 1] / r.vcov_classical[1, 1]))
    assert abs(np.mean(ratios) - 1.0) < 0.15


# tsls ---------------------------------------------------------------------

def test_identity_instrument_equals_ols():
    y, x, _, w, cl = iv_data()
    iv = tsls(y, x, x, w, cl)
    o = ols(y, np.column_stack([np.ones(y.size), x, w]), cl)
    np.testing.assert_allclose(iv.params, o.params, rtol=0, atol=1e-10)
    np.testing.assert_allclose(iv.vcov, o.vcov, rtol=1e-10, atol=1e-14)


def test_tsls_sequential_oracle_with_structural_residuals():
    y = np.array([1.0, 2.2, 2.9, 4.1, 5.3, 5.8])
    x = np.array([0.5, 1.1, 1.4, 2.2, 2.4, 3.1])
    z = np.array([0.0, 1.0, 1.0, 2.0, 3.0, 3.0])
    Z = np.column_stack([np.ones(6), z])
    xhat = Z @ np.linalg.lstsq(Z, x, rcond=None)[0]
    Xh = np.column_stack([np.ones(6), xhat])
    b = np.linalg.lstsq(Xh, y, rcond=None)[0]
    resid = y - np.column_stack([np.ones(6), x]) @ b
    V = resid @ resid / (6 - 2) * np.linalg.inv(Xh.T @ Xh)
    r = tsls(y, x, z, cov_type="classical")
    np.testing.assert_allclose(r.params, b, rtol=0, atol=1e-8)
    np.testing.assert_allclose(r.vcov, V, rtol=0, atol=1e-8)
    # the naive second-stage residuals would give a different answer
    naive = y - Xh @ b
    assert abs(naive @ naive - resid @ resid) > 1e-3


def test_tsls_matches_statsmodels_iv():
    y, x, z, w, _ = iv_data()
    exog = np.column_stack([np.ones(y.size), x, w])
    inst = np.column_stack([np.ones(y.size), z, w])
    ref = IV2SLS(y, exog, inst).fit()
    r = tsls(y, x, z, w, cov_type="classical")
    np.testing.assert_allclose(r.params, ref.params, rtol=1e-10)
    np.testing.assert_allclose(r.vcov, ref.cov_params(), rtol=1e-8)


def test_orthogonal_instrument_is_weak():
    x = np.array([1.0, -1.0, 1.0, -1.0, 2.0, -2.0, 2.0, -2.0])
    z = np.array([1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0])
    with pytest.raises(WeakInstrumentError):
        tsls(x * 0.3 + 1, x, z, cov_type="robust")


def test_first_stage_f_is_t_squared():
    y, x, z, w, cl = iv_data(seed=3)
    for cov in ("cluster", "robust", "classical"):
        r = tsls(y, x, z, w, cl if cov == "cluster" else None, cov_type=cov)
        t = r.first_stage.tstat("instrument")
        assert first_stage_f(r.first_stage) == pytest.approx(t * t, rel=1e-8)
    r = tsls(y, x, z, w, cl)
    classical_t = r.first_stage.coef("instrument") / np.sqrt(r.first_stage.vcov_classical[1, 1])
    assert first_stage_f(r.first_stage, classical=True) == pytest.approx(classical_t**2, rel=1e-8)


def test_first_stage_f_monte_carlo():
    rng = np.random.default_rng(5)
    strong, noise = [], []
    for rep in range(200):
        n = 300
        z = rng.normal(size=n)
        x = 2.25 * z + rng.normal(size=n) * 3
        y = 0.4 * x + rng.normal(size=n)
        strong.append(first_stage_f(tsls(y, x, z, cov_type="robust").first_stage))
        xn = rng.normal(size=n)
        noise.append(first_stage_f(tsls(y, xn + 0.0, rng.normal(size=n), cov_type="classical").first_stage))
    assert np.mean(np.array(strong) > 100) >= 0.95
    # F of an irrelevant instrument is chi-square(1): mean 1, median 0.45
    assert np.median(noise) < 1.0
    assert abs(np.mean(noise) - 1.0) < 0.3


# local projections --------------------------------------------------------

def test_irf_structure(small_sim):
    s = prepare_sample(small_sim.data, EstimateConfig(horizons=(-5, 10)))
    irf = local_projection_irf(s)
    assert list(irf.horizons) == list(range(-5, 11))
    assert (irf.ci_lo <= irf.beta).all() and (irf.beta <= irf.ci_hi).all()
    assert (irf.first_stage_f >= 0).all()
    np.testing.assert_allclose(irf.ci_hi - irf.beta, 1.96 * irf.se)
    assert irf.metadata["cluster_key"] == "region"
    with pytest.raises(ValueError, match="contiguous"):
        local_projection_irf(s, [0, 2])


def test_irf_threads_match_serial(small_sim):
    s = prepare_sample(small_sim.data, EstimateConfig(horizons=(0, 6)))
    a = local_projection_irf(s, threads=1)
    b = local_projection_irf(s, threads=4)
    np.testing.assert_array_equal(a.beta, b.beta)
    np.testing.assert_array_equal(a.se, b.se)


def test_irf_affine_invariance(small_sim):
    s = prepare_sample(small_sim.data, EstimateConfig(horizons=(0, 4)))
    scaled = s.with_outcomes({h: 3.7 * v for h, v in s.outcomes.items()})
    a, b = local_projection_irf(s), local_projection_irf(scaled)
    np.testing.assert_allclose(b.beta, 3.7 * a.beta, rtol=1e-10)
    np.testing.assert_allclose(b.se, 3.7 * a.se, rtol=1e-10)
    np.testing.assert_allclose(b.beta / b.se, a.beta / a.se, rtol=1e-10)


def test_irf_single_period_panel_errors():
    data = make_data(n_regions=3, n_periods=2)
    with pytest.raises(EmptySampleError):
        prepare_sample(data, EstimateConfig(horizons=(0, 3), pre_window=(1, 2)))


def test_period_effects_equal_period_dummies(small_sim):
    s = prepare_sample(small_sim.data, EstimateConfig(horizons=(2, 2)))
    fe = local_projection_irf(s, period_effects=True)
    y, x, z, W, cl = s.frame(2)
    per = s.periods[s.mask(2)]
    D = (per[:, None] == np.unique(per)[None, :]).astype(float)
    ref = tsls(y, x, z, np.column_stack([W, D]), cl, add_const=False)
    assert fe.beta[0] == pytest.approx(ref.coef("endog"), abs=1e-10)
    assert fe.se[0] == pytest.approx(ref.stderr("endog"), rel=1e-8)


# long difference ----------------------------------------------------------

def long_vs_lp(data, start):
    cfg = EstimateConfig(kind="long", horizons=(0, 0))
    out = outcome_series(data)
    inst = make_instrument(data, "long", window=(start, start + 1))
    ls = build_long_sample(data.panel, data.exports, inst, out, _controls(data, out, cfg), start, start + 1)
    return ls


def test_long_difference_equals_lp_on_two_period_window(small_sim):
    data = small_sim.data
    start = 2010
    ls = long_vs_lp(data, start)
    lr = long_difference(ls).rows[0]
    lp_sample = prepare_sample(data, EstimateConfig(horizons=(0, 0)))
    keep = lp_sample.periods == start + 1
    sub = type(lp_sample)(
        lp_sample.regions[keep], lp_sample.periods[keep], lp_sample.endog[keep], lp_sample.instrument[keep],
        lp_sample.controls[keep], lp_sample.control_names, lp_sample.cluster_ids[keep],
        {0: lp_sample.outcomes[0][keep]},
    )
    lp = local_projection_irf(sub)
    assert lr["beta"] == pytest.approx(lp.beta[0], abs=1e-10)
    assert lr["se"] == pytest.approx(lp.se[0], abs=1e-10)
    assert lr["n"] == lp.n_obs[0]


def test_within_transform_equals_dummies():
    rng = np.random.default_rng(2)
    g = np.repeat(["a", "b", "c"], 7)
    x = rng.normal(size=21)
    w = rng.normal(size=21)
    y = 0.8 * x + (g == "b") * 2.0 - (g == "c") + rng.normal(size=21) * 0.1
    D = (g[:, None] == np.array(["a", "b", "c"])[None, :]).astype(float)
    dummy = ols(y, np.column_stack([x, w, D]), names=("x", "w", "a", "b", "c"))
    yt, xt, wt = within_transform(g, y, x, w)
    within = ols(yt, np.column_stack([xt, wt]), extra_df=3)
    np.testing.assert_allclose(within.params, dummy.params[:2], atol=1e-8)
    np.testing.assert_allclose(within.vcov, dummy.vcov[:2, :2], atol=1e-8)


def test_long_difference_fixed_effects_drop_singletons(small_sim):
    data = small_sim.data
    from shiftshare.pipeline import prepare_long_sample

    ls = prepare_long_sample(data, 2004, 2024, EstimateConfig(kind="long"))
    regions = sorted(set(ls.regions))
    groups = {r: f"s{i % 5}" for i, r in enumerate(regions)}
    groups[regions[0]] = "lonely"
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        res = long_difference(ls, fixed_effects=groups)
    assert any("lonely" in str(w.message) for w in rec)
    row = res.rows[0]
    assert row["fe_flag"] == "Y" and row["n"] == len(regions) - 1
    assert set(res.to_frame().columns) == {"outcome", "slice", "fe_flag", "beta", "se", "f_stat", "n"}


# binscatter ---------------------------------------------------------------

def test_binscatter_exact_line():
    x = np.linspace(-1, 1, 50)
    b = binscatter(x, 2 * x, n_bins=5)
    assert b.slope == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(b.y_mean, 2 * b.x_mean, atol=1e-12)
    assert b.count.sum() == 50 and b.count.max() - b.count.min() <= 1


def test_binscatter_monotone():
    rng = np.random.default_rng(0)
    x = rng.normal(size=97)
    b = binscatter(x, np.exp(x), n_bins=7)
    assert (np.diff(b.x_mean) > 0).all() and (np.diff(b.y_mean) > 0).all()


def test_binscatter_too_few_observations():
    with pytest.raises(ValueError):
        binscatter(np.arange(3.0), np.arange(3.0), n_bins=5)
    with pytest.raises(ValueError):
        binscatter(np.arange(3.0), np.arange(3.0), n_bins=1)


def test_binscatter_slope_equals_full_regression_with_controls():
    rng = np.random.default_rng(4)
    n = 300
    w = rng.normal(size=(n, 2))
    x = rng.normal(size=n) + w[:, 0]
    y = 1.5 * x + w @ [1, -1] + rng.normal(size=n)
    b = binscatter(x, y, 10, controls=w)
    r = ols(y, np.column_stack([np.ones(n), x, w]))
    assert b.slope == pytest.approx(r.params[1], abs=1e-12)
    # the residualized scatter shares that slope
    xb = np.array(b.x_mean)
    assert np.polyfit(xb, b.y_mean, 1)[0] == pytest.approx(b.slope, rel=0.1)
