"""Linear estimation core.

OLS and just-identified 2SLS on dense arrays, CR1 cluster-robust and HC1
covariance, first-stage diagnostics, local-projection impulse responses,
long-difference cross sections and binned scatter summaries.
"""

from __future__ import annotations

import warnings
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import (
    EmptySampleError,
    EstimationError,
    RankDeficiencyError,
    WeakInstrumentError,
)

__all__ = [
    "BinscatterResult",
    "IrfResult",
    "LongRunResult",
    "RegressionResult",
    "binscatter",
    "cluster_vcov",
    "first_stage_f",
    "local_projection_irf",
    "long_difference",
    "ols",
    "robust_vcov",
    "tsls",
    "within_transform",
]

RANK_TOL = 1e-10
WEAK_T_TOL = 1e-6
Z_95 = 1.96
COV_TYPES = ("classical", "robust", "cluster")


@dataclass(frozen=True)
class RegressionResult:
    """Fitted linear model.

    ``vcov`` is the covariance used for reporting (``cov_type``);
    ``vcov_classical`` is always the homoskedastic one so both F conventions
    can be quoted.
    """

    params: np.ndarray
    vcov: np.ndarray
    vcov_classical: np.ndarray
    resid: np.ndarray
    nobs: int
    n_clusters: int | None
    r_squared: float
    names: tuple[str, ...]
    cov_type: str
    first_stage: RegressionResult | None = None

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov), 0.0, None))

    @property
    def tstats(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.params / self.se

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no coefficient named {name!r}; have {self.names}") from None

    def coef(self, name: str) -> float:
        return float(self.params[self.index(name)])

    def stderr(self, name: str) -> float:
        return float(self.se[self.index(name)])

    def tstat(self, name: str) -> float:
        return float(self.tstats[self.index(name)])


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _column_names(names, k: int) -> tuple[str, ...]:
    if names is None:
        return tuple(f"x{i}" for i in range(k))
    names = tuple(str(n) for n in names)
    if len(names) != k:
        raise ValueError(f"{len(names)} names for {k} columns")
    return names


def _svd_solve(X: np.ndarray, y: np.ndarray, names: tuple[str, ...]):
    """Least squares through the thin SVD; returns (beta, (X'X)^-1)."""
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise RankDeficiencyError("design matrix is identically zero", names)
    small = s / s[0] < RANK_TOL
    if small.any():
        null = Vt[small]
        load = np.abs(null).max(axis=0)
        bad = [names[j] for j in np.flatnonzero(load > 1e-6)]
        raise RankDeficiencyError(
            f"design matrix is rank deficient (relative singular value < {RANK_TOL:g}); "
            f"collinear columns: {', '.join(bad)}",
            bad,
        )
    beta = Vt.T @ ((U.T @ y) / s)
    bread = (Vt.T / s**2) @ Vt
    return beta, bread


def _symmetrize(V: np.ndarray) -> np.ndarray:
    return 0.5 * (V + V.T)


def robust_vcov(X, resid, bread=None, extra_df: int = 0) -> np.ndarray:
    """HC1 heteroskedasticity-robust covariance, scaled by N / (N - K)."""
    X = _as_2d(X)
    resid = np.asarray(resid, dtype=float)
    n, k = X.shape
    if bread is None:
        bread = np.linalg.pinv(X.T @ X)
    scores = X * resid[:, None]
    meat = scores.T @ scores
    dof = n - k - extra_df
    if dof <= 0:
        raise EstimationError(f"no residual degrees of freedom (N={n}, K={k + extra_df})")
    return _symmetrize(n / dof * (bread @ meat @ bread))


def cluster_vcov(X, resid, cluster_ids, bread=None, extra_df: int = 0) -> np.ndarray:
    """CR1 cluster-robust sandwich covariance.

    Parameters
    ----------
    X : ndarray
        nobs by k matrix whose rows form the scores (the projected design
        for 2SLS).
    resid : ndarray
        Residuals entering the scores.
    cluster_ids : array_like
        One label per observation.
    bread : ndarray, optional
        ``(X'X)^{-1}``; computed when omitted.
    extra_df : int
        Absorbed parameters (e.g. fixed effects) counted in K.

    Notes
    -----
    .. math::

        \\frac{G}{G-1}\\frac{N-1}{N-K} (X'X)^{-1}
        \\left(\\sum_g X_g' u_g u_g' X_g\\right) (X'X)^{-1}
    """
    X = _as_2d(X)
    resid = np.asarray(resid, dtype=float)
    n, k = X.shape
    labels, inv = np.unique(np.asarray(cluster_ids), return_inverse=True)
    g = labels.size
    if g < 2:
        raise EstimationError(f"clustered covariance needs at least 2 clusters, got {g}")
    if bread is None:
        bread = np.linalg.pinv(X.T @ X)
    scores = X * resid[:, None]
    summed = np.zeros((g, k))
    np.add.at(summed, inv.ravel(), scores)
    meat = summed.T @ summed
    kk = k + extra_df
    if n - kk <= 0:
        raise EstimationError(f"no residual degrees of freedom (N={n}, K={kk})")
    factor = g / (g - 1) * (n - 1) / (n - kk)
    return _symmetrize(factor * (bread @ meat @ bread))


def _classical_vcov(resid, bread, n, k, extra_df=0):
    dof = n - k - extra_df
    if dof <= 0:
        raise EstimationError(f"no residual degrees of freedom (N={n}, K={k + extra_df})")
    return _symmetrize(float(resid @ resid) / dof * bread)


def _resolve_cov(cov_type, cluster_ids):
    if cov_type is None:
        cov_type = "classical" if cluster_ids is None else "cluster"
    if cov_type not in COV_TYPES:
        raise ValueError(f"cov_type must be one of {COV_TYPES}, got {cov_type!r}")
    if cov_type == "cluster" and cluster_ids is None:
        raise ValueError("cov_type='cluster' requires cluster_ids")
    return cov_type


def _vcov(cov_type, Xs, resid, bread, cluster_ids, extra_df):
    n, k = Xs.shape
    classical = _classical_vcov(resid, bread, n, k, extra_df)
    if cov_type == "classical":
        return classical, classical
    if cov_type == "robust":
        return robust_vcov(Xs, resid, bread, extra_df), classical
    return cluster_vcov(Xs, resid, cluster_ids, bread, extra_df), classical


def _r_squared(y, resid, has_const):
    centre = y.mean() if has_const else 0.0
    tss = float(((y - centre) ** 2).sum())
    if tss == 0.0:
        return float("nan")
    return 1.0 - float(resid @ resid) / tss


def _has_const(X):
    return bool(np.any(np.all(X == X[:1], axis=0) & (X[0] != 0))) if len(X) else False


def ols(y, X, cluster_ids=None, names=None, cov_type=None, extra_df: int = 0) -> RegressionResult:
    """Ordinary least squares.

    ``X`` must already contain the intercept column if one is wanted.
    ``cov_type`` defaults to ``"cluster"`` when ``cluster_ids`` is given and
    ``"classical"`` otherwise.
    """
    y = np.asarray(y, dtype=float).ravel()
    X = _as_2d(X)
    n, k = X.shape
    if y.shape[0] != n:
        raise ValueError(f"y has {y.shape[0]} rows, X has {n}")
    names = _column_names(names, k)
    if n <= k + extra_df:
        raise EstimationError(f"need more observations than columns (N={n}, K={k + extra_df})")
    if not (np.isfinite(y).all() and np.isfinite(X).all()):
        raise EstimationError("non-finite values in regression inputs")
    cov_type = _resolve_cov(cov_type, cluster_ids)
    beta, bread = _svd_solve(X, y, names)
    resid = y - X @ beta
    vcov, classical = _vcov(cov_type, X, resid, bread, cluster_ids, extra_df)
    n_clusters = None if cluster_ids is None else int(np.unique(np.asarray(cluster_ids)).size)
    return RegressionResult(
        params=beta,
        vcov=vcov,
        vcov_classical=classical,
        resid=resid,
        nobs=n,
        n_clusters=n_clusters,
        r_squared=_r_squared(y, resid, _has_const(X)),
        names=names,
        cov_type=cov_type,
    )


def tsls(
    y,
    endog,
    instrument,
    controls=None,
    cluster_ids=None,
    cov_type=None,
    add_const: bool = True,
    extra_df: int = 0,
    endog_name: str = "endog",
    instrument_name: str = "instrument",
    control_names: Sequence[str] | None = None,
) -> RegressionResult:
    """Just-identified two-stage least squares.

    Parameters
    ----------
    y : array_like
        Dependent variable.
    endog : array_like
        The single endogenous regressor.
    instrument : array_like
        The single excluded instrument.
    controls : array_like, optional
        Exogenous controls (intercept added separately when ``add_const``).
    cluster_ids : array_like, optional
        Cluster labels for CR1 inference.
    cov_type : {"classical", "robust", "cluster"}, optional
        Reporting covariance, shared by both stages.

    Returns
    -------
    RegressionResult
        Coefficients ordered ``const`` (if any), ``endog_name``, controls.
        Covariance uses structural residuals ``y - X b`` evaluated at the
        observed endogenous regressor; ``first_stage`` holds the first-stage
        fit.

    Raises
    ------
    WeakInstrumentError
        When the first-stage instrument t-statistic is below 1e-6 in
        absolute value.
    """
    y = np.asarray(y, dtype=float).ravel()
    endog = np.asarray(endog, dtype=float).ravel()
    instrument = np.asarray(instrument, dtype=float).ravel()
    n = y.shape[0]
    if endog.shape[0] != n or instrument.shape[0] != n:
        raise ValueError("y, endog and instrument must have the same length")
    if controls is None:
        W = np.empty((n, 0))
    else:
        W = _as_2d(controls)
        if W.shape[0] != n:
            raise ValueError("controls must have one row per observation")
    if control_names is None:
        control_names = tuple(f"control{i}" for i in range(W.shape[1]))
    control_names = tuple(control_names)
    if add_const:
        W = np.column_stack([np.ones(n), W])
        exog_names = ("const",) + control_names
    else:
        exog_names = control_names
    cov_type = _resolve_cov(cov_type, cluster_ids)

    Zmat = np.column_stack([W[:, :1], instrument, W[:, 1:]]) if add_const else np.column_stack([instrument, W])
    z_names = (exog_names[:1] + (instrument_name,) + exog_names[1:]) if add_const else ((instrument_name,) + exog_names)
    first = ols(endog, Zmat, cluster_ids, names=z_names, cov_type=cov_type, extra_df=extra_df)
    t_inst = first.tstat(instrument_name)
    if not np.isfinite(t_inst) and not np.isinf(t_inst):
        raise WeakInstrumentError("first-stage instrument t-statistic is undefined")
    if abs(t_inst) < WEAK_T_TOL:
        raise WeakInstrumentError(
            f"first-stage instrument t-statistic {t_inst:.3g} is indistinguishable from zero"
        )

    fitted = endog - first.resid
    if add_const:
        Xhat = np.column_stack([W[:, :1], fitted, W[:, 1:]])
        X = np.column_stack([W[:, :1], endog, W[:, 1:]])
        names = exog_names[:1] + (endog_name,) + exog_names[1:]
    else:
        Xhat = np.column_stack([fitted, W])
        X = np.column_stack([endog, W])
        names = (endog_name,) + exog_names
    beta, bread = _svd_solve(Xhat, y, names)
    resid = y - X @ beta
    vcov, classical = _vcov(cov_type, Xhat, resid, bread, cluster_ids, extra_df)
    return RegressionResult(
        params=beta,
        vcov=vcov,
        vcov_classical=classical,
        resid=resid,
        nobs=n,
        n_clusters=first.n_clusters,
        r_squared=_r_squared(y, resid, add_const),
        names=names,
        cov_type=cov_type,
        first_stage=first,
    )


def first_stage_f(first_stage: RegressionResult, column: str = "instrument", classical: bool = False) -> float:
    """Squared t-statistic of the excluded instrument.

    With ``classical=True`` the homoskedastic covariance is used instead of
    the reporting one.
    """
    i = first_stage.index(column)
    V = first_stage.vcov_classical if classical else first_stage.vcov
    var = V[i, i]
    b = first_stage.params[i]
    if var <= 0.0:
        return float("inf") if b != 0.0 else float("nan")
    return float(b * b / var)


@dataclass(frozen=True)
class IrfResult:
    horizons: np.ndarray
    beta: np.ndarray
    se: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n_obs: np.ndarray
    n_clusters: np.ndarray
    first_stage_f: np.ndarray
    first_stage_f_classical: np.ndarray
    metadata: dict = field(default_factory=dict)

    CSV_COLUMNS = ("horizon", "beta", "se", "ci_lo", "ci_hi", "n_obs", "first_stage_F")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "horizon": self.horizons,
                "beta": self.beta,
                "se": self.se,
                "ci_lo": self.ci_lo,
                "ci_hi": self.ci_hi,
                "n_obs": self.n_obs,
                "first_stage_F": self.first_stage_f,
            }
        )

    def at(self, h: int) -> dict:
        i = int(np.flatnonzero(self.horizons == h)[0])
        return {
            "beta": float(self.beta[i]),
            "se": float(self.se[i]),
            "ci_lo": float(self.ci_lo[i]),
            "ci_hi": float(self.ci_hi[i]),
            "n_obs": int(self.n_obs[i]),
            "first_stage_F": float(self.first_stage_f[i]),
        }

    def rows(self):
        for i, h in enumerate(self.horizons):
            yield (
                int(h),
                float(self.beta[i]),
                float(self.se[i]),
                float(self.ci_lo[i]),
                float(self.ci_hi[i]),
                int(self.n_obs[i]),
                float(self.first_stage_f[i]),
            )


def _fit_horizon(sample, h, cov_type, estimator, period_effects=False):
    y, endog, inst, W, clusters = sample.frame(h)
    if y.size == 0:
        raise EmptySampleError(f"empty estimation sample at horizon {h}", horizon=h)
    add_const, extra_df = True, 0
    if period_effects:
        periods = sample.periods[sample.mask(h)]
        y, endog, inst, W = within_transform(periods, y, endog, inst, W)
        add_const, extra_df = False, int(np.unique(periods).size)
    if estimator == "ols":
        cols = ([np.ones(y.size)] if add_const else []) + [endog, W]
        names = (("const",) if add_const else ()) + ("endog",) + tuple(sample.control_names)
        return ols(y, np.column_stack(cols), clusters, names=names, cov_type=cov_type, extra_df=extra_df)
    return tsls(
        y, endog, inst, W, clusters, cov_type=cov_type, add_const=add_const, extra_df=extra_df,
        control_names=sample.control_names,
    )


def local_projection_irf(
    sample,
    horizons: Sequence[int] | None = None,
    cov_type: str = "cluster",
    estimator: str = "tsls",
    threads: int = 1,
    period_effects: bool = False,
) -> IrfResult:
    """One regression per horizon on a fixed right-hand side.

    ``sample`` is an :class:`~shiftshare.panel.EstimationSample`; horizons
    default to every horizon it carries and must be contiguous. Negative
    horizons regress pre-period outcome changes on the instrumented export
    growth (balance tests). ``estimator="ols"`` runs the uninstrumented
    comparison. First-stage F is reported under the same covariance as the
    coefficients; the classical F rides along.

    With ``period_effects`` every variable is demeaned by base period,
    replacing the single intercept with one per period. A pooled intercept
    over a short panel lets the period means of the instrument and of
    future export growth co-move by chance, which pulls long-horizon
    estimates down by roughly ``beta / T`` per horizon step.
    """
    if estimator not in ("tsls", "ols"):
        raise ValueError("estimator must be 'tsls' or 'ols'")
    hs = sorted(sample.horizons if horizons is None else horizons)
    if not hs:
        raise ValueError("no horizons requested")
    if hs != list(range(hs[0], hs[-1] + 1)):
        raise ValueError(f"horizons must be contiguous, got {hs}")
    missing = [h for h in hs if h not in sample.outcomes]
    if missing:
        raise EmptySampleError(f"sample has no outcome at horizon {missing[0]}", horizon=missing[0])
    cov_type = cov_type if sample.cluster_ids is not None else "robust"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(lambda h: _fit_horizon(sample, h, cov_type, estimator, period_effects), hs))
    else:
        fits = [_fit_horizon(sample, h, cov_type, estimator, period_effects) for h in hs]

    beta = np.array([f.coef("endog") for f in fits])
    se = np.array([f.stderr("endog") for f in fits])
    if estimator == "tsls":
        fs = np.array([first_stage_f(f.first_stage, "instrument") for f in fits])
        fs_c = np.array([first_stage_f(f.first_stage, "instrument", classical=True) for f in fits])
    else:
        fs = fs_c = np.full(len(fits), np.nan)
    meta = dict(sample.metadata)
    meta.update(
        estimator=estimator, cov_type=cov_type, controls=list(sample.control_names), period_effects=period_effects
    )
    return IrfResult(
        horizons=np.array(hs),
        beta=beta,
        se=se,
        ci_lo=beta - Z_95 * se,
        ci_hi=beta + Z_95 * se,
        n_obs=np.array([f.nobs for f in fits]),
        n_clusters=np.array([f.n_clusters or 0 for f in fits]),
        first_stage_f=fs,
        first_stage_f_classical=fs_c,
        metadata=meta,
    )


def within_transform(groups, *arrays):
    """Demean each array by group. Returns the transformed arrays in order."""
    labels, inv = np.unique(np.asarray(groups), return_inverse=True)
    inv = inv.ravel()
    counts = np.bincount(inv, minlength=labels.size).astype(float)
    out = []
    for a in arrays:
        a2 = _as_2d(a)
        sums = np.zeros((labels.size, a2.shape[1]))
        np.add.at(sums, inv, a2)
        d = a2 - (sums / counts[:, None])[inv]
        out.append(d.ravel() if np.ndim(a) == 1 else d)
    return out


@dataclass(frozen=True)
class LongRunResult:
    """Rows of a long-run elasticity table."""

    rows: tuple[dict, ...]

    CSV_COLUMNS = ("outcome", "slice", "fe_flag", "beta", "se", "f_stat", "n")

    @classmethod
    def combine(cls, results: Sequence[LongRunResult]) -> LongRunResult:
        return cls(tuple(r for res in results for r in res.rows))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.rows), columns=list(self.CSV_COLUMNS))

    def row(self, outcome: str, slice: str = "formal", fe_flag: bool = False) -> dict:
        for r in self.rows:
            if r["outcome"] == outcome and r["slice"] == slice and r["fe_flag"] == ("Y" if fe_flag else "N"):
                return r
        raise KeyError((outcome, slice, fe_flag))


def long_difference(
    sample,
    horizon: int | None = None,
    fixed_effects: Mapping[str, str] | None = None,
    outcome: str = "employment",
    slice: str = "formal",
    cov_type: str = "cluster",
) -> LongRunResult:
    """Cross-sectional 2SLS over a single long window.

    ``sample`` carries one observation per region (see
    :func:`shiftshare.panel.build_long_sample`). ``fixed_effects`` maps
    region id to a group (e.g. state); groups are absorbed by demeaning
    every variable, and groups holding a single region are dropped with a
    warning.
    """
    if horizon is None:
        if len(sample.horizons) != 1:
            raise ValueError("sample carries several horizons; pass one explicitly")
        horizon = sample.horizons[0]
    y, endog, inst, W, clusters = sample.frame(horizon)
    if y.size == 0:
        raise EmptySampleError(f"empty long-difference sample at horizon {horizon}", horizon=horizon)
    regions = sample.regions[sample.mask(horizon)]
    cov = cov_type if clusters is not None else "robust"
    if fixed_effects is None:
        res = tsls(y, endog, inst, W, clusters, cov_type=cov, control_names=sample.control_names)
        fe_flag = "N"
    else:
        groups = np.array([fixed_effects.get(r) for r in regions], dtype=object)
        if any(g is None for g in groups):
            missing = sorted({r for r, g in zip(regions, groups) if g is None})
            raise EstimationError(f"regions without a fixed-effect group: {missing[:10]}")
        groups = groups.astype(str)
        labels, counts = np.unique(groups, return_counts=True)
        single = set(labels[counts < 2])
        if single:
            warnings.warn(
                f"dropping {len(single)} fixed-effect group(s) with a single region: {sorted(single)}",
                stacklevel=2,
            )
        keep = ~np.isin(groups, list(single))
        y, endog, inst, W, groups = y[keep], endog[keep], inst[keep], W[keep], groups[keep]
        clusters = None if clusters is None else clusters[keep]
        n_groups = np.unique(groups).size
        y, endog, inst, W = within_transform(groups, y, endog, inst, W)
        res = tsls(
            y,
            endog,
            inst,
            W,
            clusters,
            cov_type=cov,
            add_const=False,
            extra_df=n_groups,
            control_names=sample.control_names,
        )
        fe_flag = "Y"
    row = {
        "outcome": outcome,
        "slice": slice,
        "fe_flag": fe_flag,
        "beta": res.coef("endog"),
        "se": res.stderr("endog"),
        "f_stat": first_stage_f(res.first_stage, "instrument"),
        "n": res.nobs,
    }
    return LongRunResult((row,))


@dataclass(frozen=True)
class BinscatterResult:
    x_mean: np.ndarray
    y_mean: np.ndarray
    count: np.ndarray
    slope: float
    tstat: float
    nobs: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "bin": np.arange(1, self.count.size + 1),
                "x_mean": self.x_mean,
                "y_mean": self.y_mean,
                "count": self.count,
            }
        )


def binscatter(x, y, n_bins: int = 20, controls=None, cluster_ids=None, cov_type=None) -> BinscatterResult:
    """Equal-count binned means of (x, y) with the slope of the unbinned fit.

    With ``controls``, both variables are residualized on the controls and
    an intercept and the sample means added back, so the binned picture
    shares its slope with the full regression.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = x.size
    if y.size != n:
        raise ValueError("x and y must have the same length")
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    if n < n_bins:
        raise ValueError(f"need at least as many observations as bins (N={n}, bins={n_bins})")

    if controls is None:
        X = np.column_stack([np.ones(n), x])
        names = ("const", "x")
        xb, yb = x, y
    else:
        W = np.column_stack([np.ones(n), _as_2d(controls)])
        X = np.column_stack([W[:, :1], x, W[:, 1:]])
        names = ("const", "x") + tuple(f"control{i}" for i in range(W.shape[1] - 1))
        bx, _ = _svd_solve(W, x, tuple(f"w{i}" for i in range(W.shape[1])))
        by, _ = _svd_solve(W, y, tuple(f"w{i}" for i in range(W.shape[1])))
        xb = x - W @ bx + x.mean()
        yb = y - W @ by + y.mean()
    fit = ols(y, X, cluster_ids, names=names, cov_type=cov_type)

    order = np.argsort(xb, kind="mergesort")
    chunks = np.array_split(order, n_bins)
    return BinscatterResult(
        x_mean=np.array([xb[c].mean() for c in chunks]),
        y_mean=np.array([yb[c].mean() for c in chunks]),
        count=np.array([c.size for c in chunks]),
        slope=fit.coef("x"),
        tstat=fit.tstat("x"),
        nobs=n,
    )
