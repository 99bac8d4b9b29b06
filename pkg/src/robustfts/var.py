"""Vector autoregression on principal component scores.

Three estimators share one design: ordinary least squares, multivariate
least trimmed squares (MLTS) and its one-step reweighted version (RMLTS).
MLTS looks for the ``h``-row subset whose least-squares residual
covariance has the smallest determinant; it is computed with
concentration steps from many random elemental starts.
"""

from __future__ import annotations

import copy
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import special, stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_random_state

ESTIMATORS = ("ols", "mlts", "rmlts")


class SingularDesignError(np.linalg.LinAlgError, ValueError):
    """The lagged design matrix does not have full column rank."""


class IdentifiabilityError(ValueError):
    """Too few observations kept to identify the regression."""


class SingularCovarianceError(np.linalg.LinAlgError, ValueError):
    """A residual covariance matrix is not positive definite."""


def chi2_cdf(x, df):
    """Chi-square CDF as the regularised lower incomplete gamma function."""
    x = np.asarray(x, dtype=np.float64)
    return special.gammainc(df / 2.0, np.maximum(x, 0.0) / 2.0)


def chi2_upper_quantile(df, level):
    """Point with upper tail probability ``level`` (``inf`` for level 0)."""
    if level <= 0:
        return math.inf
    return float(stats.chi2.ppf(1.0 - level, df))


def consistency_factor(dim: int, level: float) -> float:
    """``(1 - level) / F_{chi2, dim+2}(chi2_{dim, 1-level})``; equals 1 at level 0."""
    if level <= 0:
        return 1.0
    qa = chi2_upper_quantile(dim, level)
    return (1.0 - level) / float(chi2_cdf(qa, dim + 2))


@dataclass(frozen=True, eq=False)
class VarDesign:
    """Stacked regression ``Y = X B + A`` for a VAR of the given order.

    Row ``r`` of ``X`` is ``(1, beta[order + r - 1], ..., beta[r])`` and
    row ``r`` of ``Y`` is ``beta[order + r]`` (0-based indices).
    """

    order: int
    X: np.ndarray
    Y: np.ndarray

    @property
    def n_components(self) -> int:
        return self.Y.shape[1]

    @property
    def q(self) -> int:
        return self.X.shape[1]

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]


def build_design(scores, order: int) -> VarDesign:
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = scores[:, None]
    n, K = scores.shape
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if n <= order:
        raise ValueError(f"need more than {order} score rows for a VAR({order}), got {n}")
    lags = [scores[order - j : n - j] for j in range(1, order + 1)]
    X = np.hstack([np.ones((n - order, 1))] + lags)
    return VarDesign(order, X, scores[order:].copy())


def subset_dof(m: int, K: int, order: int) -> int:
    """Residual degrees of freedom ``m - (K+1)*order - 1`` for ``m`` kept rows."""
    return m - (K + 1) * order - 1


@dataclass(eq=False)
class VarFit:
    """Estimated coefficients (q x K) and residual covariance (K x K)."""

    estimator: str
    order: int
    coef: np.ndarray
    sigma: np.ndarray
    subset: Optional[np.ndarray] = None
    alpha: Optional[float] = None
    delta: Optional[float] = None
    consistency: float = 1.0
    bic: Optional[float] = None
    det_trace: List[List[float]] = field(default_factory=list, repr=False)

    @property
    def intercept(self) -> np.ndarray:
        return self.coef[0]

    @property
    def lag_matrices(self) -> np.ndarray:
        """Coefficient matrices ``B_1..B_order`` acting as ``beta_t = B_j @ beta_{t-j}``."""
        K = self.coef.shape[1]
        return np.stack([self.coef[1 + j * K : 1 + (j + 1) * K].T for j in range(self.order)])

    def flagged(self, n_rows: int) -> np.ndarray:
        """Rows outside the kept subset (empty for OLS)."""
        if self.subset is None:
            return np.array([], dtype=int)
        return np.setdiff1d(np.arange(n_rows), self.subset)


def _offending_column(X):
    for j in range(1, X.shape[1] + 1):
        if np.linalg.matrix_rank(X[:, :j]) < j:
            return j - 1
    return None


def _ols(X, Y):
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        col = _offending_column(X)
        raise SingularDesignError(
            f"design matrix has rank {rank} < q={X.shape[1]}; column {col} is collinear with earlier columns"
        )
    B, *_ = np.linalg.lstsq(X, Y, rcond=None)
    return B


def ols_fit(d: VarDesign) -> VarFit:
    B = _ols(d.X, d.Y)
    A = d.Y - d.X @ B
    dof = d.n_rows - d.q
    if dof <= 0:
        raise IdentifiabilityError(f"no residual degrees of freedom ({d.n_rows} rows, q={d.q})")
    sigma = A.T @ A / dof
    return VarFit("ols", d.order, B, (sigma + sigma.T) / 2.0)


def trimmed_size(n_rows: int, alpha: float) -> int:
    # guard against 0.75 * 8 = 6.000000000000001 rounding up
    return min(n_rows, int(math.ceil((1.0 - alpha) * n_rows - 1e-9)))


def _batched_coef(X, Y, W, exact=False):
    Xw = W[:, :, None] * X[None]
    XtX = np.swapaxes(Xw, 1, 2) @ X
    XtY = np.swapaxes(Xw, 1, 2) @ Y
    if not exact:
        return np.linalg.pinv(XtX, hermitian=True) @ XtY
    try:
        return np.linalg.solve(XtX, XtY)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(XtX, hermitian=True) @ XtY


def _batched_state(X, Y, W, dof, exact=True):
    """Coefficients, residuals, residual covariances and log-dets for row masks ``W``."""
    B = _batched_coef(X, Y, W, exact)
    R = Y[None] - X[None] @ B
    S = np.swapaxes(R * W[:, :, None], 1, 2) @ R / dof
    S = (S + np.swapaxes(S, 1, 2)) / 2.0
    sign, logdet = np.linalg.slogdet(S)
    logdet = np.where(sign > 0, logdet, -np.inf)
    return B, R, S, logdet


def _batched_sq_distances(R, S):
    K = S.shape[-1]
    tr = np.trace(S, axis1=1, axis2=2)
    eig_min = np.linalg.eigvalsh(S)[:, 0]
    ridge = np.where(eig_min <= 1e-10 * tr / K, 1e-10 * tr / K, 0.0)
    ridge = np.where(tr > 0, ridge, 1e-300)
    Sd = S + ridge[:, None, None] * np.eye(K)
    P = np.linalg.inv(Sd)
    return np.einsum("smk,skl,sml->sm", R, P, R)


def _concentrate(d2, h):
    idx = np.argsort(d2, axis=1, kind="stable")[:, :h]
    W = np.zeros_like(d2)
    np.put_along_axis(W, idx, 1.0, axis=1)
    return W


def mlts_fit(d: VarDesign, alpha: float = 0.25, n_starts: int = 500, n_keep: int = 10,
             n_initial_steps: int = 2, max_iter: int = 100, tol: float = 1e-12, random_state=None) -> VarFit:
    """Multivariate least trimmed squares by concentration steps.

    Each start fits an elemental subset of ``q + K`` random rows, takes two
    concentration steps, and the ``n_keep`` lowest-determinant candidates
    are iterated until the log-determinant changes by less than ``tol``.
    ``det_trace`` on the result holds the log-determinant path of every
    fully iterated candidate.
    """
    if not 0.0 <= alpha <= 0.5:
        raise ValueError(f"alpha must lie in [0, 0.5], got {alpha}")
    m, q, K = d.n_rows, d.q, d.n_components
    h = trimmed_size(m, alpha)
    dof = subset_dof(h, K, d.order)
    if h <= q or dof <= 0:
        raise IdentifiabilityError(
            f"trimmed subset of {h} rows cannot identify q={q} coefficients (residual dof {dof})"
        )
    c_alpha = consistency_factor(K, alpha)
    X, Y = d.X, d.Y
    if h == m:
        B = _ols(X, Y)
        A = Y - X @ B
        sigma = A.T @ A / dof
        return VarFit("mlts", d.order, B, c_alpha * (sigma + sigma.T) / 2.0, np.arange(m), alpha,
                      consistency=c_alpha)

    rng = check_random_state(random_state)
    s0 = min(m, q + K)
    W = np.zeros((n_starts, m))
    for s in range(n_starts):
        W[s, rng.choice(m, size=s0, replace=False)] = 1.0
    # elemental fits: residual covariance is only used to rank distances
    B, R, S, _ = _batched_state(X, Y, W, max(s0 - q, 1), exact=False)
    for _ in range(n_initial_steps):
        W = _concentrate(_batched_sq_distances(R, S), h)
        B, R, S, logdet = _batched_state(X, Y, W, dof)

    order = np.argsort(logdet, kind="stable")[: min(n_keep, n_starts)]
    W = W[order]
    B, R, S, logdet = B[order], R[order], S[order], logdet[order]
    traces = [[float(v)] for v in logdet]
    active = np.ones(len(order), dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        Wn = _concentrate(_batched_sq_distances(R[active], S[active]), h)
        Bn, Rn, Sn, ldn = _batched_state(X, Y, Wn, dof)
        idx = np.flatnonzero(active)
        for j, i in enumerate(idx):
            old = logdet[i]
            traces[i].append(float(ldn[j]))
            same = np.array_equal(Wn[j], W[i])
            W[i], B[i], R[i], S[i], logdet[i] = Wn[j], Bn[j], Rn[j], Sn[j], ldn[j]
            if same or not np.isfinite(old) or abs(old - ldn[j]) < tol:
                active[i] = False

    best = int(np.argmin(logdet))
    subset = np.flatnonzero(W[best] > 0)
    B = _ols(X[subset], Y[subset])
    A = Y[subset] - X[subset] @ B
    sigma = A.T @ A / dof
    sigma = (sigma + sigma.T) / 2.0
    return VarFit("mlts", d.order, B, c_alpha * sigma, subset, alpha, consistency=c_alpha,
                  det_trace=traces)


def squared_distances(d: VarDesign, coef, sigma) -> np.ndarray:
    """Squared residual Mahalanobis distances of every design row."""
    R = d.Y - d.X @ coef
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        K = sigma.shape[0]
        tr = np.trace(sigma)
        L = np.linalg.cholesky(sigma + (1e-10 * tr / K if tr > 0 else 1e-300) * np.eye(K))
    Z = np.linalg.solve(L, R.T)
    return np.sum(Z**2, axis=0)


def rmlts_fit(d: VarDesign, alpha: float = 0.25, delta: float = 0.01, random_state=None,
              initial: Optional[VarFit] = None, **mlts_kwargs) -> VarFit:
    """One-step reweighted MLTS.

    Rows whose squared distance under the MLTS fit exceeds the upper
    ``delta`` chi-square quantile (K degrees of freedom) are flagged as
    outliers; the rest are refitted by least squares. A precomputed MLTS
    fit on the same design can be passed as ``initial``.
    """
    if not 0.0 <= delta < 0.5:
        raise ValueError(f"delta must lie in [0, 0.5), got {delta}")
    init = initial if initial is not None else mlts_fit(d, alpha, random_state=random_state, **mlts_kwargs)
    K = d.n_components
    d2 = squared_distances(d, init.coef, init.sigma)
    J = np.flatnonzero(d2 <= chi2_upper_quantile(K, delta))
    m = J.size
    dof = subset_dof(m, K, d.order)
    if m <= d.q or dof <= 0:
        raise IdentifiabilityError(f"reweighting kept {m} rows, too few for q={d.q} (residual dof {dof})")
    B = _ols(d.X[J], d.Y[J])
    A = d.Y[J] - d.X[J] @ B
    c_delta = consistency_factor(K, delta)
    sigma = A.T @ A / dof
    return VarFit("rmlts", d.order, B, c_delta * (sigma + sigma.T) / 2.0, J, alpha, delta, c_delta,
                  det_trace=init.det_trace)


def fit_var(d: VarDesign, estimator: str = "ols", alpha: float = 0.25, delta: float = 0.01,
            random_state=None, cache: Optional[dict] = None, **mlts_kwargs) -> VarFit:
    """Dispatch on ``estimator``.

    ``cache`` maps ``(order, trimmed size)`` to MLTS fits of this exact
    score matrix, so repeated calls with nearby ``alpha``/``delta`` skip
    the concentration search.
    """
    if estimator == "ols":
        return ols_fit(d)
    if estimator not in ("mlts", "rmlts"):
        raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
    init = None
    if cache is not None:
        key = (d.order, trimmed_size(d.n_rows, alpha))
        init = cache.get(key)
        if init is None:
            init = cache[key] = mlts_fit(d, alpha, random_state=random_state, **mlts_kwargs)
    if estimator == "mlts":
        return init if init is not None else mlts_fit(d, alpha, random_state=random_state, **mlts_kwargs)
    return rmlts_fit(d, alpha, delta, random_state=random_state, initial=init, **mlts_kwargs)


def bic(d: VarDesign, fit: VarFit) -> float:
    """Gaussian information criterion per effective observation.

    The quadratic form runs over all design rows with the fit's own
    residual covariance (robust or not).
    """
    sigma = fit.sigma
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0 or not np.isfinite(logdet):
        raise SingularCovarianceError("residual covariance is singular; criterion undefined")
    U = d.Y - d.X @ fit.coef
    m, K, q = d.n_rows, d.n_components, d.q
    quad = np.trace(np.linalg.solve(sigma, U.T @ U))
    return float(logdet + K * math.log(2.0 * math.pi) + quad / m + math.log(m) * K * q / m)


def max_feasible_order(n: int, K: int, max_order: int, alpha: float = 0.0) -> int:
    """Largest order <= ``max_order`` whose (trimmed) fit has positive residual dof."""
    best = 0
    for order in range(1, max_order + 1):
        rows = n - order
        if rows <= 0:
            break
        h = trimmed_size(rows, alpha)
        q = K * order + 1
        if h > q and subset_dof(h, K, order) > 0 and rows - q > 0:
            best = order
    return best


def select_order(scores, max_order: int, estimator: str = "ols", alpha: float = 0.25, delta: float = 0.01,
                 random_state=None, cache: Optional[dict] = None, **mlts_kwargs):
    """Fit orders ``1..max_order`` and keep the smallest criterion (ties to the lower order).

    Returns
    -------
    order : int
    fit : VarFit
        The chosen fit, with its criterion stored in ``fit.bic``.
    """
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = scores[:, None]
    best_fit, best_val = None, math.inf
    seed_seq = np.random.SeedSequence(random_state if isinstance(random_state, (int, np.integer)) else None)
    seeds = seed_seq.spawn(max_order)
    for order, ss in zip(range(1, max_order + 1), seeds):
        d = build_design(scores, order)
        rs = random_state if isinstance(random_state, np.random.Generator) else np.random.default_rng(ss)
        fit = fit_var(d, estimator, alpha, delta, random_state=rs, cache=cache, **mlts_kwargs)
        if cache is not None and fit.estimator == "mlts":
            # cached objects are shared; never stamp a criterion on them
            fit = copy.copy(fit)
        fit.bic = bic(d, fit)
        if fit.bic < best_val:
            best_fit, best_val = fit, fit.bic
    if best_fit is None:
        raise SingularCovarianceError("no order produced a finite criterion")
    return best_fit.order, best_fit


def forecast_scores(fit: VarFit, history, horizon: int = 1) -> np.ndarray:
    """Iterated forecasts; ``history`` holds at least ``order`` rows, newest last."""
    history = np.atleast_2d(np.asarray(history, dtype=np.float64))
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if history.shape[0] < fit.order:
        raise ValueError(f"need {fit.order} history rows, got {history.shape[0]}")
    buf = list(history[-fit.order :])
    out = np.empty((horizon, fit.coef.shape[1]))
    for j in range(horizon):
        x = np.concatenate([[1.0]] + [buf[-i] for i in range(1, fit.order + 1)])
        out[j] = x @ fit.coef
        buf.append(out[j])
    return out


def forecast_curves(mean, components, score_forecasts) -> np.ndarray:
    """Curves ``mean + scores @ components`` for each forecast row."""
    mean = np.asarray(getattr(mean, "values", mean), dtype=np.float64)
    score_forecasts = np.atleast_2d(np.asarray(score_forecasts, dtype=np.float64))
    components = np.atleast_2d(np.asarray(components, dtype=np.float64))
    if score_forecasts.shape[1] != components.shape[0]:
        raise ValueError(
            f"{score_forecasts.shape[1]} forecast scores for {components.shape[0]} components"
        )
    return mean + score_forecasts @ components


class VectorAutoregression(BaseEstimator):
    """VAR on a score matrix with OLS, MLTS or RMLTS estimation.

    Parameters
    ----------
    estimator : {"ols", "mlts", "rmlts"}, default="ols"
    order : int, optional
        Fixed lag order. ``None`` selects it by the information criterion
        over ``1..max_order``.
    max_order : int, default=3
    alpha : float, default=0.25
        Trimming fraction of the MLTS step.
    delta : float, default=0.01
        Upper-tail level of the reweighting cut-off.
    n_starts : int, default=500
    random_state : int or Generator, optional
    """

    def __init__(self, estimator="ols", order=None, max_order=3, alpha=0.25, delta=0.01, n_starts=500,
                 random_state=None):
        self.estimator = estimator
        self.order = order
        self.max_order = max_order
        self.alpha = alpha
        self.delta = delta
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, scores, y=None):
        scores = np.asarray(scores, dtype=np.float64)
        if scores.ndim == 1:
            scores = scores[:, None]
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores contain NaN or infinite values")
        kw = {} if self.estimator == "ols" else {"n_starts": self.n_starts}
        if self.order is None:
            max_order = max_feasible_order(scores.shape[0], scores.shape[1], self.max_order,
                                           self.alpha if self.estimator != "ols" else 0.0)
            if max_order < 1:
                raise IdentifiabilityError(
                    f"{scores.shape[0]} score rows are too few for a VAR in {scores.shape[1]} components"
                )
            if max_order < self.max_order:
                warnings.warn(f"max_order reduced to {max_order} by sample size", RuntimeWarning)
            self.order_, self.fit_ = select_order(scores, max_order, self.estimator, self.alpha, self.delta,
                                                  self.random_state, **kw)
        else:
            d = build_design(scores, self.order)
            self.fit_ = fit_var(d, self.estimator, self.alpha, self.delta, random_state=self.random_state, **kw)
            self.fit_.bic = bic(d, self.fit_)
            self.order_ = self.order
        self.coef_ = self.fit_.coef
        self.sigma_ = self.fit_.sigma
        self.history_ = scores[-self.order_ :].copy()
        return self

    def predict(self, horizon=1, history=None):
        check_is_fitted(self, "coef_")
        history = self.history_ if history is None else history
        return forecast_scores(self.fit_, history, horizon)
