"""Fitting, tuning and evaluation of the four curve forecasting methods.

The methods differ in how components are extracted and how the score
VAR is estimated:

========  ==========================  =========
name      components                  estimator
========  ==========================  =========
FPCA      classical, static           OLS
RFPCA     robust, static              OLS
MLTS      robust, dynamic (long-run)  MLTS
RMLTS     robust, dynamic (long-run)  RMLTS
========  ==========================  =========
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.special import expit, logit
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_curves
from .core import FunctionalTimeSeries, Grid
from .fpca import K_CEILING, PrincipalDecomposition, fpca, project_scores
from .mcs import msfe, summary_statistics
from .robust_fpca import integrated_errors, l1_median, outlier_weights, rapca
from .simulate import ContaminationSpec, FarSpec, contaminate, simulate_far1
from .var import IdentifiabilityError, VarFit, forecast_scores, max_feasible_order, select_order

log = logging.getLogger(__name__)

FPCA_KINDS = ("classical", "dynamic", "robust", "robust-dynamic")

TUNABLE_BOUNDS = {
    "n_components": (1, K_CEILING),
    "lam": (0.5, 10.0),
    "alpha": (0.01, 0.5),
    "delta": (0.001, 0.2),
}


@dataclass(frozen=True)
class MethodSpec:
    """A component extractor paired with a score estimator and its tunables."""

    name: str
    fpca: str = "classical"
    estimator: str = "ols"
    n_components: int = 3
    lam: float = 3.0
    alpha: float = 0.25
    delta: float = 0.01

    def __post_init__(self):
        if self.fpca not in FPCA_KINDS:
            raise ValueError(f"fpca kind must be one of {FPCA_KINDS}, got {self.fpca!r}")
        if self.estimator not in ("ols", "mlts", "rmlts"):
            raise ValueError(f"estimator must be ols, mlts or rmlts, got {self.estimator!r}")

    @property
    def robust(self) -> bool:
        return self.fpca.startswith("robust")

    @property
    def covariance(self) -> str:
        return "long-run" if self.fpca in ("dynamic", "robust-dynamic") else "static"

    @property
    def tunables(self) -> Tuple[str, ...]:
        names = ["n_components"]
        if self.robust:
            names.append("lam")
        if self.estimator in ("mlts", "rmlts"):
            names.append("alpha")
        if self.estimator == "rmlts":
            names.append("delta")
        return tuple(names)

    def params(self) -> Dict[str, float]:
        return {k: getattr(self, k) for k in self.tunables}


DEFAULT_METHODS = (
    MethodSpec("FPCA", "classical", "ols"),
    MethodSpec("RFPCA", "robust", "ols"),
    MethodSpec("MLTS", "robust-dynamic", "mlts"),
    MethodSpec("RMLTS", "robust-dynamic", "rmlts"),
)


@dataclass
class FittedModel:
    decomposition: PrincipalDecomposition
    var: VarFit
    n_flagged_curves: int = 0

    @property
    def order(self) -> int:
        return self.var.order

    def forecast_next(self, history) -> np.ndarray:
        """One-step forecast curve given the actual curves observed so far."""
        d = self.decomposition
        history = np.atleast_2d(history)[-self.order :]
        scores = project_scores(history - d.mean.values, d.components, d.grid)
        beta = forecast_scores(self.var, scores, 1)[0]
        return d.mean.values + beta @ d.components


class FitCache:
    """Memo of the expensive stages for repeated fits on the same training data.

    Keys always start with the training length, so one cache may be shared
    by an expanding-window loop and by several methods on the same series.
    """

    def __init__(self):
        self.rapca = {}
        self.decomp = {}
        self.mlts = {}

    def clear(self):
        self.rapca.clear()
        self.decomp.clear()
        self.mlts.clear()


def _decompose(X: FunctionalTimeSeries, spec: MethodSpec, K: int, lam: float, kernel: str,
               bandwidth: Optional[float], cache: Optional[FitCache]):
    n = X.n_curves
    if not spec.robust:
        key = (n, spec.covariance, K)
        if cache is not None and key in cache.decomp:
            return cache.decomp[key], np.ones(n)
        d = fpca(X, K, spec.covariance, kernel, bandwidth)
        if cache is not None:
            cache.decomp[key] = d
        return d, np.ones(n)
    rkey = (n, K)
    if cache is not None and rkey in cache.rapca:
        v = cache.rapca[rkey]
    else:
        center0 = l1_median(X.values, X.grid)
        Xc = X.values - center0
        init = rapca(Xc, K, X.grid)
        v = integrated_errors(Xc, init.components, init.scores, X.grid)
        if cache is not None:
            cache.rapca[rkey] = v
    w = outlier_weights(v, lam).w
    if w.sum() < K + 1:
        raise ValueError(f"only {int(w.sum())} curves survive the outlier screen for K={K}")
    key = (n, spec.covariance, K, w.tobytes())
    if cache is not None and key in cache.decomp:
        return cache.decomp[key], w
    d = fpca(X, K, spec.covariance, kernel, bandwidth, weights=w)
    if cache is not None:
        cache.decomp[key] = d
    return d, w


def fit_model(X: FunctionalTimeSeries, spec: MethodSpec, params: Optional[dict] = None, *, max_order: int = 3,
              kernel: str = "bartlett", bandwidth: Optional[float] = None, n_starts: int = 500,
              random_state: Optional[int] = 0, cache: Optional[FitCache] = None) -> FittedModel:
    """Fit components and the score VAR with order chosen by the criterion."""
    p = spec.params()
    p.update(params or {})
    K = int(p.get("n_components", spec.n_components))
    lam = float(p.get("lam", spec.lam))
    alpha = float(p.get("alpha", spec.alpha)) if spec.estimator != "ols" else 0.0
    delta = float(p.get("delta", spec.delta)) if spec.estimator == "rmlts" else spec.delta
    decomp, w = _decompose(X, spec, K, lam, kernel, bandwidth, cache)
    scores = decomp.scores
    scale = max(1.0, float(np.max(np.abs(X.values))))
    if not np.any(np.abs(scores) > 1e-12 * scale):
        # no variation around the mean: the mean is the forecast
        fit = VarFit(spec.estimator, 1, np.zeros((K + 1, K)), np.zeros((K, K)))
        return FittedModel(decomp, fit, int(np.sum(w == 0)))
    ev = decomp.eigenvalues
    if ev[K - 1] <= 1e-10 * ev[0]:
        raise ValueError(f"component {K} has numerically zero variance; the data have rank below {K}")
    top = max_feasible_order(scores.shape[0], K, max_order, alpha)
    if top < 1:
        raise IdentifiabilityError(f"{scores.shape[0]} curves are too few for a VAR in {K} components")
    mcache = None
    if cache is not None and spec.estimator != "ols":
        mcache = cache.mlts.setdefault((X.n_curves, spec.covariance, K, w.tobytes()), {})
    kw = {"n_starts": n_starts} if spec.estimator != "ols" else {}
    _, fit = select_order(scores, top, spec.estimator, alpha, delta, random_state=random_state, cache=mcache,
                          **kw)
    return FittedModel(decomp, fit, int(np.sum(w == 0)))


def one_step_forecasts(model: FittedModel, values: np.ndarray, start: int) -> np.ndarray:
    """Forecasts of rows ``start..`` of ``values``, each from the actual rows before it."""
    return np.array([model.forecast_next(values[:i]) for i in range(start, values.shape[0])])


class FunctionalForecaster(BaseEstimator):
    """Principal-component regression forecaster for curve time series.

    Parameters
    ----------
    fpca : {"classical", "dynamic", "robust", "robust-dynamic"}, default="robust-dynamic"
    estimator : {"ols", "mlts", "rmlts"}, default="rmlts"
    n_components : int, default=3
    lam : float, default=3.0
    alpha : float, default=0.25
    delta : float, default=0.01
    max_order : int, default=3
    kernel : str, default="bartlett"
    bandwidth : float, optional
    n_starts : int, default=500
    grid : array-like, optional
    random_state : int, default=0

    Attributes
    ----------
    model_ : FittedModel
    order_ : int
    """

    def __init__(self, fpca="robust-dynamic", estimator="rmlts", n_components=3, lam=3.0, alpha=0.25, delta=0.01,
                 max_order=3, kernel="bartlett", bandwidth=None, n_starts=500, grid=None, random_state=0):
        self.fpca = fpca
        self.estimator = estimator
        self.n_components = n_components
        self.lam = lam
        self.alpha = alpha
        self.delta = delta
        self.max_order = max_order
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.n_starts = n_starts
        self.grid = grid
        self.random_state = random_state

    def _spec(self):
        return MethodSpec("custom", self.fpca, self.estimator, self.n_components, self.lam, self.alpha, self.delta)

    def fit(self, X, y=None):
        X = check_curves(X, min_curves=3)
        grid = Grid.uniform(X.shape[1]) if self.grid is None else Grid(self.grid)
        series = FunctionalTimeSeries(grid, X)
        self.model_ = fit_model(series, self._spec(), max_order=self.max_order, kernel=self.kernel,
                                bandwidth=self.bandwidth, n_starts=self.n_starts, random_state=self.random_state)
        self.order_ = self.model_.order
        self.history_ = X[-self.order_ :].copy()
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, horizon=1, X_history=None):
        """Forecast ``horizon`` curves after ``X_history`` (default: the training tail)."""
        check_is_fitted(self, "model_")
        d = self.model_.decomposition
        hist = self.history_ if X_history is None else check_curves(X_history)
        scores = project_scores(hist[-self.order_ :] - d.mean.values, d.components, d.grid)
        beta = forecast_scores(self.model_.var, scores, horizon)
        return d.mean.values + beta @ d.components

    def score(self, X, y=None):
        """Negative one-step MSFE over ``X`` following the training curves."""
        check_is_fitted(self, "model_")
        X = check_curves(X)
        full = np.vstack([self.history_, X])
        preds = one_step_forecasts(self.model_, full, self.history_.shape[0])
        return -msfe(preds, X)


# tuning ------------------------------------------------------------------------------------------


def _encode(name, value, lo, hi):
    if name == "n_components":
        return float(logit(np.clip(value / K_CEILING, 1e-6, 1 - 1e-6)))
    if name == "lam":
        return math.log(value)
    u = (value - lo) / (hi - lo)
    return float(logit(np.clip(u, 1e-6, 1 - 1e-6)))


def _decode(name, theta, lo, hi):
    if name == "n_components":
        return int(np.clip(round(K_CEILING * float(expit(theta))), lo, hi))
    if name == "lam":
        return float(np.clip(math.exp(np.clip(theta, -50, 50)), lo, hi))
    return float(lo + (hi - lo) * expit(theta))


@dataclass
class TuneResult:
    params: Dict[str, float]
    objective: float
    n_evaluations: int
    budget_exhausted: bool = False
    history: List[Tuple[Dict[str, float], float]] = field(default_factory=list, repr=False)


def validation_msfe(spec: MethodSpec, params: dict, train: FunctionalTimeSeries,
                    validation: FunctionalTimeSeries, mode: str = "fixed", cache: Optional[FitCache] = None,
                    **fit_kwargs) -> float:
    """Average one-step MSFE over the validation curves.

    ``mode="fixed"`` fits once on ``train``; ``"expanding"`` refits before
    every validation curve on all curves preceding it.
    """
    values = np.vstack([train.values, validation.values])
    n0 = train.n_curves
    if mode == "fixed":
        model = fit_model(train, spec, params, cache=cache, **fit_kwargs)
        preds = one_step_forecasts(model, values, n0)
    elif mode == "expanding":
        preds = []
        for i in range(n0, values.shape[0]):
            model = fit_model(FunctionalTimeSeries(train.grid, values[:i]), spec, params, cache=cache, **fit_kwargs)
            preds.append(model.forecast_next(values[:i]))
        preds = np.array(preds)
    else:
        raise ValueError(f"mode must be 'fixed' or 'expanding', got {mode!r}")
    return msfe(preds, validation.values)


def initial_components(X: FunctionalTimeSeries, share: float = 0.9, k_max: int = K_CEILING) -> int:
    """Smallest K whose static eigenvalues explain ``share`` of the variance."""
    Xc = X.values - X.values.mean(axis=0)
    sw = np.sqrt(X.grid.weights)
    s = np.linalg.svd(Xc * sw, compute_uv=False) ** 2
    if s.sum() <= 0:
        return 1
    K = int(np.searchsorted(np.cumsum(s) / s.sum(), share) + 1)
    return int(np.clip(K, 1, k_max))


def tune(spec: MethodSpec, train: FunctionalTimeSeries, validation: FunctionalTimeSeries, *,
         bounds: Optional[dict] = None, start: Optional[dict] = None, max_evals: int = 200, restarts: int = 3,
         mode: str = "fixed", seed: int = 0, cache: Optional[FitCache] = None, **fit_kwargs) -> TuneResult:
    """Minimise validation MSFE over the method's tunables with Nelder-Mead.

    Parameters are optimised on an unconstrained scale: K through
    ``logit(K / 50)`` (rounded back to an integer), lambda through its
    log, alpha and delta through a logit of their position inside the
    bounds. A parameter whose bounds collapse to a point is held fixed.
    Infeasible settings score ``inf``. The best point seen is returned,
    with ``budget_exhausted`` set when the evaluation budget ran out.
    """
    if validation.n_curves < 1:
        raise ValueError("validation set is empty")
    rng = np.random.default_rng(seed)
    cache = FitCache() if cache is None else cache
    k_max = min(K_CEILING, train.grid.size, train.n_curves - 1)
    b = {k: TUNABLE_BOUNDS[k] for k in spec.tunables}
    b["n_components"] = (1, k_max)
    for k, v in (bounds or {}).items():
        if k in b:
            b[k] = (v[0], v[1])
    free = [k for k in spec.tunables if b[k][0] != b[k][1]]
    fixed = {k: b[k][0] for k in spec.tunables if b[k][0] == b[k][1]}
    if "n_components" in fixed:
        fixed["n_components"] = int(fixed["n_components"])

    x0 = dict(spec.params())
    x0["n_components"] = min(initial_components(train, k_max=k_max), k_max)
    x0.update(start or {})
    for k in free:
        lo, hi = b[k]
        x0[k] = float(np.clip(x0[k], lo, hi))

    memo: Dict[tuple, float] = {}
    history: List[Tuple[Dict[str, float], float]] = []
    best = {"params": None, "value": math.inf}
    count = {"n": 0}

    def decode(theta):
        p = dict(fixed)
        for name, t in zip(free, theta):
            p[name] = _decode(name, t, *b[name])
        return p

    def evaluate(p):
        key = tuple(round(p[k], 10) if isinstance(p[k], float) else p[k] for k in spec.tunables)
        if key in memo:
            return memo[key]
        count["n"] += 1
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                val = validation_msfe(spec, p, train, validation, mode, cache, **fit_kwargs)
        except (ValueError, np.linalg.LinAlgError) as exc:
            log.debug("infeasible %s: %s", p, exc)
            val = math.inf
        if not np.isfinite(val):
            val = math.inf
        memo[key] = val
        history.append((dict(p), val))
        if val < best["value"] or best["params"] is None:
            best["params"], best["value"] = dict(p), val
        return val

    def objective(theta):
        if count["n"] >= max_evals:
            raise _BudgetExhausted
        return evaluate(decode(theta))

    if not free:
        evaluate(fixed)
        return TuneResult(best["params"], best["value"], count["n"], False, history)

    theta0 = np.array([_encode(k, x0[k], *b[k]) for k in free])
    steps = np.array([0.6 if k == "n_components" else 0.7 for k in free])
    exhausted = False
    for r in range(restarts):
        if r == 0:
            start_theta = theta0
        else:
            base = np.array([_encode(k, best["params"][k], *b[k]) for k in free]) if best["params"] else theta0
            start_theta = base + rng.normal(0.0, 0.75, size=base.size)
        simplex = np.vstack([start_theta] + [start_theta + np.eye(len(free))[j] * steps[j] for j in range(len(free))])
        try:
            # inf vertices make the simplex arithmetic warn; they are expected for infeasible points
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                optimize.minimize(objective, start_theta, method="Nelder-Mead",
                                  options={"initial_simplex": simplex, "xatol": 1e-3, "fatol": 1e-10,
                                           "maxfev": max_evals})
        except _BudgetExhausted:
            exhausted = True
            break
    if exhausted:
        log.warning("tuning budget of %d evaluations exhausted for %s", max_evals, spec.name)
    return TuneResult(best["params"], best["value"], count["n"], exhausted, history)


class _BudgetExhausted(Exception):
    pass


# evaluation --------------------------------------------------------------------------------------


@dataclass(frozen=True)
class EvaluationPlan:
    """Contiguous train / validation / test split of a curve series (0-based, half open)."""

    n_train: int
    n_validation: int
    n_test: int
    horizon: int = 1

    def __post_init__(self):
        if self.n_train < 3 or self.n_validation < 1 or self.n_test < 1:
            raise ValueError("plan needs at least 3 training, 1 validation and 1 test curve")
        if self.horizon != 1:
            raise ValueError("experiment runners evaluate one-step-ahead forecasts only")

    @property
    def n_total(self) -> int:
        return self.n_train + self.n_validation + self.n_test

    @property
    def test_start(self) -> int:
        return self.n_train + self.n_validation

    @classmethod
    def ozone(cls, n: int = 82) -> "EvaluationPlan":
        """Days 1..n-57 train, n-56..n-33 validation, n-32..n test."""
        return cls(n - 57, 24, 33)


@dataclass
class WindowResult:
    losses: np.ndarray
    forecasts: np.ndarray
    orders: List[Optional[int]]
    diagnostics: List[str]
    n_flagged: List[Optional[int]]


def run_expanding_window(spec: MethodSpec, params: dict, plan: EvaluationPlan, data: FunctionalTimeSeries,
                         cache: Optional[FitCache] = None, **fit_kwargs) -> WindowResult:
    """Refit on all curves before each test curve and score the one-step forecast.

    A failed fit leaves a NaN loss and a diagnostic message for that step.
    """
    if data.n_curves < plan.n_total:
        raise ValueError(f"plan needs {plan.n_total} curves, data has {data.n_curves}")
    values = data.values[: plan.n_total]
    p = data.grid.size
    losses = np.full(plan.n_test, np.nan)
    forecasts = np.full((plan.n_test, p), np.nan)
    orders, diags, flagged = [], [], []
    for j, i in enumerate(range(plan.test_start, plan.n_total)):
        try:
            model = fit_model(FunctionalTimeSeries(data.grid, values[:i]), spec, params, cache=cache, **fit_kwargs)
            forecasts[j] = model.forecast_next(values[:i])
            losses[j] = msfe(forecasts[j], values[i])
            orders.append(model.order)
            flagged.append(model.n_flagged_curves)
        except (ValueError, np.linalg.LinAlgError) as exc:
            diags.append(f"step {i}: {type(exc).__name__}: {exc}")
            orders.append(None)
            flagged.append(None)
    return WindowResult(losses, forecasts, orders, diags, flagged)


def evaluate_methods(data: FunctionalTimeSeries, plan: EvaluationPlan, methods: Sequence[MethodSpec] = DEFAULT_METHODS,
                     *, max_evals: int = 200, tune_mode: str = "expanding", seed: int = 0, tune_params: bool = True,
                     threads: int = 1, **fit_kwargs) -> dict:
    """Tune each method on the validation window, then run the expanding test window.

    With ``tune_params=False`` the method's own parameter values are used.
    """
    train = data[: plan.n_train]
    validation = data[plan.n_train : plan.test_start]
    shared = FitCache()

    def run(spec):
        cache = shared if threads <= 1 else FitCache()
        t0 = time.perf_counter()
        tuned = None
        params = spec.params()
        if tune_params:
            tuned = tune(spec, train, validation, max_evals=max_evals, mode=tune_mode, seed=seed, cache=cache,
                         **fit_kwargs)
            if tuned.params is not None:
                params = tuned.params
        result = run_expanding_window(spec, params, plan, data, cache=cache, **fit_kwargs)
        return {"tuned": tuned, "params": params, "window": result, "seconds": time.perf_counter() - t0}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, methods))
    else:
        results = [run(spec) for spec in methods]
    return {spec.name: r for spec, r in zip(methods, results)}


# simulation study --------------------------------------------------------------------------------


@dataclass
class SimulationConfig:
    far: FarSpec = field(default_factory=FarSpec)
    contamination: Tuple[float, ...] = (0.0, 0.1)
    magnitude: float = 8.0
    shape: str = "constant-shift"
    n_train: int = 60
    n_validation: int = 60
    replications: int = 100
    max_evals: int = 200
    max_order: int = 3
    n_starts: int = 500
    seed: int = 0
    threads: int = 1


def _replicate(config: SimulationConfig, methods: Sequence[MethodSpec], rep: int, seed_seq) -> List[dict]:
    sim_seed, *cont_seeds = seed_seq.spawn(1 + len(config.contamination))
    clean = simulate_far1(config.far, np.random.default_rng(sim_seed))
    fit_start = config.n_train + config.n_validation
    rows = []
    for rate, cseed in zip(config.contamination, cont_seeds):
        cspec = ContaminationSpec(rate, config.magnitude, config.shape, config.far.n_basis)
        dirty, idx = contaminate(clean, cspec, np.random.default_rng(cseed))
        train = dirty[: config.n_train]
        validation = dirty[config.n_train : fit_start]
        fit_kwargs = {"max_order": config.max_order, "n_starts": config.n_starts,
                      "random_state": int(cseed.generate_state(1)[0])}
        cache = FitCache()
        for spec in methods:
            t0 = time.perf_counter()
            try:
                tuned = tune(spec, train, validation, max_evals=config.max_evals, mode="fixed",
                             seed=rep, cache=cache, **fit_kwargs)
                params = tuned.params if tuned.params is not None else spec.params()
                model = fit_model(dirty[:fit_start], spec, params, **fit_kwargs)
                preds = one_step_forecasts(model, dirty.values, fit_start)
                row = {
                    "replication": rep,
                    "contamination": rate,
                    "method": spec.name,
                    "msfe_contaminated": msfe(preds, dirty.values[fit_start:]),
                    "msfe_clean": msfe(preds, clean.values[fit_start:]),
                    "order": model.order,
                    "flagged_curves": model.n_flagged_curves,
                    "n_outliers": int(idx.size),
                    "seconds": time.perf_counter() - t0,
                    **{f"param_{k}": v for k, v in params.items()},
                    # per-curve losses for model confidence sets; not written to the CSV tables
                    "step_losses": np.mean((preds - dirty.values[fit_start:]) ** 2, axis=1),
                }
            except (ValueError, np.linalg.LinAlgError) as exc:
                log.warning("replication %d, rate %.2f, method %s skipped: %s", rep, rate, spec.name, exc)
                continue
            rows.append(row)
    return rows


def run_simulation_study(config: SimulationConfig, methods: Sequence[MethodSpec] = DEFAULT_METHODS) -> dict:
    """Replicate the FAR(1) forecasting experiment and summarise the MSFEs.

    Every replication simulates one clean series and reuses it for each
    contamination rate, so rates are compared on paired data.

    Returns
    -------
    dict with ``rows`` (one dict per replication x rate x method) and
    ``summary`` (one dict per rate x method x evaluation target).
    """
    if config.replications < 1:
        raise ValueError("replications must be >= 1")
    seqs = np.random.SeedSequence(config.seed).spawn(config.replications)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            parts = list(pool.map(lambda a: _replicate(config, methods, *a), enumerate(seqs)))
    else:
        parts = [_replicate(config, methods, rep, ss) for rep, ss in enumerate(seqs)]
    rows = [r for part in parts for r in part]
    return {"rows": rows, "summary": summarize(rows, methods, config.contamination)}


def summarize(rows: List[dict], methods: Sequence[MethodSpec], rates: Sequence[float]) -> List[dict]:
    summary = []
    for rate in rates:
        for spec in methods:
            for target in ("contaminated", "clean"):
                vals = sorted(r[f"msfe_{target}"] for r in rows if r["contamination"] == rate and r["method"] == spec.name)
                stats = summary_statistics(vals)
                summary.append({"contamination": rate, "method": spec.name, "target": target, "n": len(vals), **stats})
    return summary
