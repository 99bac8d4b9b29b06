"""Projection-pursuit robust functional PCA.

Initial components come from RAPCA: each direction maximises a Qn-type
dispersion of the projected scores over the (deflated) data directions,
and the data are then reflected into the orthogonal complement with a
Householder step. Curves that the initial fit reconstructs badly are
given zero weight and the final decomposition is recomputed from the
remaining curves.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_curves
from .core import FunctionalTimeSeries, Grid, GridMismatchError
from .fpca import PrincipalDecomposition, fpca, project_scores

QN_CONSTANT = 2.2219

_SMALL_SAMPLE_FACTORS = {2: 0.399, 3: 0.994, 4: 0.512, 5: 0.844, 6: 0.611, 7: 0.857, 8: 0.669, 9: 0.872}


def correction_factor(n: int) -> float:
    """Small-sample correction ``c_n`` for the Qn-type dispersion."""
    if n < 2:
        raise ValueError(f"correction factor needs n >= 2, got {n}")
    if n in _SMALL_SAMPLE_FACTORS:
        return _SMALL_SAMPLE_FACTORS[n]
    return n / (n + 1.4) if n % 2 == 1 else n / (n + 3.8)


def qn_order(n: int) -> int:
    """1-based order statistic used by the dispersion: C(floor(n/2)+1, 2)."""
    return comb(n // 2 + 1, 2)


def qn_dispersion(x, axis: int = -1):
    """Qn-type scale: scaled first-quartile-like order statistic of |x_i - x_j|.

    With a 2-D input the dispersion is computed along ``axis`` for every
    slice, which is how candidate directions are scored in bulk.
    """
    x = np.asarray(x, dtype=np.float64)
    x = np.moveaxis(np.atleast_1d(x), axis, -1)
    n = x.shape[-1]
    if n < 2:
        raise ValueError(f"dispersion needs at least 2 values, got {n}")
    iu, ju = np.triu_indices(n, k=1)
    diffs = np.abs(x[..., iu] - x[..., ju])
    k = qn_order(n) - 1
    stat = np.partition(diffs, k, axis=-1)[..., k]
    out = QN_CONSTANT * correction_factor(n) * stat
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class RapcaResult:
    components: np.ndarray
    scores: np.ndarray
    dispersions: np.ndarray


def _to_l2(values, grid):
    return values * np.sqrt(grid.weights)


def rapca(Xc, n_components: int, grid: Optional[Grid] = None) -> RapcaResult:
    """Reflection-based projection-pursuit PCA on centred curves.

    Candidate directions at each step are the normalised rows of the
    current deflated data; the one with the largest dispersion of
    projected scores wins, lowest index on ties.
    """
    if isinstance(Xc, FunctionalTimeSeries):
        grid = Xc.grid
        values = Xc.values
    else:
        values = np.atleast_2d(np.asarray(Xc, dtype=np.float64))
        grid = Grid.uniform(values.shape[1]) if grid is None else grid
    n, p = values.shape
    if values.shape[1] != grid.size:
        raise GridMismatchError("curves do not match the grid")
    if not 1 <= n_components <= min(n - 1, p):
        raise ValueError(f"n_components must lie in [1, {min(n - 1, p)}], got {n_components}")

    Z = _to_l2(values, grid)
    # work in the span of the data: Q maps reduced coordinates back to R^p
    _, s, Vt = np.linalg.svd(Z, full_matrices=False)
    rank = int(np.sum(s > s[0] * 1e-12)) if s.size and s[0] > 0 else 0
    if rank < n_components:
        # pad with arbitrary orthonormal directions so that K components always exist
        _, _, Vt_full = np.linalg.svd(np.vstack([Z, np.eye(p)[: n_components]]), full_matrices=True)
        Q = Vt_full[: max(rank, n_components)].T
    else:
        Q = Vt[:rank].T
    Y = Z @ Q

    directions = np.zeros((n_components, p))
    scores = np.zeros((n, n_components))
    disp = np.zeros(n_components)
    for k in range(n_components):
        d = Y.shape[1]
        norms = np.linalg.norm(Y, axis=1)
        cand = norms > 1e-12 * max(norms.max(), 1e-300)
        if np.any(cand):
            A = Y[cand] / norms[cand, None]
            spreads = qn_dispersion(Y @ A.T, axis=0)
            a = A[int(np.argmax(spreads))]
        else:
            a = np.zeros(d)
            a[0] = 1.0
        # Householder reflection taking a onto the first axis
        e1 = np.zeros(d)
        e1[0] = 1.0
        u = a - e1
        unorm = np.dot(u, u)
        if unorm > 1e-30:
            H = np.eye(d) - 2.0 * np.outer(u, u) / unorm
        else:
            H = np.eye(d)
        YH = Y @ H
        QH = Q @ H
        directions[k] = QH[:, 0]
        scores[:, k] = YH[:, 0]
        disp[k] = qn_dispersion(YH[:, 0])
        Y = YH[:, 1:]
        Q = QH[:, 1:]
    components = directions / np.sqrt(grid.weights)
    return RapcaResult(components, scores, disp)


def integrated_errors(Xc, components, scores, grid: Grid) -> np.ndarray:
    """Integrated squared reconstruction error of every curve."""
    values = Xc.values if isinstance(Xc, FunctionalTimeSeries) else np.atleast_2d(np.asarray(Xc, float))
    components = np.asarray(components, dtype=np.float64).reshape(-1, grid.size)
    scores = np.asarray(scores, dtype=np.float64).reshape(values.shape[0], components.shape[0])
    resid = values - scores @ components
    return (resid**2) @ grid.weights


def lower_median(v) -> float:
    v = np.sort(np.asarray(v, dtype=np.float64))
    return float(v[(v.size + 1) // 2 - 1])


@dataclass(frozen=True, eq=False)
class OutlierWeights:
    v: np.ndarray
    s: float
    lam: float
    w: np.ndarray

    @property
    def threshold(self) -> float:
        return _threshold(self.s, self.lam)


def _threshold(s, lam):
    if np.isinf(lam):
        return np.inf
    return s + lam * np.sqrt(s)


def outlier_weights(v, lam: float) -> OutlierWeights:
    """Zero weight for curves with ``v_i >= s + lam * sqrt(s)``, ``s`` the median."""
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    v = np.asarray(v, dtype=np.float64)
    s = lower_median(v)
    thr = _threshold(s, lam)
    w = (v < thr).astype(float)
    if s <= 0:
        # a perfect fit leaves a zero threshold; exactly reconstructed curves are kept
        w = np.maximum(w, (v <= 0).astype(float))
    return OutlierWeights(v, s, float(lam), w)


def l1_median(values, grid: Grid, max_iter: int = 200, tol: float = 1e-10) -> np.ndarray:
    """Spatial median of curves in the L2 metric (Weiszfeld iterations)."""
    m = np.median(values, axis=0)
    for _ in range(max_iter):
        dist = np.sqrt(np.maximum(((values - m) ** 2) @ grid.weights, 0.0))
        if np.any(dist < 1e-12):
            dist = np.maximum(dist, 1e-12)
        inv = 1.0 / dist
        new = inv @ values / inv.sum()
        step = np.sqrt(((new - m) ** 2) @ grid.weights)
        m = new
        if step < tol * (1.0 + np.sqrt((m**2) @ grid.weights)):
            break
    return m


@dataclass(frozen=True, eq=False)
class RobustDecomposition:
    decomposition: PrincipalDecomposition
    initial: RapcaResult
    initial_center: np.ndarray
    outliers: OutlierWeights


def robust_fpca(X: FunctionalTimeSeries, n_components: int, lam: float = 3.0, kind: str = "long-run",
                kernel: str = "bartlett", bandwidth: Optional[float] = None) -> RobustDecomposition:
    """RAPCA screen, outlier weights, then classical FPCA on the kept curves.

    ``kind="long-run"`` gives robust dynamic components; ``"static"``
    recomputes from the variance function instead.
    """
    grid = X.grid
    center0 = l1_median(X.values, grid)
    Xc = X.values - center0
    init = rapca(Xc, n_components, grid)
    v = integrated_errors(Xc, init.components, init.scores, grid)
    ow = outlier_weights(v, lam)
    kept = int(ow.w.sum())
    if kept < n_components + 1:
        raise ValueError(
            f"only {kept} curves survive the outlier screen; need at least {n_components + 1}"
        )
    final = fpca(X, n_components, kind, kernel, bandwidth, weights=ow.w)
    return RobustDecomposition(final, init, center0, ow)


class RobustFunctionalPCA(TransformerMixin, BaseEstimator):
    """Robust functional PCA as a scikit-learn transformer.

    Parameters
    ----------
    n_components : int, default=3
    lam : float, default=3.0
        Robustness tuning; larger values flag fewer outlying curves.
    covariance : {"long-run", "static"}, default="long-run"
    kernel : str, default="bartlett"
    bandwidth : float, optional
    grid : array-like, optional

    Attributes
    ----------
    weights_ : ndarray of shape (n_curves,)
        1 for curves used in the final decomposition, 0 for flagged ones.
    """

    def __init__(self, n_components=3, lam=3.0, covariance="long-run", kernel="bartlett", bandwidth=None,
                 grid=None):
        self.n_components = n_components
        self.lam = lam
        self.covariance = covariance
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.grid = grid

    def fit(self, X, y=None):
        X = check_curves(X, min_curves=3)
        grid = Grid.uniform(X.shape[1]) if self.grid is None else Grid(self.grid)
        result = robust_fpca(FunctionalTimeSeries(grid, X), self.n_components, self.lam, self.covariance,
                             self.kernel, self.bandwidth)
        d = result.decomposition
        self.result_ = result
        self.decomposition_ = d
        self.grid_ = grid
        self.mean_ = d.mean.values
        self.components_ = d.components
        self.eigenvalues_ = d.eigenvalues
        self.weights_ = d.weights
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_curves(X)
        return project_scores(X - self.mean_, self.components_, self.grid_)

    def inverse_transform(self, scores):
        check_is_fitted(self, "components_")
        return self.mean_ + np.atleast_2d(scores) @ self.components_
