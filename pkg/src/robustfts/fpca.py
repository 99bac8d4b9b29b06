"""Functional principal components from a covariance surface."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_curves
from .core import FunctionalTimeSeries, Grid, GridMismatchError, MeanCurve, check_same_grid, mean_curve
from .longrun import CovarianceSurface, KernelSpec, long_run_cov, select_bandwidth, static_cov

K_CEILING = 50


@dataclass(frozen=True, eq=False)
class PrincipalDecomposition:
    """Mean, component curves, eigenvalues, scores and per-curve weights."""

    mean: MeanCurve
    components: np.ndarray
    eigenvalues: np.ndarray
    scores: np.ndarray
    weights: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.mean.grid

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def explained_variance_ratio(self, total: Optional[float] = None) -> np.ndarray:
        """Eigenvalue shares; ``total`` defaults to the retained eigenvalue sum."""
        total = self.eigenvalues.sum() if total is None else total
        if total <= 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / total


def eigen_decompose(C: CovarianceSurface, n_components: int):
    """Leading eigenpairs of the integral operator with kernel ``C``.

    The operator is discretised as ``D^1/2 C D^1/2`` with ``D`` the
    quadrature weights, so the returned curves are orthonormal under the
    quadrature inner product. Each curve's largest-magnitude entry is made
    positive.

    Returns
    -------
    eigenvalues : ndarray of shape (n_components,)
    components : ndarray of shape (n_components, n_points)
    """
    surface = np.asarray(C.surface, dtype=np.float64)
    p = surface.shape[0]
    if not 1 <= n_components <= p:
        raise ValueError(f"n_components must lie in [1, {p}], got {n_components}")
    sqrt_w = np.sqrt(C.grid.weights)
    M = sqrt_w[:, None] * surface * sqrt_w[None, :]
    M = (M + M.T) / 2.0
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(vals)[::-1][:n_components]
    vals = np.clip(vals[order], 0.0, None)
    phi = (vecs[:, order] / sqrt_w[:, None]).T
    # renormalise: eigh is orthonormal in R^p, this maps it exactly to L2
    phi /= np.sqrt((phi**2) @ C.grid.weights)[:, None]
    pivot = np.argmax(np.abs(phi), axis=1)
    signs = np.sign(phi[np.arange(phi.shape[0]), pivot])
    signs[signs == 0] = 1.0
    return vals, phi * signs[:, None]


def project_scores(Xc, components, grid: Grid) -> np.ndarray:
    """Quadrature inner products of each centred curve with each component."""
    values = Xc.values if isinstance(Xc, FunctionalTimeSeries) else np.atleast_2d(np.asarray(Xc, float))
    if isinstance(Xc, FunctionalTimeSeries):
        check_same_grid(Xc.grid, grid)
    components = np.atleast_2d(np.asarray(components, dtype=np.float64))
    if values.shape[1] != grid.size or components.shape[1] != grid.size:
        raise GridMismatchError("curves and components must share the grid")
    return (values * grid.weights) @ components.T


def reconstruct(decomp: PrincipalDecomposition, i: Optional[int] = None, scores=None) -> np.ndarray:
    """Truncated expansion ``mean + scores @ components``.

    Give either a curve index ``i`` into the fitted scores or explicit
    ``scores`` (one row per curve).
    """
    if scores is None:
        if i is None:
            scores = decomp.scores
        else:
            scores = decomp.scores[i]
    scores = np.asarray(scores, dtype=np.float64)
    if decomp.n_components == 0:
        return np.broadcast_to(decomp.mean.values, scores.shape[:-1] + (decomp.grid.size,)).copy()
    return decomp.mean.values + scores @ decomp.components


def covariance_surface(Xc: FunctionalTimeSeries, kind: str = "long-run", kernel: str = "bartlett",
                       bandwidth: Optional[float] = None) -> CovarianceSurface:
    if kind == "static":
        return static_cov(Xc)
    if kind != "long-run":
        raise ValueError(f"covariance kind must be 'static' or 'long-run', got {kind!r}")
    n = Xc.n_curves
    if bandwidth is None:
        # select_bandwidth refuses n < 10; tiny robust subsets still get the cube-root rule
        h = select_bandwidth(Xc) if n >= 10 else n ** (1.0 / 3.0)
    else:
        h = float(bandwidth)
    return long_run_cov(Xc, KernelSpec(kernel, h), clip=True)


def fpca(X: FunctionalTimeSeries, n_components: int, kind: str = "long-run", kernel: str = "bartlett",
         bandwidth: Optional[float] = None, weights=None) -> PrincipalDecomposition:
    """Decompose ``X`` on the covariance of the curves with non-zero weight.

    Scores are returned for every curve, including zero-weight ones.
    """
    n = X.n_curves
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    mu = mean_curve(X, w)
    keep = w > 0
    sub = FunctionalTimeSeries(X.grid, X.values[keep] - mu.values)
    C = covariance_surface(sub, kind, kernel, bandwidth)
    vals, phi = eigen_decompose(C, n_components)
    scores = project_scores(X.values - mu.values, phi, X.grid)
    return PrincipalDecomposition(mu, phi, vals, scores, (w > 0).astype(float))


def select_K_cv(train: FunctionalTimeSeries, validation: FunctionalTimeSeries,
                forecaster: Callable[[np.ndarray, int], np.ndarray], K_max: int,
                rtol: float = 1e-9, return_errors: bool = False):
    """Pick the number of components by one-step holdout forecast error.

    ``forecaster(history, K)`` receives the curves preceding a validation
    curve (as an array) and returns the one-step forecast curve. A
    forecaster that raises is scored as infinite error for that ``K``.
    Errors within ``rtol`` of the minimum count as ties and the smallest
    ``K`` wins.
    """
    if validation.n_curves < 1:
        raise ValueError("validation set is empty")
    if K_max < 1:
        raise ValueError("K_max must be >= 1")
    check_same_grid(train.grid, validation.grid)
    full = np.vstack([train.values, validation.values])
    n0 = train.n_curves
    errors = np.full(K_max, np.inf)
    for K in range(1, K_max + 1):
        sq = 0.0
        try:
            for v in range(validation.n_curves):
                pred = np.asarray(forecaster(full[: n0 + v], K), dtype=np.float64)
                sq += np.sum((validation.values[v] - pred) ** 2)
        except (ValueError, np.linalg.LinAlgError):
            continue
        errors[K - 1] = sq / (validation.grid.size * validation.n_curves)
    best = np.min(errors)
    if not np.isfinite(best):
        raise ValueError("every candidate K failed to produce a forecast")
    K = int(np.flatnonzero(errors <= best * (1 + rtol) + 1e-300)[0]) + 1
    return (K, errors) if return_errors else K


class FunctionalPCA(TransformerMixin, BaseEstimator):
    """Static or dynamic functional PCA as a scikit-learn transformer.

    Parameters
    ----------
    n_components : int, default=3
    covariance : {"long-run", "static"}, default="long-run"
        ``"long-run"`` decomposes the kernel sandwich long-run covariance
        (dynamic FPCA); ``"static"`` uses the lag-0 variance function.
    kernel : {"bartlett", "parzen", "flat-top"}, default="bartlett"
    bandwidth : float, optional
        Lag-window bandwidth; ``None`` uses ``n ** (1/3)``.
    grid : array-like, optional
        Sampling points; defaults to an equispaced grid on [0, 1].

    Attributes
    ----------
    mean_ : ndarray of shape (n_points,)
    components_ : ndarray of shape (n_components, n_points)
    eigenvalues_ : ndarray of shape (n_components,)
    explained_variance_ratio_ : ndarray of shape (n_components,)
        Share of the total eigenvalue mass of the fitted surface.
    decomposition_ : PrincipalDecomposition
    """

    def __init__(self, n_components=3, covariance="long-run", kernel="bartlett", bandwidth=None, grid=None):
        self.n_components = n_components
        self.covariance = covariance
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.grid = grid

    def _grid(self, p):
        return Grid.uniform(p) if self.grid is None else Grid(self.grid)

    def fit(self, X, y=None, sample_weight=None):
        X = check_curves(X, min_curves=2)
        grid = self._grid(X.shape[1])
        series = FunctionalTimeSeries(grid, X)
        self.decomposition_ = fpca(series, self.n_components, self.covariance, self.kernel,
                                   self.bandwidth, sample_weight)
        d = self.decomposition_
        self.grid_ = grid
        self.mean_ = d.mean.values
        self.components_ = d.components
        self.eigenvalues_ = d.eigenvalues
        total = self._total_mass(series, d)
        self.explained_variance_ratio_ = d.explained_variance_ratio(total)
        self.n_features_in_ = X.shape[1]
        return self

    def _total_mass(self, series, d):
        keep = d.weights > 0
        sub = FunctionalTimeSeries(series.grid, series.values[keep] - d.mean.values)
        C = covariance_surface(sub, self.covariance, self.kernel, self.bandwidth)
        sqrt_w = np.sqrt(series.grid.weights)
        return float(np.trace(sqrt_w[:, None] * C.surface * sqrt_w[None, :]))

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = check_curves(X)
        if X.shape[1] != self.n_features_in_:
            raise GridMismatchError(f"expected {self.n_features_in_} grid points, got {X.shape[1]}")
        return project_scores(X - self.mean_, self.components_, self.grid_)

    def inverse_transform(self, scores):
        check_is_fitted(self, "components_")
        return self.mean_ + np.atleast_2d(scores) @ self.components_
