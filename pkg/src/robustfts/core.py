"""Containers and quadrature numerics for curves sampled on a common grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._validation import check_curves


class GridMismatchError(ValueError):
    """Raised when two curves or series are not sampled on the same grid."""


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def trapezoid_weights(points):
    """Trapezoidal quadrature weights for a (possibly non-uniform) grid."""
    points = np.asarray(points, dtype=np.float64)
    gaps = np.diff(points)
    w = np.zeros_like(points)
    w[:-1] += gaps / 2.0
    w[1:] += gaps / 2.0
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    """Ordered abscissae of the continuum together with trapezoidal weights.

    Parameters
    ----------
    points : array-like of shape (n_points,)
        Strictly increasing sampling points, at least two of them.
    """

    points: np.ndarray
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).ravel()
        if pts.size < 2:
            raise ValueError("a grid needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(trapezoid_weights(pts)))

    @classmethod
    def uniform(cls, n_points: int, start: float = 0.0, stop: float = 1.0) -> "Grid":
        return cls(np.linspace(start, stop, n_points))

    @property
    def size(self) -> int:
        return self.points.size

    @property
    def length(self) -> float:
        return float(self.points[-1] - self.points[0])

    def __len__(self):
        return self.size

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.size == other.size and bool(np.array_equal(self.points, other.points))

    def __hash__(self):
        return hash(self.points.tobytes())


def check_same_grid(a: Grid, b: Grid):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a.size} points vs {b.size} points or differing abscissae")


@dataclass(frozen=True, eq=False)
class FunctionalTimeSeries:
    """``n`` curves observed in time order on one shared grid."""

    grid: Grid
    values: np.ndarray
    labels: Optional[Sequence] = None

    def __post_init__(self):
        values = check_curves(self.values, name="values")
        if values.shape[1] != self.grid.size:
            raise GridMismatchError(
                f"values have {values.shape[1]} columns but the grid has {self.grid.size} points"
            )
        object.__setattr__(self, "values", _frozen(values))
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != values.shape[0]:
                raise ValueError(f"got {len(labels)} labels for {values.shape[0]} curves")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_array(cls, values, grid: Optional[Grid] = None, labels=None) -> "FunctionalTimeSeries":
        values = check_curves(values)
        if grid is None:
            grid = Grid.uniform(values.shape[1])
        return cls(grid, values, labels)

    @property
    def n_curves(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.n_curves

    def __getitem__(self, item) -> "FunctionalTimeSeries":
        """Slice in time; always returns a series (never a bare curve)."""
        idx = np.arange(self.n_curves)[item]
        idx = np.atleast_1d(idx)
        labels = None if self.labels is None else [self.labels[i] for i in idx]
        return FunctionalTimeSeries(self.grid, self.values[idx], labels)


@dataclass(frozen=True, eq=False)
class MeanCurve:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).ravel()
        if values.size != self.grid.size:
            raise GridMismatchError("mean curve length does not match its grid")
        object.__setattr__(self, "values", _frozen(values))


def inner_product(f, g, grid: Grid) -> float:
    """Quadrature approximation of the L2 inner product of ``f`` and ``g``."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.shape != (grid.size,) or g.shape != (grid.size,):
        raise GridMismatchError(
            f"curves of shape {f.shape} and {g.shape} do not match a grid of {grid.size} points"
        )
    # f*g is computed first so that the result is exactly symmetric in (f, g)
    return float(np.dot(f * g, grid.weights))


def norm(f, grid: Grid) -> float:
    return float(np.sqrt(max(inner_product(f, f, grid), 0.0)))


def gram_matrix(curves, grid: Grid) -> np.ndarray:
    """Pairwise quadrature inner products between the rows of ``curves``."""
    curves = np.atleast_2d(np.asarray(curves, dtype=np.float64))
    if curves.shape[1] != grid.size:
        raise GridMismatchError("curves do not match the grid")
    return (curves * grid.weights) @ curves.T


def mean_curve(X: FunctionalTimeSeries, weights=None) -> MeanCurve:
    """Pointwise (optionally weighted) average of the curves in ``X``.

    Raises
    ------
    ValueError
        If every weight is zero, or a weight falls outside [0, 1].
    """
    if weights is None:
        return MeanCurve(X.grid, X.values.mean(axis=0))
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if weights.size != X.n_curves:
        raise ValueError(f"got {weights.size} weights for {X.n_curves} curves")
    if np.any(weights < 0) or np.any(weights > 1) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must lie in [0, 1]")
    total = weights.sum()
    if total <= 0:
        raise ValueError("degenerate weights: all weights are zero")
    return MeanCurve(X.grid, weights @ X.values / total)


def center(X: FunctionalTimeSeries, mu: MeanCurve) -> FunctionalTimeSeries:
    check_same_grid(X.grid, mu.grid)
    return FunctionalTimeSeries(X.grid, X.values - mu.values, X.labels)
