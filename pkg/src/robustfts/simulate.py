"""FAR(1) curves on a Fourier basis, outlier injection, and synthetic fixtures."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import check_random_state
from .core import FunctionalTimeSeries, Grid

PAPER_PSI = np.array(
    [
        [-0.05, -0.23, 0.76],
        [0.80, -0.05, 0.04],
        [0.04, 0.76, 0.23],
    ]
)

SHAPES = ("constant-shift", "random-basis-shift")


def fourier_basis(n_basis: int, grid: Grid) -> np.ndarray:
    """Orthonormal Fourier system on [0, 1]: 1, sqrt2 sin(2 pi t), sqrt2 cos(2 pi t), ..."""
    if n_basis < 1:
        raise ValueError("need at least one basis function")
    t = grid.points
    out = np.empty((n_basis, t.size))
    out[0] = 1.0
    for j in range(1, n_basis):
        freq = 2.0 * np.pi * ((j + 1) // 2)
        out[j] = np.sqrt(2.0) * (np.sin(freq * t) if j % 2 == 1 else np.cos(freq * t))
    return out


@dataclass(frozen=True, eq=False)
class FarSpec:
    psi: np.ndarray = field(default_factory=lambda: PAPER_PSI.copy())
    sigma: Optional[np.ndarray] = None
    n: int = 200
    n_points: int = 101
    burn_in: int = 10

    def __post_init__(self):
        psi = np.atleast_2d(np.asarray(self.psi, dtype=np.float64))
        if psi.shape[0] != psi.shape[1]:
            raise ValueError(f"operator matrix must be square, got {psi.shape}")
        sigma = np.ones(psi.shape[0]) if self.sigma is None else np.asarray(self.sigma, dtype=np.float64)
        if sigma.shape != (psi.shape[0],) or np.any(sigma <= 0):
            raise ValueError("sigma must hold one positive standard deviation per basis function")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_basis(self) -> int:
        return self.psi.shape[0]

    @property
    def grid(self) -> Grid:
        return Grid.uniform(self.n_points)


def simulate_coefficients(spec: FarSpec, random_state=None) -> np.ndarray:
    """Basis coefficients of ``n`` curves after discarding ``burn_in`` states.

    The start state is drawn first and innovations are drawn one step at a
    time, so a longer series extends a shorter one with the same seed.
    """
    rng = check_random_state(random_state)
    if np.max(np.abs(np.linalg.eigvals(spec.psi))) >= 1:
        warnings.warn("operator has spectral radius >= 1; the series is not stationary", RuntimeWarning)
    D = spec.n_basis
    c = rng.standard_normal(D)
    out = np.empty((spec.n, D))
    for i in range(spec.burn_in - 1 + spec.n):
        c = spec.psi @ c + spec.sigma * rng.standard_normal(D)
        j = i - (spec.burn_in - 1)
        if j >= 0:
            out[j] = c
    return out


def simulate_far1(spec: FarSpec, random_state=None, return_coefficients: bool = False):
    coefs = simulate_coefficients(spec, random_state)
    grid = spec.grid
    X = FunctionalTimeSeries(grid, coefs @ fourier_basis(spec.n_basis, grid))
    return (X, coefs) if return_coefficients else X


@dataclass(frozen=True)
class ContaminationSpec:
    """Additive outliers on a fraction ``rate`` of curves."""

    rate: float = 0.10
    magnitude: float = 8.0
    shape: str = "constant-shift"
    n_basis: int = 3

    def __post_init__(self):
        if not 0.0 <= self.rate <= 0.5:
            raise ValueError(f"contamination rate must lie in [0, 0.5], got {self.rate}")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown outlier shape {self.shape!r}; expected one of {SHAPES}")


def outlier_shift(spec: ContaminationSpec, grid: Grid, rng) -> np.ndarray:
    if spec.shape == "constant-shift":
        return np.full(grid.size, spec.magnitude)
    z = rng.standard_normal(spec.n_basis)
    z /= np.linalg.norm(z)
    return spec.magnitude * (z @ fourier_basis(spec.n_basis, grid))


def contaminate(X: FunctionalTimeSeries, spec: ContaminationSpec, random_state=None):
    """Add an outlier shift to ``floor(rate * n)`` curves chosen without replacement.

    Returns
    -------
    contaminated : FunctionalTimeSeries
    indices : ndarray of int
        Sorted indices of the modified curves.
    """
    rng = check_random_state(random_state)
    n = X.n_curves
    k = int(np.floor(spec.rate * n + 1e-9))
    idx = np.sort(rng.choice(n, size=k, replace=False)) if k else np.array([], dtype=int)
    values = X.values.copy()
    for i in idx:
        values[i] = values[i] + outlier_shift(spec, X.grid, rng)
    return FunctionalTimeSeries(X.grid, values, X.labels), idx


def ozone_like(n_days: int = 82, n_hours: int = 24, n_outliers: int = 5, outlier_scale: float = 2.5,
               missing: int = 9, random_state=None):
    """Hourly series that looks like summer ground-level ozone.

    Each day is a diurnal bump whose level and peak width follow an AR(1)
    process, plus small hourly noise. A few days get an inflated peak and
    a few isolated hours are blanked out.

    Returns
    -------
    values : ndarray of shape (n_days * n_hours,)
        Non-negative hourly concentrations, NaN where missing.
    outlier_days : ndarray of int
    """
    rng = check_random_state(random_state)
    hours = np.arange(n_hours)
    level = np.empty(n_days)
    width = np.empty(n_days)
    a, b = 0.0, 0.0
    for i in range(n_days):
        a = 0.7 * a + rng.normal(0, 0.35)
        b = 0.5 * b + rng.normal(0, 0.2)
        level[i], width[i] = a, b
    peak = np.exp(-0.5 * ((hours - 14.0) / (3.5 * np.exp(0.2 * width[:, None]))) ** 2)
    days = 0.012 + 0.05 * np.exp(0.4 * level[:, None]) * peak
    days = days * np.exp(rng.normal(0, 0.08, size=days.shape))
    outlier_days = np.sort(rng.choice(np.arange(5, n_days), size=n_outliers, replace=False))
    days[outlier_days] *= 1.0 + (outlier_scale - 1.0) * peak[outlier_days]
    values = days.ravel()
    if missing:
        holes = rng.choice(np.arange(1, values.size - 1), size=missing, replace=False)
        values[holes] = np.nan
    return values, outlier_days
