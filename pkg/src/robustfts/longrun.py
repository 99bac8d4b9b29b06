"""Lag autocovariance surfaces and the kernel sandwich long-run covariance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import FunctionalTimeSeries, Grid

KERNELS = ("bartlett", "parzen", "flat-top")

# (support m, characteristic exponent q)
_KERNEL_META = {
    "bartlett": (1.0, 1),
    "parzen": (1.0, 2),
    "flat-top": (1.1, math.inf),
}


@dataclass(frozen=True)
class KernelSpec:
    """Lag-window family plus bandwidth.

    ``family`` is one of ``"bartlett"``, ``"parzen"`` or ``"flat-top"``.
    The flat-top window is 1 on ``|u| <= 0.1`` and decays linearly to 0 at
    ``|u| = 1.1``.
    """

    family: str = "bartlett"
    bandwidth: float = 1.0

    def __post_init__(self):
        family = self.family.lower()
        if family not in KERNELS:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {KERNELS}")
        object.__setattr__(self, "family", family)
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be > 0, got {self.bandwidth}")

    @property
    def support(self) -> float:
        return _KERNEL_META[self.family][0]

    @property
    def order(self) -> float:
        return _KERNEL_META[self.family][1]

    def window(self, u):
        u = np.abs(np.asarray(u, dtype=np.float64))
        if self.family == "bartlett":
            out = np.where(u <= 1.0, 1.0 - u, 0.0)
        elif self.family == "parzen":
            inner = 1.0 - 6.0 * u**2 + 6.0 * u**3
            outer = 2.0 * (1.0 - u) ** 3
            out = np.where(u <= 0.5, inner, np.where(u <= 1.0, outer, 0.0))
        else:
            out = np.where(u <= 0.1, 1.0, np.where(u <= 1.1, 1.1 - u, 0.0))
        return out


@dataclass(frozen=True, eq=False)
class AutocovSurface:
    lag: int
    surface: np.ndarray


@dataclass(frozen=True, eq=False)
class CovarianceSurface:
    grid: Grid
    surface: np.ndarray
    kernel: Optional[KernelSpec] = None


def _values(X):
    if isinstance(X, FunctionalTimeSeries):
        return X.values
    return np.atleast_2d(np.asarray(X, dtype=np.float64))


def autocov(Xc, lag: int) -> AutocovSurface:
    """Sample lag-``lag`` autocovariance surface with the 1/n normalisation.

    Entry ``[a, b]`` pairs grid point ``a`` of the earlier-indexed curve
    ``j`` with grid point ``b`` of curve ``j + lag``. The series mean is
    removed first, so an already centred series is left untouched.
    """
    values = _values(Xc)
    n = values.shape[0]
    lag = int(lag)
    if abs(lag) >= n:
        raise ValueError(f"|lag|={abs(lag)} leaves an empty sum for n={n} curves")
    D = values - values.mean(axis=0)
    if lag >= 0:
        surface = D[: n - lag].T @ D[lag:] / n
    else:
        surface = D[-lag:].T @ D[: n + lag] / n
    return AutocovSurface(lag, surface)


def kernel_weight(spec: KernelSpec, lag: int) -> float:
    return float(spec.window(lag / spec.bandwidth))


def long_run_cov(Xc, spec: KernelSpec, grid: Optional[Grid] = None, clip: bool = False) -> CovarianceSurface:
    """Kernel-weighted sum of autocovariance surfaces over all lags.

    Lags beyond ``n - 1`` have empty sums and contribute nothing, so a
    bandwidth wider than the sample is truncated rather than rejected.
    With ``clip=True`` negative eigenvalues of the symmetrised surface are
    set to zero.
    """
    values = _values(Xc)
    n, p = values.shape
    if n < 2:
        raise ValueError("need at least 2 curves to estimate a long-run covariance")
    if grid is None:
        grid = Xc.grid if isinstance(Xc, FunctionalTimeSeries) else Grid.uniform(p)
    max_lag = min(n - 1, int(math.floor(spec.support * spec.bandwidth)))
    D = values - values.mean(axis=0)
    C = D.T @ D / n
    for lag in range(1, max_lag + 1):
        w = kernel_weight(spec, lag)
        if w == 0.0:
            continue
        g = D[: n - lag].T @ D[lag:] / n
        # the negative lag surface is the transpose of the positive one
        C += w * (g + g.T)
    C = (C + C.T) / 2.0
    if clip:
        C = clip_negative_eigenvalues(C)
    return CovarianceSurface(grid, C, spec)


def static_cov(Xc, grid: Optional[Grid] = None) -> CovarianceSurface:
    """Lag-0 covariance surface (the variance function)."""
    values = _values(Xc)
    if grid is None:
        grid = Xc.grid if isinstance(Xc, FunctionalTimeSeries) else Grid.uniform(values.shape[1])
    C = autocov(values, 0).surface
    return CovarianceSurface(grid, (C + C.T) / 2.0, None)


def clip_negative_eigenvalues(C):
    vals, vecs = np.linalg.eigh(C)
    if vals.min() >= 0:
        return C
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.T
    return (out + out.T) / 2.0


def select_bandwidth(Xc, spec: Optional[KernelSpec] = None, override: Optional[float] = None) -> float:
    """Deterministic default bandwidth ``n ** (1/3)``.

    ``override`` short-circuits the rule. ``spec`` is accepted for symmetry
    with data-driven rules and does not change the default.
    """
    if override is not None:
        if not override > 0:
            raise ValueError("bandwidth override must be > 0")
        return float(override)
    n = _values(Xc).shape[0]
    if n < 10:
        raise ValueError(f"bandwidth rule needs n >= 10 curves, got {n}")
    # cube root via round-trip keeps perfect cubes exact (125 -> 5.0)
    h = n ** (1.0 / 3.0)
    r = round(h)
    return float(r) if r**3 == n else float(h)
