"""Forecast losses and the model confidence set with a moving-block bootstrap."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ._validation import check_random_state

STATISTICS = ("T_R", "T_max")


def msfe(forecasts, actuals) -> float:
    """Mean squared forecast error over curves and grid points."""
    f = np.asarray(forecasts, dtype=np.float64)
    a = np.asarray(actuals, dtype=np.float64)
    if f.shape != a.shape:
        raise ValueError(f"forecast shape {f.shape} does not match actual shape {a.shape}")
    return float(np.mean((f - a) ** 2))


@dataclass(frozen=True, eq=False)
class LossMatrix:
    """Losses of ``m`` models at ``n`` evaluation points, one column per model."""

    losses: np.ndarray
    names: Sequence[str]

    def __post_init__(self):
        L = np.asarray(self.losses, dtype=np.float64)
        if L.ndim != 2:
            raise ValueError("loss matrix must be 2-D (n_eval, n_models)")
        if not np.all(np.isfinite(L)) or np.any(L < 0):
            raise ValueError("losses must be finite and non-negative")
        names = tuple(str(n) for n in self.names)
        if len(names) != L.shape[1]:
            raise ValueError(f"{len(names)} names for {L.shape[1]} models")
        object.__setattr__(self, "losses", L)
        object.__setattr__(self, "names", names)

    @property
    def n_models(self) -> int:
        return self.losses.shape[1]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(self.names)
            for row in self.losses:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "LossMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise ValueError(f"{path}: empty loss file")
        names, body = rows[0], rows[1:]
        try:
            L = np.array([[float(v) for v in r] for r in body], dtype=np.float64)
        except ValueError as exc:
            raise ValueError(f"{path}: non-numeric loss value ({exc})") from None
        return cls(L.reshape(len(body), len(names)), names)


def loss_differentials(L):
    """Pairwise differentials ``d[i, r, x] = l[i, r] - l[i, x]`` and their row means over models.

    Returns
    -------
    pairwise : ndarray of shape (n_eval, m, m)
    relative : ndarray of shape (n_eval, m)
        Average of ``pairwise`` over the second model, self-term included.
    """
    L = getattr(L, "losses", L)
    L = np.asarray(L, dtype=np.float64)
    if L.shape[1] < 2:
        raise ValueError("need at least two models")
    pairwise = L[:, :, None] - L[:, None, :]
    return pairwise, pairwise.mean(axis=2)


def block_indices(n: int, block_length: int, n_boot: int, random_state=None) -> np.ndarray:
    """Moving-block bootstrap index matrix of shape (n_boot, n)."""
    if block_length < 1:
        raise ValueError("block length must be >= 1")
    if n < block_length:
        raise ValueError(f"series of length {n} is shorter than the block length {block_length}")
    rng = check_random_state(random_state)
    n_blocks = -(-n // block_length)
    starts = rng.integers(0, n - block_length + 1, size=(n_boot, n_blocks))
    idx = (starts[:, :, None] + np.arange(block_length)).reshape(n_boot, -1)
    return idx[:, :n]


def bootstrap_variance(x, n_boot: int = 5000, block_length: int = 1, random_state=None) -> float:
    """Moving-block bootstrap variance of the sample mean, around the sample mean."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    idx = block_indices(x.size, block_length, n_boot, random_state)
    means = x[idx].mean(axis=1)
    return float(np.mean((means - x.mean()) ** 2))


def ar_significant_lags(x, max_lag: int = 10, z: float = 1.959963984540054) -> int:
    """Most lag coefficients significant at 5% across AR(1..max_lag) least-squares fits."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if np.ptp(x) == 0:
        return 0
    best = 0
    for p in range(1, max_lag + 1):
        n_eff = x.size - p
        if n_eff <= p + 2:
            break
        X = np.column_stack([np.ones(n_eff)] + [x[p - j : x.size - j] for j in range(1, p + 1)])
        y = x[p:]
        XtX_inv = np.linalg.pinv(X.T @ X)
        beta = XtX_inv @ X.T @ y
        resid = y - X @ beta
        s2 = resid @ resid / (n_eff - p - 1)
        se = np.sqrt(np.maximum(np.diag(XtX_inv)[1:] * s2, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(se > 0, np.abs(beta[1:]) / se, 0.0)
        best = max(best, int(np.sum(t > z)))
    return best


def select_block_length(L, max_lag: int = 10) -> int:
    """Largest count of significant AR lags over all pairwise differential series, at least 1."""
    L = np.asarray(getattr(L, "losses", L), dtype=np.float64)
    m = L.shape[1]
    best = 0
    for r in range(m):
        for x in range(r + 1, m):
            best = max(best, ar_significant_lags(L[:, r] - L[:, x], max_lag))
    return max(1, min(best, L.shape[0]))


@dataclass(frozen=True)
class EliminationStep:
    model: str
    statistic: float
    p_value: float
    mcs_p_value: float


@dataclass(frozen=True, eq=False)
class McsResult:
    survivors: List[str]
    eliminated: List[EliminationStep]
    statistic: str
    level: float
    n_boot: int
    block_length: int
    seed: Optional[int]
    final_p_value: float = 1.0
    names: Sequence[str] = field(default_factory=tuple)

    def includes(self, name: str) -> bool:
        return name in self.survivors

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "level": self.level,
            "survivors": list(self.survivors),
            "eliminated": [s.__dict__ for s in self.eliminated],
            "final_p_value": self.final_p_value,
            "bootstrap": {"n_boot": self.n_boot, "block_length": self.block_length, "seed": self.seed},
        }


def _safe_ratio(num, var):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / np.sqrt(var)
    return np.where(var > 0, out, 0.0)


def mcs(L, level: float = 0.9, statistic: str = "T_R", n_boot: int = 5000,
        block_length: Optional[int] = None, random_state=None, names=None) -> McsResult:
    """Sequentially drop the worst model until equal predictive ability is not rejected.

    The bootstrap index draws are made once and reused at every step.
    The null distribution resamples mean losses and centres them on the
    observed means.
    """
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}")
    if isinstance(L, LossMatrix):
        names = L.names
        L = L.losses
    L = np.asarray(L, dtype=np.float64)
    n, m = L.shape
    if m < 2:
        raise ValueError("need at least two models")
    names = tuple(names) if names is not None else tuple(f"model{j}" for j in range(m))
    if block_length is None:
        block_length = select_block_length(L)
    seed = random_state if isinstance(random_state, (int, np.integer)) else None
    idx = block_indices(n, block_length, n_boot, random_state)
    lbar = L.mean(axis=0)
    lboot = L[idx].mean(axis=1)  # (n_boot, m)
    dev = lboot - lbar

    alive = list(range(m))
    steps: List[EliminationStep] = []
    running = 0.0
    p_value = 1.0
    while len(alive) > 1:
        a = np.array(alive)
        dbar = lbar[a][:, None] - lbar[a][None, :]
        ddev = dev[:, a][:, :, None] - dev[:, a][:, None, :]
        var_pair = np.mean(ddev**2, axis=0)
        rel = dbar.mean(axis=1)
        rdev = ddev.mean(axis=2)
        var_rel = np.mean(rdev**2, axis=0)
        t_pair = _safe_ratio(dbar, var_pair)
        t_rel = _safe_ratio(rel, var_rel)
        if statistic == "T_R":
            T = np.max(np.abs(t_pair))
            Tb = np.max(np.abs(_safe_ratio(ddev, var_pair[None])), axis=(1, 2))
            worst = int(np.argmax(np.max(t_pair, axis=1)))
        else:
            T = np.max(t_rel)
            Tb = np.max(_safe_ratio(rdev, var_rel[None]), axis=1)
            worst = int(np.argmax(t_rel))
        p_value = float(np.mean(Tb >= T - 1e-12 * max(1.0, abs(T))))
        if p_value >= 1.0 - level:
            break
        running = max(running, p_value)
        steps.append(EliminationStep(names[alive[worst]], float(T), p_value, running))
        alive.pop(worst)
    return McsResult([names[j] for j in alive], steps, statistic, level, n_boot, block_length, seed,
                     p_value if len(alive) > 1 else 1.0, names)


def summary_statistics(values) -> dict:
    """Min, quartiles, mean, max and sd of a loss column (R ``summary`` row labels)."""
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {k: float("nan") for k in SUMMARY_ROWS}
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return {
        "Min.": float(v.min()),
        "1st Qu.": float(q1),
        "Median": float(med),
        "Mean": float(v.mean()),
        "3rd Qu.": float(q3),
        "Max.": float(v.max()),
        "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
    }


SUMMARY_ROWS = ("Min.", "1st Qu.", "Median", "Mean", "3rd Qu.", "Max.", "sd")
