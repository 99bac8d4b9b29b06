"""Hourly CSV ingestion, run manifests and result files."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .core import FunctionalTimeSeries, Grid
from .mcs import SUMMARY_ROWS, LossMatrix
from .pipeline import DEFAULT_METHODS, FPCA_KINDS, EvaluationPlan, MethodSpec, SimulationConfig
from .simulate import PAPER_PSI, SHAPES, FarSpec

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none"})


class ConfigError(ValueError):
    """Invalid manifest or command-line configuration."""


class DataError(ValueError):
    """Input data that cannot be turned into curves."""


# ingestion ---------------------------------------------------------------------------------------


class IngestSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    path: str
    value_column: str = "value"
    timestamp_column: Optional[str] = None
    curve_length: int = Field(24, ge=2)
    transform: Literal["none", "sqrt"] = "none"


def _parse_value(text: str):
    t = text.strip()
    if t.lower() in MISSING_TOKENS:
        return math.nan
    v = float(t)
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {t!r}")
    return v


def read_hourly(spec: IngestSpec):
    """Values and timestamps from the CSV, NaN where a value is missing."""
    path = Path(spec.path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, a header row is required") from None
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: not valid UTF-8 ({exc.reason})") from None
        header = [h.strip().lstrip("﻿") for h in header]
        if spec.value_column not in header:
            raise DataError(f"{path}: value column {spec.value_column!r} not in header {header}")
        vi = header.index(spec.value_column)
        ti = None
        if spec.timestamp_column is not None:
            if spec.timestamp_column not in header:
                raise DataError(f"{path}: timestamp column {spec.timestamp_column!r} not in header {header}")
            ti = header.index(spec.timestamp_column)
        values: List[float] = []
        stamps: List[str] = []
        # in a one-column file a blank line is a missing value; trailing blank lines are dropped
        pending = 0
        try:
            for row in reader:
                if not row or all(not c.strip() for c in row):
                    pending += len(header) == 1
                    continue
                values.extend([np.nan] * pending)
                stamps.extend([""] * pending)
                pending = 0
                line = reader.line_num
                if len(row) != len(header):
                    raise DataError(f"{path}:{line}: expected {len(header)} fields, found {len(row)}")
                try:
                    values.append(_parse_value(row[vi]))
                except ValueError:
                    raise DataError(f"{path}:{line}: value {row[vi]!r} is not numeric") from None
                stamps.append(row[ti] if ti is not None else "")
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: not valid UTF-8 ({exc.reason})") from None
        except csv.Error as exc:
            raise DataError(f"{path}:{reader.line_num}: {exc}") from None
    return np.array(values, dtype=np.float64), stamps


def impute_curve(y: np.ndarray) -> np.ndarray:
    """Linear interpolation inside the curve, nearest observed value at its ends."""
    y = np.asarray(y, dtype=np.float64)
    miss = np.isnan(y)
    if not miss.any():
        return y.copy()
    if miss.all():
        raise DataError("curve has no observed values")
    x = np.arange(y.size)
    out = y.copy()
    # np.interp holds the end values constant outside the observed range
    out[miss] = np.interp(x[miss], x[~miss], y[~miss])
    return out


def to_curves(values, curve_length: int, transform: str = "none", labels: Optional[Sequence[str]] = None):
    """Reshape an hourly series into imputed (and optionally square-rooted) curves."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DataError("no observations")
    if values.size % curve_length:
        raise DataError(f"{values.size} observations do not split into curves of length {curve_length}")
    days = values.reshape(-1, curve_length)
    names = list(labels) if labels is not None else [f"day{i + 1}" for i in range(days.shape[0])]
    empty = [names[i] for i in np.flatnonzero(np.isnan(days).all(axis=1))]
    if empty:
        raise DataError(f"no observations on {len(empty)} day(s): {', '.join(empty)}")
    curves = np.vstack([impute_curve(d) for d in days])
    if transform == "sqrt":
        neg = np.argwhere(curves < 0)
        if neg.size:
            i, j = neg[0]
            raise DataError(f"negative value {curves[i, j]!r} at {names[i]} position {j + 1} cannot be square-rooted")
        curves = np.sqrt(curves)
    elif transform != "none":
        raise ConfigError(f"unknown transform {transform!r}")
    return curves, names


def ingest(spec: IngestSpec) -> FunctionalTimeSeries:
    values, stamps = read_hourly(spec)
    n_days = values.size // spec.curve_length
    labels = None
    if spec.timestamp_column is not None and values.size % spec.curve_length == 0:
        labels = [stamps[i * spec.curve_length] for i in range(n_days)]
    curves, names = to_curves(values, spec.curve_length, spec.transform, labels)
    grid = Grid(np.arange(spec.curve_length, dtype=np.float64))
    return FunctionalTimeSeries(grid, curves, names)


def write_hourly(path, values, value_column: str = "value", timestamps: Optional[Sequence[str]] = None,
                 timestamp_column: str = "timestamp"):
    """Write an hourly series; NaN becomes an empty field. Values round-trip exactly."""
    values = np.asarray(values, dtype=np.float64).ravel()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if timestamps is None:
            w.writerow([value_column])
            for v in values:
                w.writerow(["" if np.isnan(v) else repr(float(v))])
        else:
            w.writerow([timestamp_column, value_column])
            for t, v in zip(timestamps, values):
                w.writerow([t, "" if np.isnan(v) else repr(float(v))])


# manifest ----------------------------------------------------------------------------------------


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FarSection(_Section):
    n: int = Field(200, ge=3)
    n_points: int = Field(101, ge=2)
    burn_in: int = Field(10, ge=1)
    psi: List[List[float]] = Field(default_factory=lambda: PAPER_PSI.tolist())
    sigma: Optional[List[float]] = None

    @field_validator("psi")
    @classmethod
    def _square(cls, v):
        if not v or any(len(r) != len(v) for r in v):
            raise ValueError("psi must be a non-empty square matrix")
        return v

    @model_validator(mode="after")
    def _sigma_size(self):
        if self.sigma is not None and len(self.sigma) != len(self.psi):
            raise ValueError(f"sigma needs {len(self.psi)} entries, got {len(self.sigma)}")
        return self

    def build(self) -> FarSpec:
        return FarSpec(np.array(self.psi), None if self.sigma is None else np.array(self.sigma), self.n,
                       self.n_points, self.burn_in)


class SimulationSection(_Section):
    replications: int = Field(100, ge=1)
    contamination: List[float] = Field(default_factory=lambda: [0.0, 0.1])
    magnitude: float = 8.0
    shape: str = "constant-shift"
    n_train: int = Field(60, ge=3)
    n_validation: int = Field(60, ge=1)
    max_evals: int = Field(200, ge=1)
    max_order: int = Field(3, ge=1)
    n_starts: int = Field(500, ge=1)

    @field_validator("contamination")
    @classmethod
    def _rates(cls, v):
        if not v or any(not 0.0 <= r <= 0.5 for r in v):
            raise ValueError("contamination rates must lie in [0, 0.5]")
        return v

    @field_validator("shape")
    @classmethod
    def _shape(cls, v):
        if v not in SHAPES:
            raise ValueError(f"shape must be one of {SHAPES}")
        return v


class MethodSection(_Section):
    name: str
    fpca: str = "classical"
    estimator: Literal["ols", "mlts", "rmlts"] = "ols"
    n_components: int = Field(3, ge=1, le=50)
    lam: float = Field(3.0, gt=0)
    alpha: float = Field(0.25, ge=0, lt=0.5)
    delta: float = Field(0.01, ge=0, lt=1)

    @field_validator("fpca")
    @classmethod
    def _kind(cls, v):
        if v not in FPCA_KINDS:
            raise ValueError(f"fpca must be one of {FPCA_KINDS}")
        return v

    def build(self) -> MethodSpec:
        return MethodSpec(self.name, self.fpca, self.estimator, self.n_components, self.lam, self.alpha, self.delta)


class PlanSection(_Section):
    n_train: int = Field(ge=3)
    n_validation: int = Field(ge=1)
    n_test: int = Field(ge=1)
    horizon: Literal[1] = 1

    def build(self) -> EvaluationPlan:
        return EvaluationPlan(self.n_train, self.n_validation, self.n_test, self.horizon)


class FitSection(_Section):
    max_order: int = Field(3, ge=1)
    kernel: Literal["bartlett", "parzen", "flat-top"] = "bartlett"
    bandwidth: Optional[float] = Field(None, gt=0)
    n_starts: int = Field(500, ge=1)
    max_evals: int = Field(200, ge=1)
    tune: bool = True


class McsSection(_Section):
    level: float = Field(0.9, gt=0, lt=1)
    statistics: List[Literal["T_R", "T_max"]] = Field(default_factory=lambda: ["T_R", "T_max"])
    n_boot: int = Field(5000, ge=1)
    block_length: Optional[int] = Field(None, ge=1)


class ForecastSection(_Section):
    horizon: int = Field(1, ge=1)


class Manifest(_Section):
    seed: Optional[int] = Field(None, ge=0)
    threads: int = Field(1, ge=1)
    far: FarSection = Field(default_factory=FarSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    ingest: Optional[IngestSpec] = None
    plan: Optional[PlanSection] = None
    methods: Optional[List[MethodSection]] = None
    method: Optional[MethodSection] = None
    fit: FitSection = Field(default_factory=FitSection)
    mcs: McsSection = Field(default_factory=McsSection)
    forecast: ForecastSection = Field(default_factory=ForecastSection)

    @field_validator("methods")
    @classmethod
    def _unique(cls, v):
        if v is not None:
            names = [m.name for m in v]
            if len(set(names)) != len(names):
                raise ValueError("method names must be unique")
            if len(v) < 1:
                raise ValueError("at least one method is required")
        return v

    def method_specs(self) -> List[MethodSpec]:
        return [m.build() for m in self.methods] if self.methods else list(DEFAULT_METHODS)

    def simulation_config(self, seed: int, threads: int) -> SimulationConfig:
        s = self.simulation
        return SimulationConfig(self.far.build(), tuple(s.contamination), s.magnitude, s.shape, s.n_train,
                                s.n_validation, s.replications, s.max_evals, s.max_order, s.n_starts, seed,
                                threads)


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def parse_manifest(data, base_dir: Optional[Path] = None) -> Manifest:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>: manifest must be a mapping")
    try:
        m = Manifest.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    if m.ingest is not None and base_dir is not None and not Path(m.ingest.path).is_absolute():
        m.ingest = m.ingest.model_copy(update={"path": str(base_dir / m.ingest.path)})
    return m


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read manifest ({exc.strerror})") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return parse_manifest(data, path.parent)


# outputs -----------------------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ""  # failed steps stay blank
    if isinstance(v, np.integer):
        return str(int(v))
    return "" if v is None else str(v)


def write_table(path, rows: Sequence[Dict], columns: Sequence[str]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def write_losses(path, losses: np.ndarray, names: Sequence[str]):
    """Loss matrix with a header row of model names; a failed step is left blank."""
    losses = np.asarray(losses, dtype=np.float64)
    if np.all(np.isfinite(losses)):
        LossMatrix(losses, names).to_csv(path)
    else:
        write_table(path, [dict(zip(names, row)) for row in losses], list(names))


def write_summary(path, summaries: Dict[str, Dict[str, float]]):
    """Summary rows (Min. .. sd) by method columns."""
    names = list(summaries)
    rows = [{"statistic": s, **{n: summaries[n][s] for n in names}} for s in SUMMARY_ROWS]
    write_table(path, rows, ["statistic", *names])


def write_plot_data(path, points):
    """Tidy plot data: an iterable of (series, x, y)."""
    write_table(path, [{"series": s, "x": x, "y": y} for s, x, y in points], ["series", "x", "y"])


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else None
    return o


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
