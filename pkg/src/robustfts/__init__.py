"""Robust principal-component forecasting of functional time series."""

__version__ = "0.1.0"

from .core import FunctionalTimeSeries, Grid, GridMismatchError, MeanCurve, inner_product, mean_curve, norm
from .fpca import FunctionalPCA, PrincipalDecomposition, fpca, select_K_cv
from .longrun import KernelSpec, autocov, long_run_cov, select_bandwidth
from .mcs import LossMatrix, McsResult, mcs, msfe
from .pipeline import (DEFAULT_METHODS, EvaluationPlan, FunctionalForecaster, MethodSpec, SimulationConfig,
                       evaluate_methods, run_expanding_window, run_simulation_study, tune)
from .robust_fpca import RobustFunctionalPCA, qn_dispersion, rapca, robust_fpca
from .simulate import ContaminationSpec, FarSpec, contaminate, simulate_far1
from .var import VectorAutoregression, mlts_fit, ols_fit, rmlts_fit, select_order

__all__ = [
    "ContaminationSpec", "DEFAULT_METHODS", "EvaluationPlan", "FarSpec", "FunctionalForecaster", "FunctionalPCA",
    "FunctionalTimeSeries", "Grid", "GridMismatchError", "KernelSpec", "LossMatrix", "McsResult", "MeanCurve",
    "MethodSpec", "PrincipalDecomposition", "RobustFunctionalPCA", "SimulationConfig", "VectorAutoregression",
    "autocov", "contaminate", "evaluate_methods", "fpca", "inner_product", "long_run_cov", "mcs", "mean_curve",
    "mlts_fit", "msfe", "norm", "ols_fit", "qn_dispersion", "rapca", "rmlts_fit", "robust_fpca",
    "run_expanding_window", "run_simulation_study", "select_K_cv", "select_bandwidth", "select_order",
    "simulate_far1", "tune",
]
