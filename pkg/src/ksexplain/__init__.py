"""Local explanations of black-box survival models by a Cox surrogate fitted
with a worst-case loss over Kolmogorov-Smirnov bands.
"""
from .cox import CoxModel, fit_cox
from .dataio import ColumnSpec, ExperimentReport, load_bundled, load_csv, load_report, save_report
from .datagen import WeibullCoxGen, gen_contaminated, gen_dataset
from .exceptions import ConvergenceError, SeparationError
from .experiments import ExperimentConfig, run_contamination, run_sweep, run_three_condition
from .explainer import ExplainConfig, Explanation, explain, explain_sweep
from .ks import KsConfig, ks_band_halfwidth, ks_quantile, theta_band
from .rsf import RsfModel, RsfParams, fit_rsf
from .solver import ExplanationProblem, ExplanationResult, solve_precise, solve_robust
from .survival import ChfCurve, Dataset, TimeGrid, build_time_grid, c_index, mrse, nelson_aalen, rse

__all__ = [
    "ChfCurve", "ColumnSpec", "ConvergenceError", "CoxModel", "Dataset", "ExperimentConfig",
    "ExperimentReport", "ExplainConfig", "Explanation", "ExplanationProblem", "ExplanationResult",
    "KsConfig", "RsfModel", "RsfParams", "SeparationError", "TimeGrid", "WeibullCoxGen",
    "build_time_grid", "c_index", "explain", "explain_sweep", "fit_cox", "fit_rsf", "gen_contaminated",
    "gen_dataset", "ks_band_halfwidth", "ks_quantile", "load_bundled", "load_csv", "load_report", "mrse",
    "nelson_aalen", "rse", "run_contamination", "run_sweep", "run_three_condition", "save_report",
    "solve_precise", "solve_robust", "theta_band",
]
