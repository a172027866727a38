"""Noise robustness of canonical and geometric semantic GP for symbolic regression."""

from .datasets import BENCHMARKS, NOISE_GRID, Dataset, build_dataset, inject_noise
from .experiment import ExperimentPlan, analyze, emit_plot_data, execute, plan_experiment
from .expr import ExprTree, aq, eval_tree
from .gp import GpConfig, GPRegressor, run_gp
from .gsgp import GsgpConfig, GSGPRegressor, run_gsgp
from .metrics import eie, nrmse, rie
from .records import RunRecord
from .stats import wilcoxon_one_tailed

__version__ = "0.1.0"

__all__ = [
    "BENCHMARKS",
    "NOISE_GRID",
    "Dataset",
    "build_dataset",
    "inject_noise",
    "ExperimentPlan",
    "analyze",
    "emit_plot_data",
    "execute",
    "plan_experiment",
    "ExprTree",
    "aq",
    "eval_tree",
    "GpConfig",
    "GPRegressor",
    "run_gp",
    "GsgpConfig",
    "GSGPRegressor",
    "run_gsgp",
    "eie",
    "nrmse",
    "rie",
    "RunRecord",
    "wilcoxon_one_tailed",
]
