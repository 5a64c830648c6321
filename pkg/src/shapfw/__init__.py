"""SHAP-based filter feature weighting for unsupervised clustering."""
from .data import Dataset, apply_weights, load_dataset, normalize_weights, standardize
from .forest import Forest, ForestParams, fit_forest
from .metrics import evaluate
from .pipeline import DatasetRef, ExperimentConfig, RunReport, StageError, run_benchmark, run_experiment
from .shap import ShapTensor, aggregate_to_weights, forest_shap, tree_shap_single
from .weights import WeightMethodSpec

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DatasetRef", "ExperimentConfig", "Forest", "ForestParams", "RunReport", "ShapTensor",
    "StageError", "WeightMethodSpec", "aggregate_to_weights", "apply_weights", "evaluate",
    "fit_forest", "forest_shap", "load_dataset", "normalize_weights", "run_benchmark",
    "run_experiment", "standardize", "tree_shap_single",
]
