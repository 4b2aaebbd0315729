"""Sequential modularity-based community detection with a bootstrap-calibrated
significance level."""

from .alpha import calibrate, calibrate_many, gamma_curve, select_alpha
from .detect import DivisionConfig, detect, k_hat, step_function
from .graph import AdjacencyMatrix, Partition, modularity_matrix, partition_modularity
from .sbm import SbmParams, generate, planted_params

__all__ = [
    "AdjacencyMatrix",
    "DivisionConfig",
    "Partition",
    "SbmParams",
    "calibrate",
    "calibrate_many",
    "detect",
    "gamma_curve",
    "generate",
    "k_hat",
    "modularity_matrix",
    "partition_modularity",
    "planted_params",
    "select_alpha",
    "step_function",
]
