"""Pairwise controlled manifold approximation: pair graphs, three-phase
optimization, embedding metrics, benchmark generators and a loss auditor."""

from ._util import PacmapWarning
from .pairset import PairSet, build_pair_set, compute_sigmas
from .objective import PhaseWeights, ScheduleConfig, total_loss, gradient, weight_schedule
from .optimizer import FitConfig, fit, pca_init, random_init
from .metrics import MetricReport, knn_accuracy, random_triplet_accuracy, centroid_triplet_accuracy

__version__ = "0.1.0"


__all__ = [
    "PacmapWarning",
    "PairSet",
    "build_pair_set",
    "compute_sigmas",
    "PhaseWeights",
    "ScheduleConfig",
    "total_loss",
    "gradient",
    "weight_schedule",
    "FitConfig",
    "fit",
    "pca_init",
    "random_init",
    "MetricReport",
    "knn_accuracy",
    "random_triplet_accuracy",
    "centroid_triplet_accuracy",
]
