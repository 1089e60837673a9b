"""Mixture-model clustering of oscillatory curves built on FMM waves.

Ships the wave model and its least-squares fit, the EM mixture
estimator with multi-start and cluster-count selection, clustering
validity indices, a PCA + k-means baseline, and a spike-sorting
pipeline (synthetic generation, detection, segmentation, experiment
runner) with a CLI front end.
"""

from .exceptions import (DegenerateTargetError, GridError,
                         InsufficientDataError, MetricError, MixFMMError)
from .waves import (FMMModel, FMMWave, Signal, TimeGrid, canonicalize,
                    eval_model, eval_wave, rescale_time)
from .fit import FitConfig, FitResult, fit_fmm1, fit_fmm_m
from .mixture import (EMConfig, MixFMMModel, e_step, fit_em, hard_labels,
                      load_model, log_density, m_step, save_model)
from .selection import SelectionTrace, choose_from_curve, select_k
from .metrics import (ClusterSummary, ConfusionMatrix, accuracy, ball_hall,
                      cluster_summary, confusion_matrix, davies_bouldin,
                      silhouette)
from .baselines import PCAProjection, kmeans, pca, pca_kmeans
from .pipeline import (ExperimentReport, GeneratorSpec, Recording, SpikeSet,
                       detect_spikes, generate, run_experiment, segment)
from .presets import benchmark_spec, three_class_templates

__version__ = "0.1.0"

__all__ = [
    "MixFMMError", "GridError", "DegenerateTargetError",
    "InsufficientDataError", "MetricError",
    "TimeGrid", "Signal", "FMMWave", "FMMModel",
    "rescale_time", "eval_wave", "eval_model", "canonicalize",
    "FitConfig", "FitResult", "fit_fmm1", "fit_fmm_m",
    "EMConfig", "MixFMMModel", "log_density", "e_step", "m_step",
    "fit_em", "hard_labels", "save_model", "load_model",
    "SelectionTrace", "choose_from_curve", "select_k",
    "ConfusionMatrix", "ClusterSummary", "confusion_matrix", "accuracy",
    "cluster_summary", "ball_hall", "davies_bouldin", "silhouette",
    "PCAProjection", "pca", "kmeans", "pca_kmeans",
    "Recording", "SpikeSet", "GeneratorSpec", "ExperimentReport",
    "detect_spikes", "segment", "generate", "run_experiment",
    "three_class_templates", "benchmark_spec",
    "__version__",
]
