"""Isolation forests with power-mean aggregation and hypervolume leaf scoring."""

from aniso.aggregation import aggregate_h, classify, power_mean_f, renyi_divergence
from aniso.detector import Detector, DetectorConfig, fit, predict, score_samples
from aniso.experiments import auc_roc, rank_table, run_trials
from aniso.forest import (Dataset, FitConfig, ForestModel, HyperRectangle, IsolationTree, Leaf,
                          Split, fit_forest, fit_tree, locate_leaf, subsample)
from aniso.scoring import (BoundingPolicy, Scorer, ScorerKind, c_factor, depth_score,
                           score_vector, volume_score)

__version__ = "0.1.0"

__all__ = [
    "BoundingPolicy", "Dataset", "Detector", "DetectorConfig", "FitConfig", "ForestModel",
    "HyperRectangle", "IsolationTree", "Leaf", "Scorer", "ScorerKind", "Split",
    "aggregate_h", "auc_roc", "c_factor", "classify", "depth_score", "fit", "fit_forest",
    "fit_tree", "locate_leaf", "power_mean_f", "predict", "rank_table", "renyi_divergence",
    "run_trials", "score_samples", "score_vector", "subsample", "volume_score",
]
