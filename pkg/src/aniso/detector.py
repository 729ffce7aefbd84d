"""Fit / score / predict pipeline for the IF_alpha and PAC_alpha detectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from aniso.aggregation import AlphaLike, exp2_neg, parse_alpha, power_mean_f
from aniso.errors import ConfigError, NoThreshold
from aniso.forest import FitConfig, ForestModel, as_matrix, fit_forest
from aniso.scoring import BoundingPolicy, Scorer, ScorerKind, score_matrix


@dataclass(frozen=True)
class DetectorConfig:
    """Hyperparameters of one detector.

    ``scorer="depth"`` gives IF_alpha, ``scorer="volume"`` gives PAC_alpha.
    Set at most one of ``tau`` (fixed threshold) and ``contamination``
    (threshold taken from the training score quantile).
    """

    n_estimators: int = 100
    subsample_size: int = 256
    scorer: ScorerKind = ScorerKind.DEPTH
    alpha: float = 0.0
    tau: Optional[float] = None
    contamination: Optional[float] = None
    seed: int = 0
    strict_paper_depth: bool = False
    bounding_policy: BoundingPolicy = BoundingPolicy.SUBSAMPLE
    bounding_box: Optional[tuple] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "scorer", ScorerKind(self.scorer))
        object.__setattr__(self, "bounding_policy", BoundingPolicy(self.bounding_policy))
        object.__setattr__(self, "alpha", parse_alpha(self.alpha))
        if self.tau is not None and self.contamination is not None:
            raise ConfigError("set either tau or contamination, not both")
        if self.contamination is not None and not 0 < self.contamination <= 0.5:
            raise ConfigError(f"contamination must be in (0, 0.5], got {self.contamination}")
        if self.tau is not None and math.isnan(self.tau):
            raise ConfigError("tau is NaN")
        # validates n_estimators / subsample_size
        self.fit_config
        self.scoring

    @property
    def fit_config(self) -> FitConfig:
        return FitConfig(self.n_estimators, self.subsample_size, self.seed)

    @property
    def scoring(self) -> Scorer:
        return Scorer(kind=self.scorer, strict_paper_depth=self.strict_paper_depth,
                      bounding_policy=self.bounding_policy, bounding_box=self.bounding_box)

    @property
    def label(self) -> str:
        family = "IF" if self.scorer is ScorerKind.DEPTH else "PAC"
        a = "inf" if math.isinf(self.alpha) else f"{self.alpha:g}"
        return f"{family}_{a}"


@dataclass(frozen=True, eq=False)
class Detector:
    model: ForestModel
    config: DetectorConfig
    fitted_tau: Optional[float] = None

    @property
    def threshold(self) -> Optional[float]:
        return self.config.tau if self.config.tau is not None else self.fitted_tau

    def score_samples(self, data, log2: bool = False) -> np.ndarray:
        return score_samples(self, data, log2=log2)

    def predict(self, data) -> np.ndarray:
        return predict(self, data)


def aggregate_scores(model: ForestModel, data, scorer: Scorer, alpha: AlphaLike,
                     log2: bool = False) -> np.ndarray:
    """Aggregate score ``h_alpha`` of every row; with ``log2`` return ``-f_alpha``.

    The log form orders points exactly like ``h_alpha`` but does not
    underflow when per-estimator scores are large (volume scorer).
    """
    phi = score_matrix(model, data, scorer)
    f = np.atleast_1d(power_mean_f(phi, alpha))
    return -f if log2 else exp2_neg(f)


def fit(data, config: DetectorConfig = DetectorConfig()) -> Detector:
    model = fit_forest(data, config.fit_config)
    tau = None
    if config.contamination is not None:
        train = aggregate_scores(model, data, config.scoring, config.alpha)
        tau = float(np.quantile(train, 1.0 - config.contamination, method="higher"))
    return Detector(model, config, tau)


def score_samples(det: Detector, data, log2: bool = False) -> np.ndarray:
    """Aggregate anomaly score of every row of ``data`` (higher = more anomalous)."""
    X = as_matrix(data, det.model.n_features)
    return aggregate_scores(det.model, X, det.config.scoring, det.config.alpha, log2=log2)


def predict(det: Detector, data) -> np.ndarray:
    tau = det.threshold
    if tau is None:
        raise NoThreshold("configure tau or contamination to use predict")
    return score_samples(det, data) >= tau


def with_alpha(det: Detector, alpha: AlphaLike) -> Detector:
    """Same fitted forest and threshold, different aggregation order."""
    return Detector(det.model, replace(det.config, alpha=alpha), det.fitted_tau)
