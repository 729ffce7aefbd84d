"""Synthetic benchmarks, AUCROC, repeated trials and rank tables."""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import rankdata

from aniso._accel import USE_NUMBA, n_threads
from aniso.aggregation import format_alpha
from aniso.detector import DetectorConfig, aggregate_scores
from aniso.errors import ConfigError, DegenerateLabels, EmptyResults
from aniso.forest import Dataset, ForestModel, fit_forest

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Reproducible child seed for stream ``index`` of a parent ``seed``."""
    return splitmix64(splitmix64(int(seed) & _MASK64) ^ (int(index) & _MASK64))


@dataclass(frozen=True)
class CubeOutlierSpec:
    d: int = 10
    n_inliers: int = 127
    outlier_offset: float = 1.05
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.outlier_offset <= 1:
            raise ConfigError("outlier_offset must exceed 1 to leave the unit cube")


@dataclass(frozen=True)
class SphereOriginSpec:
    d: int = 3
    n_inliers: int = 127
    noise_sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise ConfigError("d must be >= 2")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")


GeneratorSpec = Union[CubeOutlierSpec, SphereOriginSpec]


def gen_cube_outlier(spec: CubeOutlierSpec) -> Dataset:
    """Uniform inliers in the unit cube plus ``(offset, 0.5, ..., 0.5)`` as the last row."""
    rng = np.random.default_rng(spec.seed)
    inliers = rng.random((spec.n_inliers, spec.d))
    outlier = np.full((1, spec.d), 0.5)
    outlier[0, 0] = spec.outlier_offset
    labels = np.zeros(spec.n_inliers + 1, np.int8)
    labels[-1] = 1
    return Dataset(np.vstack([inliers, outlier]), labels)


def gen_sphere_origin(spec: SphereOriginSpec) -> Dataset:
    """Noisy points on the unit sphere plus the origin as the last row."""
    rng = np.random.default_rng(spec.seed)
    g = rng.standard_normal((spec.n_inliers, spec.d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    if spec.noise_sigma > 0:
        g += spec.noise_sigma * rng.standard_normal(g.shape)
    labels = np.zeros(spec.n_inliers + 1, np.int8)
    labels[-1] = 1
    return Dataset(np.vstack([g, np.zeros((1, spec.d))]), labels)


def generate(spec: GeneratorSpec) -> Dataset:
    if isinstance(spec, CubeOutlierSpec):
        return gen_cube_outlier(spec)
    return gen_sphere_origin(spec)


def experiment_name(spec: GeneratorSpec) -> str:
    return "cube" if isinstance(spec, CubeOutlierSpec) else "sphere"


def auc_roc(scores, labels) -> float:
    """Mann-Whitney AUCROC with average ranks for ties (higher score = positive)."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.size != labels.size:
        raise ValueError("scores and labels differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("AUCROC needs both positive and negative labels")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class ConfigResult:
    config: DetectorConfig
    per_trial: list[float] = field(default_factory=list)

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.per_trial))

    @property
    def std_auc(self) -> float:
        if len(self.per_trial) < 2:
            return 0.0
        return float(np.std(self.per_trial, ddof=1))

    def to_dict(self) -> dict:
        a = self.config.alpha
        return {
            "label": self.config.label,
            "alpha": format_alpha(a) if math.isinf(a) else a,
            "scorer": self.config.scorer.value,
            "mean_auc": self.mean_auc,
            "std_auc": self.std_auc,
            "per_trial": list(self.per_trial),
        }


@dataclass
class TrialReport:
    experiment: str
    d: int
    trials: int
    results: list[ConfigResult]

    def by_label(self) -> dict[str, ConfigResult]:
        return {r.config.label: r for r in self.results}

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "d": self.d,
            "trials": self.trials,
            "configs": [r.to_dict() for r in self.results],
        }


def _run_one_trial(spec: GeneratorSpec, configs: Sequence[DetectorConfig],
                   trial: int) -> list[float]:
    trial_seed = derive_seed(spec.seed, trial)
    data = generate(replace(spec, seed=trial_seed))
    # configs sharing fit parameters share one forest, so alphas and scorers
    # are compared on identical trees
    forests: dict[tuple, ForestModel] = {}
    out = []
    for cfg in configs:
        key = (cfg.n_estimators, cfg.subsample_size, cfg.seed)
        if key not in forests:
            fc = replace(cfg.fit_config, seed=derive_seed(trial_seed, cfg.seed))
            forests[key] = fit_forest(data, fc)
        s = aggregate_scores(forests[key], data, cfg.scoring, cfg.alpha, log2=True)
        out.append(auc_roc(s, data.labels))
    return out


def run_trials(spec: GeneratorSpec, configs: Sequence[DetectorConfig],
               n_trials: int = 100) -> TrialReport:
    """Regenerate the dataset ``n_trials`` times and evaluate every config on each.

    Trial ``t`` uses a dataset seeded by ``derive_seed(spec.seed, t)``, so the
    report is reproducible and independent of execution order. AUCROC is
    computed on ``log2(h_alpha)``, which ranks exactly like ``h_alpha``.
    """
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    if not configs:
        raise ConfigError("no detector configurations given")
    workers = min(n_threads(), n_trials)
    if USE_NUMBA and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda t: _run_one_trial(spec, configs, t), range(n_trials)))
    else:
        rows = [_run_one_trial(spec, configs, t) for t in range(n_trials)]
    results = [ConfigResult(cfg, [row[i] for row in rows]) for i, cfg in enumerate(configs)]
    return TrialReport(experiment_name(spec), spec.d, n_trials, results)


def sweep_dimensions(spec: GeneratorSpec, dims: Sequence[int],
                     configs: Sequence[DetectorConfig], n_trials: int = 100) -> list[TrialReport]:
    return [run_trials(replace(spec, d=d), configs, n_trials) for d in dims]


def sorted_estimator_scores(spec: GeneratorSpec, config: DetectorConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-point per-estimator scores, each row sorted ascending, with labels.

    Plot data for the per-estimator score profiles of a single run.
    """
    from aniso.scoring import score_matrix

    data = generate(spec)
    model = fit_forest(data, config.fit_config)
    return np.sort(score_matrix(model, data, config.scoring), axis=1), data.labels


@dataclass
class RankTable:
    algorithms: list[str]
    datasets: list[str]
    auc: np.ndarray      # (n_algorithms, n_datasets), NaN where missing
    ranks: np.ndarray    # same shape, NaN where missing
    mean_rank: np.ndarray
    mean_auc: np.ndarray
    n_datasets: np.ndarray

    @property
    def complete(self) -> bool:
        return not np.isnan(self.auc).any()

    def rows(self) -> list[dict]:
        order = np.argsort(self.mean_rank, kind="stable")
        return [
            {
                "algorithm": self.algorithms[i],
                "mean_rank": float(self.mean_rank[i]),
                "mean_auc": float(self.mean_auc[i]),
                "n_datasets": int(self.n_datasets[i]),
                "incomplete": bool(self.n_datasets[i] < len(self.datasets)),
            }
            for i in order
        ]


def rank_table(auc, algorithms: Optional[Sequence[str]] = None,
               datasets: Optional[Sequence[str]] = None) -> RankTable:
    """Rank algorithms per dataset by AUCROC (1 = best, ties averaged), then average.

    ``auc`` is an ``(n_algorithms, n_datasets)`` matrix; NaN entries are
    excluded from that dataset's ranking and flagged via ``n_datasets``.
    """
    auc = np.array(auc, dtype=np.float64)
    if auc.ndim != 2 or auc.size == 0:
        raise EmptyResults("rank_table needs a non-empty algorithms x datasets matrix")
    n_alg, n_ds = auc.shape
    algorithms = list(algorithms) if algorithms is not None else [f"alg{i}" for i in range(n_alg)]
    datasets = list(datasets) if datasets is not None else [f"ds{j}" for j in range(n_ds)]
    if len(algorithms) != n_alg or len(datasets) != n_ds:
        raise ValueError("name lists do not match the matrix shape")
    ranks = np.full_like(auc, np.nan)
    for j in range(n_ds):
        ok = ~np.isnan(auc[:, j])
        if ok.any():
            ranks[ok, j] = rankdata(-auc[ok, j], method="average")
    counts = (~np.isnan(ranks)).sum(axis=1)
    if counts.max() == 0:
        raise EmptyResults("every entry of the AUCROC matrix is missing")
    return RankTable(algorithms, datasets, auc, ranks, _nanmean_rows(ranks),
                     _nanmean_rows(auc), counts)


def _nanmean_rows(a: np.ndarray) -> np.ndarray:
    ok = ~np.isnan(a)
    total = np.where(ok, a, 0.0).sum(axis=1)
    n = ok.sum(axis=1)
    return np.where(n > 0, total / np.maximum(n, 1), np.nan)


def evaluate_variants(data: Dataset, configs: Sequence[DetectorConfig]) -> dict[str, float]:
    """AUCROC of each config on one labeled dataset, sharing forests where possible."""
    if data.labels is None:
        raise DegenerateLabels("dataset has no labels")
    forests: dict[tuple, ForestModel] = {}
    out = {}
    for cfg in configs:
        key = (cfg.n_estimators, cfg.subsample_size, cfg.seed)
        if key not in forests:
            forests[key] = fit_forest(data, cfg.fit_config)
        s = aggregate_scores(forests[key], data, cfg.scoring, cfg.alpha, log2=True)
        out[cfg.label] = auc_roc(s, data.labels)
    return out


def grouped(reports: Sequence[TrialReport]) -> dict[str, list[float]]:
    """Mean AUCROC per config label across a dimension sweep."""
    out: dict[str, list[float]] = defaultdict(list)
    for rep in reports:
        for r in rep.results:
            out[r.config.label].append(r.mean_auc)
    return dict(out)
