"""Synthetic label tables and simulated model probability panels.

Each simulated model scores an image by blending the true class indicator
with Gaussian noise in logit space and squashing through a sigmoid:

    z = skill * GAIN * (2y - 1) + (1 - skill) * SCALE * e
    e = sqrt(rho) * e_shared + sqrt(1 - rho) * e_model

``e_shared`` is drawn once per (image, fold, head) and reused by every
model, so ``rho`` is the inter-model noise correlation: 0 gives
independent errors, 1 makes all equal-skill models identical. skill 0
yields probabilities independent of the truth; skill 1 yields cleanly
separated ones. Everything is deterministic in the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .evaluation import DEFAULT_OBJECTIVES, ENSEMBLE_METHOD, calibrate_all, evaluate_panel
from .labels import RawLabel
from .splitting import stratified_kfold_split
from .tables import LabelTable, PredictionTable

# Tuned so mid-range skills leave visible error rates (solo AUROC ~0.9 at
# skill 0.6) while skill 1 separates the classes exactly (zero noise).
SIGNAL_GAIN = 1.2
NOISE_SCALE = 2.0

#: Imbalance-shaped default priors (rubbish, healthy, unhealthy, both).
DEFAULT_PRIORS = (0.45, 0.44, 0.09, 0.02)

_PRIOR_ORDER = (RawLabel.RUBBISH, RawLabel.HEALTHY, RawLabel.UNHEALTHY, RawLabel.BOTH)


@dataclass(frozen=True)
class SyntheticConfig:
    n_images: int
    class_priors: tuple[float, float, float, float] = DEFAULT_PRIORS
    n_models: int = 1
    n_folds: int = 1
    model_skill: tuple[float, ...] | float = 0.5
    inter_model_correlation: float = 0.0
    seed: int = 0

    def skills(self) -> tuple[float, ...]:
        if isinstance(self.model_skill, (int, float)):
            return (float(self.model_skill),) * self.n_models
        return tuple(float(s) for s in self.model_skill)

    def validate(self) -> None:
        if self.n_images < 1:
            raise ConfigError(f"n_images must be >= 1, got {self.n_images}")
        if self.n_models < 1:
            raise ConfigError(f"n_models must be >= 1, got {self.n_models}")
        if self.n_folds < 1:
            raise ConfigError(f"n_folds must be >= 1, got {self.n_folds}")
        priors = self.class_priors
        if len(priors) != 4:
            raise ConfigError("class_priors needs 4 entries (rubbish, healthy, unhealthy, both)")
        if any(p < 0 for p in priors):
            raise ConfigError(f"class_priors must be non-negative, got {priors}")
        if abs(sum(priors) - 1.0) > 1e-9:
            raise ConfigError(f"class_priors must sum to 1, got {sum(priors)!r}")
        skills = self.skills()
        if len(skills) != self.n_models:
            raise ConfigError(
                f"model_skill has {len(skills)} entries for n_models={self.n_models}"
            )
        if any(not 0.0 <= s <= 1.0 for s in skills):
            raise ConfigError(f"model_skill values must lie in [0, 1], got {skills}")
        if not 0.0 <= self.inter_model_correlation <= 1.0:
            raise ConfigError(
                f"inter_model_correlation must lie in [0, 1], "
                f"got {self.inter_model_correlation}"
            )


def _model_ids(n_models: int) -> list[str]:
    width = max(2, len(str(n_models)))
    return [f"model_{i + 1:0{width}d}" for i in range(n_models)]


def _image_ids(n_images: int) -> list[str]:
    width = max(7, len(str(n_images - 1)))
    return [f"img_{i:0{width}d}" for i in range(n_images)]


def _head_probabilities(
    y: np.ndarray, skill: float, rho: float, shared: np.ndarray, eps: np.ndarray
) -> np.ndarray:
    noise = math.sqrt(rho) * shared + math.sqrt(1.0 - rho) * eps
    z = skill * SIGNAL_GAIN * (2.0 * y - 1.0) + (1.0 - skill) * NOISE_SCALE * noise
    return 1.0 / (1.0 + np.exp(-z))


def generate(config: SyntheticConfig) -> tuple[LabelTable, PredictionTable]:
    """Draw labels from the priors and a full two-stage prediction panel.

    Predictions cover every (image, model, fold) for both stages; stage-2
    rows exist for rubbish images too, as a real exporter would produce.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    n = config.n_images
    priors = np.asarray(config.class_priors, dtype=np.float64)
    priors = priors / priors.sum()

    drawn = rng.choice(len(_PRIOR_ORDER), size=n, p=priors)
    ids = _image_ids(n)
    labels = LabelTable(
        {image_id: _PRIOR_ORDER[code] for image_id, code in zip(ids, drawn)}
    )

    y_rubbish = (drawn == 0).astype(np.float64)
    y_healthy = ((drawn == 1) | (drawn == 3)).astype(np.float64)
    y_unhealthy = ((drawn == 2) | (drawn == 3)).astype(np.float64)

    skills = config.skills()
    rho = config.inter_model_correlation
    models = _model_ids(config.n_models)
    ids_arr = np.array(ids, dtype=object)

    image_col: list[np.ndarray] = []
    model_col: list[np.ndarray] = []
    fold_col: list[np.ndarray] = []
    stage_col: list[np.ndarray] = []
    p1_col: list[np.ndarray] = []
    p2_col: list[np.ndarray] = []

    def emit(model: str, fold: int, stage_code: int, p1: np.ndarray, p2: np.ndarray) -> None:
        image_col.append(ids_arr)
        model_col.append(np.full(n, model, dtype=object))
        fold_col.append(np.full(n, fold, dtype=np.int64))
        stage_col.append(np.full(n, stage_code, dtype=np.int8))
        p1_col.append(p1)
        p2_col.append(p2)

    nan = np.full(n, np.nan)
    for fold in range(1, config.n_folds + 1):
        shared_r = rng.standard_normal(n)
        for model, skill in zip(models, skills):
            p_r = _head_probabilities(y_rubbish, skill, rho, shared_r, rng.standard_normal(n))
            emit(model, fold, 1, p_r, nan)
        shared_h = rng.standard_normal(n)
        shared_u = rng.standard_normal(n)
        for model, skill in zip(models, skills):
            p_h = _head_probabilities(y_healthy, skill, rho, shared_h, rng.standard_normal(n))
            p_u = _head_probabilities(y_unhealthy, skill, rho, shared_u, rng.standard_normal(n))
            emit(model, fold, 2, p_h, p_u)

    table = PredictionTable(
        np.concatenate(image_col),
        np.concatenate(model_col),
        np.concatenate(fold_col),
        np.concatenate(stage_col),
        np.concatenate(p1_col),
        np.concatenate(p2_col),
        _validated=True,  # unique keys and [0, 1] ranges hold by construction
    )
    return labels, table


@dataclass(frozen=True)
class GainExperimentResult:
    """Replicated macro-F1 gain of the ensemble over the best single model."""

    gains: tuple[float, ...]
    mean_gain: float
    std_gain: float

    def bootstrap_lower(self, alpha: float = 0.05, n_boot: int = 10000, seed: int = 0) -> float:
        """Lower end of the one-sided (1 - alpha) bootstrap interval of the mean."""
        gains = np.asarray(self.gains)
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, len(gains), size=(n_boot, len(gains)))
        means = gains[idx].mean(axis=1)
        return float(np.quantile(means, alpha))


def ensemble_gain_experiment(
    config: SyntheticConfig,
    replications: int,
    ratios: Sequence[float] = (0.8, 0.1, 0.1),
    objectives: dict | None = None,
) -> GainExperimentResult:
    """Run the full pipeline repeatedly and measure the averaging benefit.

    Per replication (derived seed = seed XOR replication index): generate a
    panel, split, calibrate per fold, and evaluate each model alone plus the
    ensemble; the gain is ensemble mean macro-F1 minus the best individual
    model's mean macro-F1.
    """
    config.validate()
    if config.n_models < 1:
        raise ConfigError("gain experiment needs at least one model")
    if config.n_folds < 2:
        raise ConfigError("gain experiment needs n_folds >= 2 to aggregate")
    if replications < 1:
        raise ConfigError(f"replications must be >= 1, got {replications}")
    objectives = dict(DEFAULT_OBJECTIVES if objectives is None else objectives)

    gains = []
    for rep in range(replications):
        rep_seed = config.seed ^ rep
        rep_config = replace(config, seed=rep_seed)
        labels, table = generate(rep_config)
        assignments = stratified_kfold_split(
            labels, config.n_folds, ratios, seed=rep_seed
        )
        calibrations = calibrate_all(table, labels, assignments, objectives)
        report = evaluate_panel(table, labels, assignments, calibrations)
        ensemble_f1 = report.methods[ENSEMBLE_METHOD].aggregate["macro_f1"].mean
        best_single = max(
            method.aggregate["macro_f1"].mean
            for name, method in report.methods.items()
            if name != ENSEMBLE_METHOD
        )
        gains.append(ensemble_f1 - best_single)

    arr = np.asarray(gains)
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return GainExperimentResult(
        gains=tuple(float(g) for g in gains),
        mean_gain=float(arr.mean()),
        std_gain=std,
    )
