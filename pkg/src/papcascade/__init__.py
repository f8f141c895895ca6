"""Two-stage cascaded ensemble pipeline for cell-image probability tables."""

from .calibration import (
    Objective,
    ThresholdCalibration,
    apply_threshold,
    candidate_thresholds,
    evaluate_threshold,
    sweep_threshold,
)
from .cascade import (
    CascadeOutput,
    FoldDecision,
    FoldEnsembleScore,
    cascade_predict,
    compose_scores,
    ensemble_average,
    fold_decisions,
    majority_vote,
    predict_external,
)
from .errors import (
    ConfigError,
    CoverageError,
    DataError,
    FormatError,
    PapCascadeError,
    VoteTieError,
)
from .evaluation import (
    ENSEMBLE_METHOD,
    PanelReport,
    calibrate_all,
    evaluate_fold,
    evaluate_panel,
)
from .labels import (
    FINAL_CLASSES,
    FinalLabel,
    RawLabel,
    Stage1Label,
    Stage2Label,
    Stage2Target,
    final_label_from_raw,
    map_stage1_label,
    map_stage2_target,
)
from .metrics import (
    ConfusionMatrix,
    FoldMetrics,
    aggregate_folds,
    aggregate_values,
    auroc_binary,
    auroc_macro_ovr,
    confusion_matrix,
    fold_metrics,
    macro_metrics,
    per_class_f1,
    weighted_f1,
)
from .splitting import (
    ClassWeights,
    FoldAssignment,
    Subset,
    class_weights,
    stratified_kfold_split,
)
from .synthetic import (
    DEFAULT_PRIORS,
    GainExperimentResult,
    SyntheticConfig,
    ensemble_gain_experiment,
    generate,
)
from .tables import (
    LabelTable,
    PredictionRecord,
    PredictionTable,
    Stage,
    logits_to_probabilities,
)

__version__ = "0.1.0"
