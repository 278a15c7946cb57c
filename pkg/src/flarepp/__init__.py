"""Proximity-penalized binary cross-entropy for ordinal solar flare
prediction, with the full desk-scale harness around it: class taxonomy
and weights, losses with analytic gradients, skill scores, a
deterministic data pipeline, a synthetic magnetogram generator, a
training loop with plateau scheduling and grid search, and a CLI."""

from .ordinal import (
    BinaryLabel,
    DEFAULT_THRESHOLD,
    FlareClass,
    OrdinalWeights,
    ThresholdSpec,
    binarize,
    class_from_flux,
    proximity_weights,
)
from .loss import (
    CurveTable,
    LossBatch,
    LossConfig,
    bce,
    bce_grad,
    bce_pp,
    bce_pp_grad,
    loss_curve,
    sigmoid,
)
from .metrics import (
    ConfusionMatrix,
    SkillScores,
    UndefinedScoreError,
    confusion_from_predictions,
    css,
    hss,
    skill_scores,
    tss,
)
from .pipeline import (
    AUGMENT_KINDS,
    DEFAULT_UNDERSAMPLE_RATES,
    LabeledSample,
    SplitAssignment,
    apply_bitmap,
    assign_partitions,
    augment,
    balance_training,
    balanced_counts,
    clip_flux,
    fit_512,
    label_window,
    max_flux_window,
    preprocess,
    scale_0_255,
    zero_noise,
)
from .synth import make_benchmark_dataset, synth_dataset
from .trainer import (
    EpochRecord,
    FeatureSplit,
    ModelSpec,
    SchedulerState,
    TrainConfig,
    TrainingDivergedError,
    evaluate,
    featurize,
    grid_search,
    scheduler_step,
    sgd_step,
    train,
)
from .benchmark import run_reference_benchmark

__version__ = "0.1.0"
