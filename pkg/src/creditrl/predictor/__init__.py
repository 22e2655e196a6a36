"""Learned balance-response simulator and its evaluation metrics."""

from .metrics import rmse, wape, weighted_f1
from .smote import SmoteError, SmoteResult, smote_nc
from .trees import CLASSIFICATION, REGRESSION, DecisionTree, NotFittedError, TreeModel
from .two_stage import (
    CATEGORICAL_FEATURES,
    DEFAULT_CUTOFF,
    FEATURE_NAMES,
    INACTIVE_OR_FULL_PAYER,
    LARGE,
    SMALL_MEDIUM,
    PredictorError,
    TrainingRow,
    TwoStageBalanceModel,
    TwoStageConfig,
    class_of,
    classes_of,
    evaluate_two_stage,
    fit_two_stage,
    predict_rbar,
    predictor_matrix,
    read_training_table,
    split_indices,
    training_arrays,
    write_training_table,
)
