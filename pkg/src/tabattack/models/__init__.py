from .blackbox import BlackBoxModel, FunctionModel, predict_proba
from .forest import ForestConfig, ForestModel, train_random_forest
from .mlp import MlpConfig, MlpModel, mlp_forward, mlp_loss_and_grads, train_mlp
from .outcomes import (
    THRESHOLD,
    Metrics,
    OutcomePartition,
    classify,
    evaluate,
    metrics_from_partition,
    metrics_from_proba,
    partition_from_proba,
    partition_outcomes,
)
from .persist import FORMAT_VERSION, load_model, save_model

__all__ = [
    "BlackBoxModel",
    "FunctionModel",
    "predict_proba",
    "ForestConfig",
    "ForestModel",
    "train_random_forest",
    "MlpConfig",
    "MlpModel",
    "mlp_forward",
    "mlp_loss_and_grads",
    "train_mlp",
    "THRESHOLD",
    "Metrics",
    "OutcomePartition",
    "classify",
    "evaluate",
    "metrics_from_partition",
    "metrics_from_proba",
    "partition_from_proba",
    "partition_outcomes",
    "FORMAT_VERSION",
    "load_model",
    "save_model",
]
