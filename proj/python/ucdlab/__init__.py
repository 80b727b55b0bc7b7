from ._ucdlab import (
    ConfigError,
    DimensionError,
    FormatError,
    TrainConfig,
    TrainingDiverged,
    ValidationError,
    closed_form_dstar,
    frechet_distance,
    load_config,
    optimize_tabular_d,
    oracle,
    precision_recall,
    probe,
    sample,
    train,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "FormatError",
    "TrainConfig",
    "TrainingDiverged",
    "ValidationError",
    "closed_form_dstar",
    "frechet_distance",
    "load_config",
    "optimize_tabular_d",
    "oracle",
    "precision_recall",
    "probe",
    "sample",
    "train",
]
