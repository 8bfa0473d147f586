"""Arc stability analysis bindings."""

from ._core import (
    FEATURE_NAMES,
    ArcstabError,
    Model,
    Monitor,
    binomial_ci,
    config_hash,
    default_config,
    evaluate,
    extract,
    features,
    generate_phase,
    psd,
    synthesize_dataset,
    train,
)

__all__ = [
    "FEATURE_NAMES",
    "ArcstabError",
    "Model",
    "Monitor",
    "binomial_ci",
    "config_hash",
    "default_config",
    "evaluate",
    "extract",
    "features",
    "generate_phase",
    "psd",
    "synthesize_dataset",
    "train",
]
