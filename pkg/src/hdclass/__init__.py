"""Hyperdimensional classification with a learner-aware dynamic encoder."""

from .core import (
    ClassModel,
    DimensionError,
    Encoder,
    bind,
    bundle,
    cosine_similarity,
    similarity_scores,
)
from .data import Dataset, synth_blobs
from .learner import (
    Outcome,
    OutcomeTriage,
    TrainConfig,
    TrainReport,
    adaptive_fit_epoch,
    effective_dimensionality,
    predict,
    top_k,
    train,
    triage,
)
from .serialize import load_model, save_model

__all__ = [
    "ClassModel", "DimensionError", "Encoder", "bind", "bundle",
    "cosine_similarity", "similarity_scores", "Dataset", "synth_blobs",
    "Outcome", "OutcomeTriage", "TrainConfig", "TrainReport",
    "adaptive_fit_epoch", "effective_dimensionality", "predict", "top_k",
    "train", "triage", "load_model", "save_model",
]

__version__ = "0.1.0"
