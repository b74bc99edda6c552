"""Debiasing VAEs on confounded image data via latent disentanglement from a
small amount of emulated human feedback (match pairs plus sparse labels)."""

from .factors import BiasRule, Factor, FactorSpec
from .losses import LossBreakdown, LossWeights
from .model import LatentPartition, ModelConfig, ProbeBank, VaeModel
from .trainer import MatrixInputs, TrainingConfig, run_matrix, train

__version__ = "0.1.0"

__all__ = [
    "BiasRule",
    "Factor",
    "FactorSpec",
    "LatentPartition",
    "LossBreakdown",
    "LossWeights",
    "MatrixInputs",
    "ModelConfig",
    "ProbeBank",
    "TrainingConfig",
    "VaeModel",
    "run_matrix",
    "train",
    "__version__",
]
