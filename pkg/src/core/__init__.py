"""
Core modules for Proj-BNN.

This package contains the inference engine:
- network: Architectures, forward pass, likelihoods, gradients
- optim: Adam and SGD over flat parameter vectors
- ensemble: MAP fit and cyclic-LR snapshot harvesting (stage 1)
- projector: Prediction-constrained autoencoder (stage 2)
- vi: Mean-field VI, Proj-BNN, BbB and ablations (stage 3)
- multitask: Per-task latents with a shared decoder
- metrics: Marginal log-likelihood, RMSE, bands, mode coverage
- statistics: logmeanexp, PCA, 2-means, seed summaries
- pipeline: Stage orchestration

The training modules depend on ``src.data`` and are imported from their
submodules (``src.core.vi``, ``src.core.pipeline``, ...).
"""

from .errors import (
    ArtifactError,
    ConfigError,
    DataValidationError,
    FingerprintMismatchError,
    NonFiniteError,
    ProjBNNError,
    ShapeMismatchError,
)
from .models import (
    FailureRecord,
    FailureStage,
    MeanFieldGaussian,
    Method,
    ObservationModel,
    PointMass,
    PriorSpec,
    SnapshotSet,
    TrainingTrace,
)
from .network import Activation, Architecture, WeightVector, forward, log_joint
from .metrics import EnsembleModel, EvaluationReport, marginal_test_ll, rmse

__all__ = [
    # Errors
    "ArtifactError",
    "ConfigError",
    "DataValidationError",
    "FingerprintMismatchError",
    "NonFiniteError",
    "ProjBNNError",
    "ShapeMismatchError",
    # Models
    "FailureRecord",
    "FailureStage",
    "MeanFieldGaussian",
    "Method",
    "ObservationModel",
    "PointMass",
    "PriorSpec",
    "SnapshotSet",
    "TrainingTrace",
    # Network
    "Activation",
    "Architecture",
    "WeightVector",
    "forward",
    "log_joint",
    # Metrics
    "EnsembleModel",
    "EvaluationReport",
    "marginal_test_ll",
    "rmse",
]
