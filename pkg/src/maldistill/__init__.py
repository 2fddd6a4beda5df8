"""maldistill: desk-scale malware-detection pipelines.

Static and dynamic feature views, residual 1D conv detectors with a
from-scratch differentiable core, latent-representation aggregation,
teacher-student distillation, synthetic data and metrics, and a
fault-tolerant analysis-job orchestrator with a simulated sandbox
backend.
"""

from .arch import (
    AggSpec,
    ArchitectureSpec,
    BUILTIN_NAMES,
    LayerSpec,
    auto_spec,
    builtin_spec,
    latent_agg_spec,
)
from .losses import DistillConfig, ce_loss, kd_kl_term, kd_loss, kd_mse_term
from .metrics import Metrics, compute_metrics
from .model import (
    DetectionModel,
    LatentAggModel,
    ModelOutput,
    build_latent_agg,
    build_model,
    load_checkpoint,
    save_checkpoint,
)
from .ops import conv1d_out_len, softmax_tau
from .synth import MultiViewDataset, SyntheticSpec, generate_synthetic, split_dataset
from .tensor import Tensor, no_grad
from .training import (
    DistillData,
    LabeledViews,
    TeacherEnsemble,
    TrainConfig,
    ensemble_logits,
    train_distilled,
    train_supervised,
)

__version__ = "0.1.0"

__all__ = [
    "AggSpec",
    "ArchitectureSpec",
    "BUILTIN_NAMES",
    "DetectionModel",
    "DistillConfig",
    "DistillData",
    "LabeledViews",
    "LatentAggModel",
    "LayerSpec",
    "Metrics",
    "ModelOutput",
    "MultiViewDataset",
    "SyntheticSpec",
    "TeacherEnsemble",
    "Tensor",
    "TrainConfig",
    "auto_spec",
    "build_latent_agg",
    "build_model",
    "builtin_spec",
    "ce_loss",
    "compute_metrics",
    "conv1d_out_len",
    "ensemble_logits",
    "generate_synthetic",
    "kd_kl_term",
    "kd_loss",
    "kd_mse_term",
    "latent_agg_spec",
    "load_checkpoint",
    "no_grad",
    "save_checkpoint",
    "softmax_tau",
    "split_dataset",
    "train_distilled",
    "train_supervised",
]
