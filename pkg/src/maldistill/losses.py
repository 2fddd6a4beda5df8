"""Classification and distillation losses.

The distillation objective is a convex combination of the hard-label
cross-entropy and a teacher-matching term: either a temperature-softened,
temperature-squared-scaled KL divergence or a squared distance between the
raw logit vectors. Teacher logits are always treated as constants; only
the student side receives gradients. Batched inputs reduce by mean over
samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .tensor import Tensor, record

LOSS_KINDS = ("kd_kl", "kd_mse")

# Hyper-parameter grid worth sweeping when tuning a distilled student.
RECOMMENDED_ALPHAS = (0.1, 0.3, 0.5, 0.7, 0.9)
RECOMMENDED_TAUS = (0.1, 1.0, 3.0, 5.0, 7.0, 10.0)

_CLAMP = 1e-12


@dataclass
class DistillConfig:
    """Distillation settings; ``tau`` is unused when ``loss_kind`` is kd_mse."""

    alpha: float = 0.5
    tau: float = 5.0
    loss_kind: str = "kd_mse"
    teacher_count: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.teacher_count < 1:
            raise ValueError(f"teacher_count must be >= 1, got {self.teacher_count}")

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "tau": self.tau,
            "loss_kind": self.loss_kind,
            "teacher_count": self.teacher_count,
        }


def _rows(a):
    a = np.asarray(a)
    return a[None, :] if a.ndim == 1 else a


def _const_logits(z):
    z = z.data if isinstance(z, Tensor) else np.asarray(z)
    return _rows(z)


def _softened(z, tau):
    s = z / tau
    s = s - s.max(axis=-1, keepdims=True)
    e = np.exp(s)
    p = e / e.sum(axis=-1, keepdims=True)
    return p, s - np.log(e.sum(axis=-1, keepdims=True))


def ce_loss(p, y):
    """Mean negative log-likelihood of one-hot targets under probabilities p."""
    pt = ops.as_tensor(p)
    squeeze = pt.ndim == 1
    pd = _rows(pt.data)
    yd = _rows(np.asarray(y, dtype=pd.dtype))
    if pd.shape != yd.shape:
        raise ValueError(f"probability/target shape mismatch: {pd.shape} vs {yd.shape}")
    n = pd.shape[0]
    clamped = np.maximum(pd, _CLAMP)
    value = -(yd * np.log(clamped)).sum() / n

    def backward(gy):
        if pt.needs_grad:
            dp = np.where(pd > _CLAMP, -yd / clamped, 0.0) * (float(gy) / n)
            pt.accumulate(dp[0] if squeeze else dp)

    return record(np.asarray(value, dtype=pd.dtype), (pt,), backward)


def kd_kl_term(z_teacher, z_student, tau):
    """Softened KL(teacher || student), scaled by tau^2; teacher is constant."""
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    zs = ops.as_tensor(z_student)
    squeeze = zs.ndim == 1
    zsd = _rows(zs.data)
    ztd = _const_logits(z_teacher).astype(zsd.dtype)
    if ztd.shape != zsd.shape:
        raise ValueError(f"logit shape mismatch: teacher {ztd.shape} vs student {zsd.shape}")
    n = zsd.shape[0]
    p_t, log_t = _softened(ztd, tau)
    p_s, log_s = _softened(zsd, tau)
    value = tau * tau * (p_t * (log_t - log_s)).sum() / n

    def backward(gy):
        if zs.needs_grad:
            dz = tau * (p_s - p_t) * (float(gy) / n)
            zs.accumulate(dz[0] if squeeze else dz)

    return record(np.asarray(value, dtype=zsd.dtype), (zs,), backward)


def kd_mse_term(z_teacher, z_student):
    """Mean squared Euclidean distance between logit vectors; teacher constant."""
    zs = ops.as_tensor(z_student)
    squeeze = zs.ndim == 1
    zsd = _rows(zs.data)
    ztd = _const_logits(z_teacher).astype(zsd.dtype)
    if ztd.shape != zsd.shape:
        raise ValueError(f"logit shape mismatch: teacher {ztd.shape} vs student {zsd.shape}")
    n = zsd.shape[0]
    diff = zsd - ztd
    value = (diff * diff).sum() / n

    def backward(gy):
        if zs.needs_grad:
            dz = 2.0 * diff * (float(gy) / n)
            zs.accumulate(dz[0] if squeeze else dz)

    return record(np.asarray(value, dtype=zsd.dtype), (zs,), backward)


def kd_loss(cfg, z_student, z_teacher, y):
    """alpha-weighted hard-label CE plus (1 - alpha)-weighted teacher term.

    At alpha == 1 this is exactly the cross-entropy and the teacher logits
    are never touched.
    """
    hard = ce_loss(ops.softmax_tau(z_student, 1.0), y)
    if cfg.alpha == 1.0:
        return hard
    if cfg.loss_kind == "kd_kl":
        soft = kd_kl_term(z_teacher, z_student, cfg.tau)
    else:
        soft = kd_mse_term(z_teacher, z_student)
    return ops.add(ops.scale(hard, cfg.alpha), ops.scale(soft, 1.0 - cfg.alpha))
