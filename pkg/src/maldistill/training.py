"""Supervised and distilled training loops.

Runs are deterministic for a given seed: the initialization and shuffle
generators are spawned from the config seed, so two runs with identical
configs produce bitwise-identical parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .losses import DistillConfig, ce_loss, kd_loss
from .model import build_model, predict_logits
from .optim import SGD
from .tensor import no_grad
from .util import TrainingDiverged


@dataclass
class TrainConfig:
    epochs: int = 100
    lr: float = 0.02
    lr_drop_epochs: tuple = (50,)
    drop_factor: float = 10.0
    momentum: float = 0.9
    weight_decay: float = 1e-3
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        self.lr_drop_epochs = tuple(int(e) for e in self.lr_drop_epochs)
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")

    @classmethod
    def for_view(cls, view, **overrides):
        """Per-view schedule profile: opcode drops the lr twice, late."""
        drops = (30, 80) if view == "opcode" else (50,)
        overrides.setdefault("lr_drop_epochs", drops)
        return cls(**overrides)

    def to_dict(self):
        return {
            "epochs": self.epochs,
            "lr": self.lr,
            "lr_drop_epochs": list(self.lr_drop_epochs),
            "drop_factor": self.drop_factor,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
            "batch_size": self.batch_size,
            "seed": self.seed,
        }


@dataclass
class LabeledViews:
    """Aligned feature views plus binary labels (1 = malicious)."""

    views: tuple
    labels: np.ndarray

    def __post_init__(self):
        self.views = tuple(np.asarray(v, dtype=np.float32) for v in self.views)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if not self.views:
            raise ValueError("need at least one feature view")
        n = {v.shape[0] for v in self.views} | {self.labels.shape[0]}
        if len(n) != 1:
            raise ValueError(f"view/label sample counts differ: {sorted(n)}")
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be binary 0/1")

    @property
    def n(self):
        return self.labels.shape[0]


@dataclass
class DistillData:
    """Student and teacher inputs for the same sample set."""

    student_views: tuple
    teacher_views: tuple
    labels: np.ndarray

    def __post_init__(self):
        self.student_views = tuple(np.asarray(v, dtype=np.float32) for v in self.student_views)
        self.teacher_views = tuple(np.asarray(v, dtype=np.float32) for v in self.teacher_views)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        counts = {v.shape[0] for v in self.student_views + self.teacher_views}
        counts.add(self.labels.shape[0])
        if len(counts) != 1:
            raise ValueError(f"sample-alignment mismatch between views: {sorted(counts)}")


class TeacherEnsemble:
    """Trained teacher instances whose logits are averaged during transfer."""

    def __init__(self, members):
        self.members = list(members)
        if not self.members:
            raise ValueError("ensemble must not be empty")
        dims = {m.input_dims for m in self.members}
        if len(dims) != 1:
            raise ValueError(f"ensemble members disagree on input views: {dims}")

    def __len__(self):
        return len(self.members)

    def logits(self, views, training=False):
        views = [np.asarray(v, dtype=np.float32) for v in views]
        with no_grad():
            acc = None
            for member in self.members:
                z = member.forward_views(views, training=False).logits.data
                acc = z.copy() if acc is None else acc + z
        return acc / len(self.members)


def ensemble_logits(ensemble, views):
    """Arithmetic mean of member logits over the given views."""
    if not isinstance(ensemble, TeacherEnsemble):
        ensemble = TeacherEnsemble(ensemble)
    return ensemble.logits(views)


def one_hot(labels, classes=2):
    y = np.zeros((len(labels), classes), dtype=np.float32)
    y[np.arange(len(labels)), np.asarray(labels, dtype=np.int64)] = 1.0
    return y


def _fit(model, views, labels, tc, batch_loss):
    """Shared epoch/batch loop; ``batch_loss(logits, y1hot, idx)`` builds the loss."""
    n = labels.shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    y_hot = one_hot(labels)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([tc.seed, 1]))
    opt = SGD(model.params(), tc.lr, tc.momentum, tc.weight_decay)
    log = []
    lr = tc.lr
    for epoch in range(1, tc.epochs + 1):
        if epoch in tc.lr_drop_epochs:
            lr = lr / tc.drop_factor
            opt.lr = lr
        perm = shuffle_rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for start in range(0, n, tc.batch_size):
            idx = perm[start : start + tc.batch_size]
            batch_views = [v[idx] for v in views]
            out = model.forward_views(batch_views, training=True)
            loss = batch_loss(out.logits, y_hot[idx], idx)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss {value} at epoch {epoch}, batch starting {start}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            total_loss += value * len(idx)
            correct += int((out.logits.data.argmax(axis=1) == labels[idx]).sum())
        log.append(
            {
                "epoch": epoch,
                "lr": lr,
                "loss": total_loss / n,
                "train_acc": correct / n,
            }
        )
    return log


def train_supervised(spec, data: LabeledViews, tc: TrainConfig):
    """Fit a model from scratch on hard labels with the step-drop schedule."""
    model = build_model(spec, rng=np.random.default_rng(np.random.SeedSequence([tc.seed, 0])))
    if len(data.views) != len(model.input_dims):
        raise ValueError(
            f"dataset has {len(data.views)} views, model expects {len(model.input_dims)}"
        )
    for v, d in zip(data.views, model.input_dims):
        if v.shape[1] != d:
            raise ValueError(f"view width {v.shape[1]} does not match model input {d}")

    def batch_loss(logits, y_hot, idx):
        return ce_loss(ops.softmax_tau(logits, 1.0), y_hot)

    log = _fit(model, data.views, data.labels, tc, batch_loss)
    return model, log


def train_distilled(student_spec, data: DistillData, ensemble, cfg: DistillConfig,
                    tc: TrainConfig):
    """Fit a student on its own views while matching frozen teacher logits.

    Teacher logits are computed once per batch with no tape; at
    ``cfg.alpha == 1`` the teacher is never evaluated and the run follows
    the supervised trajectory exactly.
    """
    cfg.validate()
    if not isinstance(ensemble, TeacherEnsemble):
        ensemble = TeacherEnsemble(ensemble)
    student = build_model(
        student_spec, rng=np.random.default_rng(np.random.SeedSequence([tc.seed, 0]))
    )
    if len(data.student_views) != len(student.input_dims):
        raise ValueError("student views do not match the student model")

    def batch_loss(logits, y_hot, idx):
        if cfg.alpha == 1.0:
            return ce_loss(ops.softmax_tau(logits, 1.0), y_hot)
        z_teacher = ensemble.logits([v[idx] for v in data.teacher_views])
        return kd_loss(cfg, logits, z_teacher, y_hot)

    log = _fit(student, data.student_views, data.labels, tc, batch_loss)
    return student, log


def accuracy(model, views, labels, batch_size=256):
    logits = predict_logits(model, views, batch_size=batch_size)
    return float((logits.argmax(axis=1) == np.asarray(labels)).mean())
