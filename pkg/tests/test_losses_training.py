"""Distillation losses, identities, and the training loops."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maldistill import ops
from maldistill.arch import ArchitectureSpec, LayerSpec
from maldistill.losses import (
    RECOMMENDED_ALPHAS,
    RECOMMENDED_TAUS,
    DistillConfig,
    ce_loss,
    kd_kl_term,
    kd_loss,
    kd_mse_term,
)
from maldistill.model import build_model
from maldistill.tensor import parameter
from maldistill.training import (
    DistillData,
    LabeledViews,
    TeacherEnsemble,
    TrainConfig,
    ensemble_logits,
    train_distilled,
    train_supervised,
)
from maldistill.util import TrainingDiverged

from oracles import check_gradients

TINY = ArchitectureSpec(
    input_dim=2,
    blocks=(LayerSpec(2, 1, 0, 8),),
    head=((8, 2),),
)


def _separable_data(n=64, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    signs = 2.0 * labels - 1.0
    x = np.stack([signs * 1.5, -signs * 1.0], axis=1)
    x += 0.05 * rng.standard_normal(x.shape)
    return LabeledViews(views=(x.astype(np.float32),), labels=labels)


# ----------------------------------------------------------------- ce loss


def test_ce_examples():
    assert ce_loss(np.array([1.0, 0.0]), np.array([1.0, 0.0])).item() == pytest.approx(0.0, abs=1e-9)
    assert ce_loss(np.array([0.75, 0.25]), np.array([1.0, 0.0])).item() == pytest.approx(0.2877, abs=1e-4)
    assert ce_loss(np.array([0.5, 0.5]), np.array([0.0, 1.0])).item() == pytest.approx(math.log(2), abs=1e-9)


def test_ce_clamps_zero_probabilities():
    value = ce_loss(np.array([0.0, 1.0]), np.array([1.0, 0.0])).item()
    assert value == pytest.approx(-math.log(1e-12), rel=1e-6)


# ----------------------------------------------------------------- kd-kl


def test_kl_zero_when_equal():
    z = np.array([1.3, -0.7])
    for tau in (0.1, 1.0, 5.0):
        assert kd_kl_term(z, z.copy(), tau).item() == pytest.approx(0.0, abs=1e-12)


def test_kl_hand_example():
    z_t = np.array([math.log(3.0), 0.0])  # softened to [0.75, 0.25] at tau 1
    z_s = np.array([0.0, 0.0])
    assert kd_kl_term(z_t, z_s, 1.0).item() == pytest.approx(0.1308, abs=1e-4)


@settings(max_examples=60, deadline=None)
@given(
    zt=st.lists(st.floats(-10, 10), min_size=2, max_size=4),
    zs=st.lists(st.floats(-10, 10), min_size=2, max_size=4),
    tau=st.sampled_from(RECOMMENDED_TAUS),
)
def test_kl_nonnegative(zt, zs, tau):
    size = min(len(zt), len(zs))
    value = kd_kl_term(np.array(zt[:size]), np.array(zs[:size]), tau).item()
    assert value >= -1e-10


def test_kl_rejects_bad_tau():
    with pytest.raises(ValueError):
        kd_kl_term(np.zeros(2), np.zeros(2), 0.0)


def test_kl_gradient_only_touches_student():
    z_t = parameter(np.array([2.0, -1.0]))
    z_s = parameter(np.array([0.5, 0.5]))
    kd_kl_term(z_t, z_s, 3.0).backward()
    assert z_t.grad is None
    assert z_s.grad is not None


# ----------------------------------------------------------------- kd-mse


def test_mse_examples():
    assert kd_mse_term(np.array([1.0, 2.0]), np.array([1.0, 2.0])).item() == 0.0
    assert kd_mse_term(np.array([1.0, 0.0]), np.array([0.0, 0.0])).item() == pytest.approx(1.0)
    assert kd_mse_term(np.array([2.0, -1.0]), np.array([0.0, 1.0])).item() == pytest.approx(8.0)


# ---------------------------------------------------------------- kd_loss


def test_kd_loss_alpha_one_is_exactly_ce():
    rng = np.random.default_rng(0)
    for kind in ("kd_kl", "kd_mse"):
        cfg = DistillConfig(alpha=1.0, tau=5.0, loss_kind=kind)
        for _ in range(5):
            z_s = rng.standard_normal(2)
            z_t = rng.standard_normal(2) * 100
            y = np.eye(2)[rng.integers(0, 2)]
            a = kd_loss(cfg, ops.as_tensor(z_s), z_t, y).item()
            b = ce_loss(ops.softmax_tau(z_s, 1.0), y).item()
            assert abs(a - b) <= 1e-12


def test_kd_loss_alpha_zero_equal_logits():
    cfg = DistillConfig(alpha=0.0, tau=2.0, loss_kind="kd_kl")
    z = np.array([0.4, -0.4])
    assert kd_loss(cfg, ops.as_tensor(z), z.copy(), np.array([1.0, 0.0])).item() == pytest.approx(0.0, abs=1e-12)


def test_kd_loss_mse_hand_example():
    cfg = DistillConfig(alpha=0.5, loss_kind="kd_mse")
    value = kd_loss(
        cfg, ops.as_tensor(np.array([0.0, 0.0])), np.array([1.0, 0.0]),
        np.array([1.0, 0.0]),
    ).item()
    assert value == pytest.approx(0.8466, abs=1e-4)


def test_recommended_grid_accepted_by_validation():
    for alpha in RECOMMENDED_ALPHAS:
        for tau in RECOMMENDED_TAUS:
            for kind in ("kd_kl", "kd_mse"):
                DistillConfig(alpha=alpha, tau=tau, loss_kind=kind)


def test_config_validation_rejects_out_of_range():
    with pytest.raises(ValueError):
        DistillConfig(alpha=1.5)
    with pytest.raises(ValueError):
        DistillConfig(tau=0.0)
    with pytest.raises(ValueError):
        DistillConfig(loss_kind="l1")
    with pytest.raises(ValueError):
        DistillConfig(teacher_count=0)


def test_kd_loss_gradients_over_recommended_grid():
    rng = np.random.default_rng(42)
    z_t = rng.standard_normal((3, 2))
    y = np.eye(2)[rng.integers(0, 2, 3)]
    base = rng.standard_normal((3, 2))
    for kind in ("kd_kl", "kd_mse"):
        for alpha in RECOMMENDED_ALPHAS:
            for tau in RECOMMENDED_TAUS:
                cfg = DistillConfig(alpha=alpha, tau=tau, loss_kind=kind)
                z_s = parameter(base.copy())
                check_gradients(lambda: kd_loss(cfg, z_s, z_t, y), [z_s])


def test_kl_gradient_aligns_with_ce_for_sharp_teacher():
    rng = np.random.default_rng(11)
    for _ in range(10):
        y = np.eye(2)[rng.integers(0, 2)]
        z_t = 12.0 * (2.0 * y - 1.0)  # teacher probabilities approach y
        z_s0 = rng.standard_normal(2)

        z_kl = parameter(z_s0.copy())
        kd_kl_term(z_t, z_kl, 1.0).backward()
        z_ce = parameter(z_s0.copy())
        ce_loss(ops.softmax_tau(z_ce, 1.0), y).backward()
        cosine = float(
            np.dot(z_kl.grad, z_ce.grad)
            / (np.linalg.norm(z_kl.grad) * np.linalg.norm(z_ce.grad))
        )
        assert cosine > 0


# --------------------------------------------------------------- ensemble


def test_ensemble_mean_and_single_member():
    class Stub:
        def __init__(self, z):
            self.z = np.asarray(z, dtype=np.float32)
            self.input_dims = (2,)

        def forward_views(self, views, training=False):
            from maldistill.model import ModelOutput
            from maldistill.tensor import Tensor

            n = views[0].shape[0]
            return ModelOutput(latent=None, logits=Tensor(np.tile(self.z, (n, 1))))

    x = [np.zeros((3, 2), dtype=np.float32)]
    one = ensemble_logits([Stub([1.0, 0.0])], x)
    np.testing.assert_allclose(one, np.tile([1.0, 0.0], (3, 1)))
    two = ensemble_logits([Stub([1.0, 0.0]), Stub([3.0, 2.0])], x)
    np.testing.assert_allclose(two, np.tile([2.0, 1.0], (3, 1)))
    same = ensemble_logits([Stub([0.3, -0.8])] * 4, x)
    np.testing.assert_allclose(same, np.tile([0.3, -0.8], (3, 1)), rtol=1e-6)
    assert same.argmax(axis=1).tolist() == one.argmax(axis=1).tolist() == [0, 0, 0]


def test_ensemble_rejects_empty():
    with pytest.raises(ValueError):
        TeacherEnsemble([])


# ---------------------------------------------------------------- training


def test_train_reaches_high_accuracy_on_separable_set():
    data = _separable_data(n=64, seed=1)
    tc = TrainConfig(epochs=20, lr=0.02, batch_size=16, seed=2, lr_drop_epochs=())
    model, log = train_supervised(TINY, data, tc)
    assert log[-1]["train_acc"] >= 0.99


def test_lr_schedule_drops_by_ten_at_epoch_50():
    data = _separable_data(n=10, seed=3)
    tc = TrainConfig(epochs=52, lr=0.02, batch_size=10, seed=0)
    _, log = train_supervised(TINY, data, tc)
    assert log[48]["lr"] == pytest.approx(0.02)
    assert log[49]["epoch"] == 50
    assert log[49]["lr"] == pytest.approx(0.002)
    assert log[51]["lr"] == pytest.approx(0.002)


def test_opcode_profile_drops_twice():
    tc = TrainConfig.for_view("opcode", epochs=3)
    assert tc.lr_drop_epochs == (30, 80)
    tc_default = TrainConfig.for_view("ember", epochs=3)
    assert tc_default.lr_drop_epochs == (50,)


def test_training_is_bitwise_deterministic():
    data = _separable_data(n=32, seed=4)
    tc = TrainConfig(epochs=5, batch_size=8, seed=9, lr_drop_epochs=())
    m1, log1 = train_supervised(TINY, data, tc)
    m2, log2 = train_supervised(TINY, data, tc)
    assert log1 == log2
    for (n1, a1), (n2, a2) in zip(m1.state(), m2.state()):
        assert n1 == n2
        assert a1.tobytes() == a2.tobytes()


def test_empty_dataset_rejected():
    empty = LabeledViews(views=(np.zeros((0, 2), np.float32),), labels=np.zeros(0))
    with pytest.raises(ValueError, match="empty"):
        train_supervised(TINY, empty, TrainConfig(epochs=1))


def test_divergence_aborts_with_diagnostic():
    from maldistill.tensor import Tensor
    from maldistill.training import _fit

    data = _separable_data(n=8, seed=5)
    model = build_model(TINY, seed=0)

    def bad_loss(logits, y_hot, idx):
        return Tensor(np.asarray(np.inf, dtype=np.float32))

    with pytest.raises(TrainingDiverged, match="epoch 1"):
        _fit(model, data.views, data.labels, TrainConfig(epochs=1, batch_size=8), bad_loss)


def test_distill_alpha_one_matches_supervised_bitwise():
    data = _separable_data(n=32, seed=6)
    tc = TrainConfig(epochs=4, batch_size=8, seed=13, lr_drop_epochs=())
    supervised, _ = train_supervised(TINY, data, tc)

    teacher, _ = train_supervised(TINY, data, TrainConfig(epochs=2, batch_size=8, seed=1))
    distill_data = DistillData(
        student_views=data.views, teacher_views=data.views, labels=data.labels
    )
    student, _ = train_distilled(
        TINY, distill_data, TeacherEnsemble([teacher]),
        DistillConfig(alpha=1.0, loss_kind="kd_mse"), tc,
    )
    for (n1, a1), (n2, a2) in zip(supervised.state(), student.state()):
        assert a1.tobytes() == a2.tobytes(), n1


def test_distill_runs_and_freezes_teacher():
    data = _separable_data(n=32, seed=7)
    tc = TrainConfig(epochs=3, batch_size=8, seed=3, lr_drop_epochs=())
    teacher, _ = train_supervised(TINY, data, tc)
    for p in teacher.params():
        p.zero_grad()
    frozen = [a.copy() for _, a in teacher.state()]
    distill_data = DistillData(
        student_views=data.views, teacher_views=data.views, labels=data.labels
    )
    for kind in ("kd_kl", "kd_mse"):
        student, log = train_distilled(
            TINY, distill_data, TeacherEnsemble([teacher]),
            DistillConfig(alpha=0.5, tau=5.0, loss_kind=kind), tc,
        )
        assert len(log) == 3
        assert np.isfinite(log[-1]["loss"])
    for (name, after), before in zip(teacher.state(), frozen):
        np.testing.assert_array_equal(after, before, err_msg=name)
    for p in teacher.params():
        assert p.grad is None


def test_distill_rejects_misaligned_views():
    with pytest.raises(ValueError, match="alignment"):
        DistillData(
            student_views=(np.zeros((4, 2), np.float32),),
            teacher_views=(np.zeros((5, 2), np.float32),),
            labels=np.zeros(4, dtype=np.int64),
        )
