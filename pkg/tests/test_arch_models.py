"""Architecture tables, block variants, model forwards, checkpoints."""

import numpy as np
import pytest

from maldistill import ops
from maldistill.arch import (
    AggSpec,
    BUILTIN_NAMES,
    ArchitectureSpec,
    LayerSpec,
    VARIANTS,
    auto_spec,
    builtin_spec,
    latent_agg_spec,
    load_spec,
    save_spec,
)
from maldistill.blocks import make_block
from maldistill.model import (
    build_latent_agg,
    build_model,
    load_checkpoint,
    predict_logits,
    save_checkpoint,
)
from maldistill.tensor import no_grad

RNG = np.random.default_rng(99)

TINY = ArchitectureSpec(
    input_dim=24,
    blocks=(LayerSpec(5, 3, 1, 6), LayerSpec(8, 1, 0, 10)),
    head=((10, 8), (8, 2)),
)


def test_builtin_specs_exact_rows():
    ember = builtin_spec("ember")
    assert len(ember.blocks) == 5
    assert ember.blocks[0] == LayerSpec(7, 4, 1, 24)
    assert ember.head == ((384, 128), (128, 2))

    apiarg = builtin_spec("apiarg")
    assert len(apiarg.blocks) == 8
    assert apiarg.blocks[-1] == LayerSpec(3, 1, 0, 384)

    agg3 = builtin_spec("agg3_org")
    assert agg3.input_dim == 1084295
    assert len(agg3.blocks) == 8


def test_builtin_chains_end_at_one_with_standard_latent():
    for name in BUILTIN_NAMES:
        spec = builtin_spec(name)
        assert spec.chain_lengths()[-1] == 1
        assert spec.latent_dim == 384


def test_unknown_builtin_rejected():
    with pytest.raises(ValueError):
        builtin_spec("resnet50")


def test_spec_json_round_trip(tmp_path):
    spec = builtin_spec("opcode", variant="resnext1d")
    path = tmp_path / "spec.json"
    save_spec(path, spec)
    loaded = load_spec(path)
    assert loaded == spec

    agg = latent_agg_spec([builtin_spec("ember"), builtin_spec("apiarg")])
    save_spec(tmp_path / "agg.json", agg)
    assert load_spec(tmp_path / "agg.json") == agg


def test_spec_validation_rejects_bad_chains():
    with pytest.raises(ValueError):
        ArchitectureSpec(input_dim=100, blocks=(LayerSpec(3, 2, 0, 8),))
    with pytest.raises(ValueError):
        ArchitectureSpec(
            input_dim=24,
            blocks=(LayerSpec(5, 3, 1, 6), LayerSpec(8, 1, 0, 10)),
            head=((10, 8), (8, 3)),
        )


@pytest.mark.parametrize("variant", VARIANTS)
def test_block_output_geometry(variant):
    rng = np.random.default_rng(1)
    row = LayerSpec(7, 4, 1, 24)
    block = make_block(variant, row, in_channels=8, rng=rng)
    x = rng.standard_normal((2, 8, 100)).astype(np.float32)
    y = block(x, training=True)
    assert y.data.shape == (2, 24, ops.conv1d_out_len(100, 7, 4, 1))
    assert np.isfinite(y.data).all()


@pytest.mark.parametrize("variant", VARIANTS)
def test_zeroed_main_path_leaves_relu_of_shortcut(variant):
    rng = np.random.default_rng(2)
    row = LayerSpec(1, 1, 0, 6)
    block = make_block(variant, row, in_channels=6, rng=rng)
    for layer in block.main:
        for p in layer.params():
            p.data[...] = 0.0
    x = rng.standard_normal((3, 6, 10)).astype(np.float32)
    y = block(x, training=True)
    shortcut = ops.relu(
        block.shortcut_bn(block.shortcut_conv(x, True), True)
    )
    assert y.data.shape == x.shape
    np.testing.assert_allclose(y.data, shortcut.data, rtol=1e-5, atol=1e-6)


def test_resnext_block_output_channels_match_row():
    for out_ch in (24, 72, 384):
        block = make_block("resnext1d", LayerSpec(3, 1, 1, out_ch), 16,
                           rng=np.random.default_rng(3))
        y = block(np.ones((1, 16, 12), np.float32), training=True)
        assert y.data.shape[1] == out_ch
        # grouped middle conv: 8 groups
        assert block.main[3].groups == 8


def test_ember_forward_shapes():
    model = build_model(builtin_spec("ember"), seed=0)
    out = model.forward(RNG.standard_normal((3, 2381)).astype(np.float32))
    assert out.latent.shape == (3, 384)
    assert out.logits.shape == (3, 2)


def test_single_vector_forward():
    model = build_model(TINY, seed=0)
    out = model.forward(RNG.standard_normal(24).astype(np.float32))
    assert out.latent.shape == (1, 10)
    assert out.logits.shape == (1, 2)


def test_forward_rejects_wrong_width():
    model = build_model(TINY, seed=0)
    with pytest.raises(ValueError):
        model.forward(np.zeros(25, dtype=np.float32))


def test_zero_model_logits_equal_head_bias():
    model = build_model(TINY, seed=1)
    for p in model.params():
        p.data[...] = 0.0
    bias = np.array([0.3, -0.2], dtype=np.float32)
    model.head.layers[-1].bias.data[...] = bias
    out = model.forward(np.zeros((2, 24), dtype=np.float32), training=True)
    np.testing.assert_allclose(out.logits.data, np.tile(bias, (2, 1)), atol=1e-7)
    with no_grad():
        out_eval = model.forward(np.zeros((2, 24), dtype=np.float32), training=False)
    np.testing.assert_allclose(out_eval.logits.data, np.tile(bias, (2, 1)), atol=1e-7)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_full_dimension_forward_is_finite(name):
    spec = builtin_spec(name)
    model = build_model(spec, seed=7)
    x = np.random.default_rng(7).standard_normal((1, spec.input_dim)).astype(np.float32)
    with no_grad():
        out = model.forward(x)
    assert out.latent.shape == (1, 384)
    assert out.logits.shape == (1, 2)
    assert np.isfinite(out.latent.data).all()
    assert np.isfinite(out.logits.data).all()


def test_gradient_reaches_first_block():
    model = build_model(TINY, seed=3)
    x = RNG.standard_normal((4, 24)).astype(np.float32)
    out = model.forward(x, training=True)
    loss = ops.tsum(ops.mul(out.logits, out.logits))
    loss.backward()
    first_conv = model.extractor.blocks[0].main[0].weight
    assert first_conv.grad is not None
    assert np.abs(first_conv.grad).sum() > 0


def test_latent_agg_dims_and_symmetry():
    tiny_a = build_model(TINY, seed=4)
    tiny_b = build_model(TINY, seed=4)
    agg = build_latent_agg([tiny_a, tiny_b], seed=5)
    assert agg.spec.head[0][0] == 20
    x1 = RNG.standard_normal((3, 24)).astype(np.float32)
    x2 = RNG.standard_normal((3, 24)).astype(np.float32)
    out = agg.forward_views([x1, x2])
    assert out.latent.shape == (3, 20)
    assert out.logits.shape == (3, 2)

    # identical extractors and symmetric head halves: swapping views is a no-op
    w = agg.head.layers[0].weight.data
    w[10:, :] = w[:10, :]
    a = agg.forward_views([x1, x2]).logits.data
    b = agg.forward_views([x2, x1]).logits.data
    np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-6)


def test_latent_agg_head_widths_for_two_and_three_members():
    members2 = latent_agg_spec([builtin_spec("ember"), builtin_spec("apiarg")])
    assert members2.head == ((768, 128), (128, 2))
    members3 = latent_agg_spec(
        [builtin_spec("ember"), builtin_spec("opcode"), builtin_spec("apiarg")]
    )
    assert members3.head == ((1152, 128), (128, 2))


def test_latent_agg_rejects_mismatched_latents():
    other = ArchitectureSpec(
        input_dim=24,
        blocks=(LayerSpec(5, 3, 1, 6), LayerSpec(8, 1, 0, 12)),
        head=((12, 2),),
    )
    with pytest.raises(ValueError):
        AggSpec(members=(TINY, other))
    with pytest.raises(ValueError):
        build_latent_agg([build_model(TINY, seed=0), build_model(other, seed=0)])


def test_agg_model_trains_jointly():
    from maldistill.losses import ce_loss

    agg = build_model(AggSpec(members=(TINY, TINY)), seed=6)
    x = [RNG.standard_normal((4, 24)).astype(np.float32) for _ in range(2)]
    y = np.eye(2, dtype=np.float32)[[0, 1, 0, 1]]
    out = agg.forward_views(x, training=True)
    loss = ce_loss(ops.softmax_tau(out.logits, 1.0), y)
    loss.backward()
    for ex in agg.extractors:
        g = ex.blocks[0].main[0].weight.grad
        assert g is not None and np.abs(g).sum() > 0


def test_checkpoint_round_trip(tmp_path):
    model = build_model(TINY, seed=8)
    x = RNG.standard_normal((5, 24)).astype(np.float32)
    model.forward(x, training=True)  # move BN running stats off init
    before = predict_logits(model, [x])
    save_checkpoint(tmp_path / "ckpt", model, manifest_extra={"views": ["static"]})
    loaded, manifest = load_checkpoint(tmp_path / "ckpt")
    assert manifest["views"] == ["static"]
    after = predict_logits(loaded, [x])
    np.testing.assert_array_equal(before, after)


def test_checkpoint_round_trip_agg(tmp_path):
    agg = build_model(AggSpec(members=(TINY, TINY)), seed=9)
    views = [RNG.standard_normal((4, 24)).astype(np.float32) for _ in range(2)]
    before = predict_logits(agg, views)
    save_checkpoint(tmp_path / "agg", agg, manifest_extra={"views": ["static", "dynamic"]})
    loaded, _ = load_checkpoint(tmp_path / "agg")
    np.testing.assert_array_equal(before, predict_logits(loaded, views))


def test_auto_spec_closes_any_width():
    for dim in (2, 17, 300, 2381, 4096, 50000):
        spec = auto_spec(dim)
        assert spec.chain_lengths()[-1] == 1
        assert spec.latent_dim == 384


def test_tensor_serialization_round_trip(tmp_path):
    from maldistill.tensor import load_tensor, save_tensor
    from maldistill.util import FileFormatError

    arr = RNG.standard_normal((3, 4, 5)).astype(np.float32)
    path = tmp_path / "t.mdt"
    save_tensor(path, arr)
    np.testing.assert_array_equal(load_tensor(path), arr)

    blob_ok = path.read_bytes()
    assert blob_ok[:4] == b"MDT1"
    # rank then extents, little-endian u64 each, then f32 LE payload
    import struct as _struct

    assert _struct.unpack_from("<4Q", blob_ok, 4) == (3, 3, 4, 5)
    assert blob_ok[4 + 8 * 4 :] == arr.astype("<f4").tobytes()

    blob = path.read_bytes()
    bad = tmp_path / "bad.mdt"
    bad.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(FileFormatError) as err:
        load_tensor(bad)
    assert err.value.offset == 0

    trunc = tmp_path / "trunc.mdt"
    trunc.write_bytes(blob[:-8])
    with pytest.raises(FileFormatError):
        load_tensor(trunc)
