"""Detector models: single-view networks and latent-aggregation composites.

A single-view model is a chain of residual blocks that compresses the
input vector to a latent (final channels at length 1) followed by an
affine head producing 2 logits. A latent-aggregation model runs one
extractor per feature view, concatenates the equal-width latents, and
classifies with its own head; the whole composite is differentiable so
extractors and head train jointly.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

import numpy as np

from . import ops
from .arch import AggSpec, ArchitectureSpec
from .blocks import Linear, make_block
from .tensor import Tensor, load_tensor, no_grad, save_tensor
from .util import read_json, write_json


@dataclass
class ModelOutput:
    latent: Tensor
    logits: Tensor


def _as_batch(x, input_dim):
    if isinstance(x, Tensor):
        data = x.data
    else:
        data = np.asarray(x, dtype=np.float32)
        x = None
    squeeze = data.ndim == 1
    if squeeze:
        data = data[None, :]
    if data.ndim != 2 or data.shape[1] != input_dim:
        raise ValueError(f"expected ({input_dim},) or (N, {input_dim}) input, got {data.shape}")
    if x is not None:
        t = ops.reshape(x, (data.shape[0], 1, data.shape[1]))
    else:
        t = Tensor(data.reshape(data.shape[0], 1, data.shape[1]))
    return t, squeeze


class FeatureExtractor:
    """Residual block chain mapping a flat feature vector to its latent."""

    def __init__(self, spec: ArchitectureSpec, rng, dtype=np.float32):
        self.spec = spec
        self.blocks = []
        in_ch = 1
        for row in spec.blocks:
            self.blocks.append(make_block(spec.variant, row, in_ch, rng=rng, dtype=dtype))
            in_ch = row.out_channels
        self.latent_dim = spec.latent_dim

    def forward(self, x, training=False):
        t, _ = _as_batch(x, self.spec.input_dim)
        for block in self.blocks:
            t = block(t, training)
        return ops.reshape(t, (t.shape[0], self.latent_dim))

    def params(self):
        out = []
        for block in self.blocks:
            out.extend(block.params())
        return out

    def state(self):
        out = []
        for i, block in enumerate(self.blocks):
            out.extend((f"blocks.{i}.{n}", a) for n, a in block.state())
        return out


class AffineHead:
    """Stack of affine layers with relu between them; final layer emits logits."""

    def __init__(self, dims, rng, dtype=np.float32):
        self.layers = [Linear(a, b, rng=rng, dtype=dtype) for a, b in dims]

    def forward(self, latent, training=False):
        h = latent
        for i, layer in enumerate(self.layers):
            h = layer(h, training)
            if i < len(self.layers) - 1:
                h = ops.relu(h)
        return h

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def state(self):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend((f"head.{i}.{n}", a) for n, a in layer.state())
        return out


class DetectionModel:
    """Single-view detector: extractor plus head."""

    kind = "single"

    def __init__(self, spec: ArchitectureSpec, rng, dtype=np.float32):
        self.spec = spec
        self.extractor = FeatureExtractor(spec, rng, dtype=dtype)
        self.head = AffineHead(spec.head, rng, dtype=dtype)

    @property
    def input_dims(self):
        return (self.spec.input_dim,)

    def forward(self, x, training=False):
        latent = self.extractor.forward(x, training)
        logits = self.head.forward(latent, training)
        return ModelOutput(latent=latent, logits=logits)

    def forward_views(self, views, training=False):
        (x,) = views
        return self.forward(x, training)

    def params(self):
        return self.extractor.params() + self.head.params()

    def state(self):
        out = [(f"extractor.{n}", a) for n, a in self.extractor.state()]
        out.extend(self.head.state())
        return out

    def spec_dict(self):
        return self.spec.to_dict()


class LatentAggModel:
    """Multi-view detector over concatenated extractor latents."""

    kind = "latent_agg"

    def __init__(self, spec: AggSpec, rng, dtype=np.float32):
        self.spec = spec
        self.extractors = [FeatureExtractor(m, rng, dtype=dtype) for m in spec.members]
        self.head = AffineHead(spec.head, rng, dtype=dtype)

    @classmethod
    def from_parts(cls, spec, extractors, head):
        model = cls.__new__(cls)
        model.spec = spec
        model.extractors = list(extractors)
        model.head = head
        return model

    @property
    def input_dims(self):
        return tuple(m.input_dim for m in self.spec.members)

    def forward_views(self, views, training=False):
        if len(views) != len(self.extractors):
            raise ValueError(f"expected {len(self.extractors)} views, got {len(views)}")
        latents = [ex.forward(x, training) for ex, x in zip(self.extractors, views)]
        latent = ops.concat(latents, axis=1)
        logits = self.head.forward(latent, training)
        return ModelOutput(latent=latent, logits=logits)

    def params(self):
        out = []
        for ex in self.extractors:
            out.extend(ex.params())
        out.extend(self.head.params())
        return out

    def state(self):
        out = []
        for i, ex in enumerate(self.extractors):
            out.extend((f"extractors.{i}.{n}", a) for n, a in ex.state())
        out.extend(self.head.state())
        return out

    def spec_dict(self):
        return self.spec.to_dict()


def build_model(spec, seed=0, rng=None, dtype=np.float32):
    """Instantiate a model from a spec with a deterministic init stream."""
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
    if isinstance(spec, AggSpec):
        return LatentAggModel(spec, rng, dtype=dtype)
    return DetectionModel(spec, rng, dtype=dtype)


def build_latent_agg(extractors, head_dims=None, rng=None, seed=0):
    """Compose already-built models/extractors into a latent-aggregation model.

    Members must emit equal-width latents (the equal-contribution
    precondition); the new head is initialized fresh.
    """
    members = [m.extractor if isinstance(m, DetectionModel) else m for m in extractors]
    if not members:
        raise ValueError("need at least one extractor")
    widths = {m.latent_dim for m in members}
    if len(widths) > 1:
        raise ValueError(f"extractor latent widths differ: {sorted(widths)}")
    spec = AggSpec(members=tuple(m.spec for m in members))
    if head_dims is not None:
        spec = AggSpec(members=spec.members, head=tuple(tuple(p) for p in head_dims))
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
    dtype = members[0].params()[0].dtype
    head = AffineHead(spec.head, rng, dtype=dtype)
    return LatentAggModel.from_parts(spec, members, head)


def predict_logits(model, views, batch_size=256):
    """Full-dataset logits in eval mode, no tape."""
    views = [np.asarray(v, dtype=np.float32) for v in views]
    n = views[0].shape[0]
    out = np.zeros((n, 2), dtype=np.float32)
    with no_grad():
        for start in range(0, n, batch_size):
            sl = slice(start, min(start + batch_size, n))
            out[sl] = model.forward_views([v[sl] for v in views], training=False).logits.data
    return out


def _safe_name(name):
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name)


def save_checkpoint(directory, model, manifest_extra=None):
    """Write manifest.json plus one tensor file per parameter/buffer."""
    os.makedirs(directory, exist_ok=True)
    entries = []
    for i, (name, array) in enumerate(model.state()):
        fname = f"{i:04d}_{_safe_name(name)}.mdt"
        save_tensor(os.path.join(directory, fname), array)
        entries.append({"name": name, "file": fname, "shape": list(array.shape)})
    manifest = {
        "kind": model.kind,
        "spec": model.spec_dict(),
        "tensors": entries,
    }
    if manifest_extra:
        manifest.update(manifest_extra)
    write_json(os.path.join(directory, "manifest.json"), manifest)


def load_checkpoint(directory, dtype=np.float32):
    """Rebuild a model from a checkpoint directory."""
    manifest = read_json(os.path.join(directory, "manifest.json"))
    if manifest["kind"] == "latent_agg":
        spec = AggSpec.from_dict(manifest["spec"])
    else:
        spec = ArchitectureSpec.from_dict(manifest["spec"])
    model = build_model(spec, seed=0, dtype=dtype)
    arrays = dict(model.state())
    for entry in manifest["tensors"]:
        loaded = load_tensor(os.path.join(directory, entry["file"])).astype(dtype)
        target = arrays[entry["name"]]
        if target.shape != loaded.shape:
            raise ValueError(
                f"checkpoint tensor {entry['name']} shape {loaded.shape} != {target.shape}"
            )
        target[...] = loaded
    return model, manifest
