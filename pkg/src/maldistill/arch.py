"""Detector architecture descriptions.

An :class:`ArchitectureSpec` is the row list of one residual 1D conv
network: per block (kernel, stride, padding, out_channels), a block
variant, and the affine head dimensions. The builtin specs cover the five
feature views (ember, opcode, apiarg, and the two concatenated-original
variants); every builtin chain compresses its input length to exactly 1
with 384 final channels, so the flattened latent is 384-dim.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ops import conv1d_out_len
from .util import read_json, write_json

VARIANTS = (
    "resnet1d_k3",
    "resnet1d_k1",
    "resnext1d",
    "inverted_resnext1d",
    "convnext1d",
)

LATENT_DIM = 384
DEFAULT_HEAD = ((384, 128), (128, 2))


@dataclass(frozen=True)
class LayerSpec:
    """One block row: window geometry and output width."""

    kernel: int
    stride: int
    padding: int
    out_channels: int

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1 or self.out_channels < 1:
            raise ValueError(f"invalid layer row {self}")
        if self.padding < 0:
            raise ValueError(f"invalid padding in {self}")


@dataclass(frozen=True)
class ArchitectureSpec:
    input_dim: int
    blocks: tuple
    variant: str = "resnet1d_k3"
    head: tuple = DEFAULT_HEAD

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(
            self, "head", tuple((int(a), int(b)) for a, b in self.head)
        )
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown block variant {self.variant!r}")
        if not self.blocks:
            raise ValueError("architecture needs at least one block")
        self.validate()

    def chain_lengths(self):
        """Length after each block, starting from input_dim."""
        lengths = []
        length = self.input_dim
        for row in self.blocks:
            length = conv1d_out_len(length, row.kernel, row.stride, row.padding)
            lengths.append(length)
        return lengths

    @property
    def latent_dim(self):
        return self.blocks[-1].out_channels

    def validate(self):
        lengths = self.chain_lengths()
        if lengths[-1] != 1:
            raise ValueError(
                f"block chain must end at length 1, got {lengths[-1]} "
                f"(chain {lengths})"
            )
        if self.head[0][0] != self.latent_dim:
            raise ValueError(
                f"head input {self.head[0][0]} != latent width {self.latent_dim}"
            )
        for (_, out_a), (in_b, _) in zip(self.head, self.head[1:]):
            if out_a != in_b:
                raise ValueError(f"head dims do not chain: {self.head}")
        if self.head[-1][1] != 2:
            raise ValueError("head must end with 2 logits")

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "variant": self.variant,
            "blocks": [
                {
                    "kernel": b.kernel,
                    "stride": b.stride,
                    "padding": b.padding,
                    "out_channels": b.out_channels,
                }
                for b in self.blocks
            ],
            "head": [list(pair) for pair in self.head],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            input_dim=int(d["input_dim"]),
            blocks=tuple(
                LayerSpec(
                    int(b["kernel"]),
                    int(b["stride"]),
                    int(b["padding"]),
                    int(b["out_channels"]),
                )
                for b in d["blocks"]
            ),
            variant=d.get("variant", "resnet1d_k3"),
            head=tuple(tuple(pair) for pair in d.get("head", DEFAULT_HEAD)),
        )


@dataclass(frozen=True)
class AggSpec:
    """Latent-aggregation composite: per-view extractors plus a shared head."""

    members: tuple
    head: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValueError("aggregation needs at least one member")
        dims = {m.latent_dim for m in self.members}
        if len(dims) > 1:
            raise ValueError(f"member latent widths differ: {sorted(dims)}")
        if not self.head:
            total = sum(m.latent_dim for m in self.members)
            object.__setattr__(self, "head", ((total, 128), (128, 2)))

    @property
    def latent_dim(self):
        return sum(m.latent_dim for m in self.members)

    def to_dict(self):
        return {
            "members": [m.to_dict() for m in self.members],
            "head": [list(pair) for pair in self.head],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            members=tuple(ArchitectureSpec.from_dict(m) for m in d["members"]),
            head=tuple(tuple(pair) for pair in d["head"]),
        )


def _rows(rows):
    return tuple(LayerSpec(*r) for r in rows)


_BUILTIN_BLOCKS = {
    # (kernel, stride, padding, out_channels) per block
    "ember": _rows([(7, 4, 1, 24), (7, 5, 1, 48), (7, 4, 0, 96), (7, 4, 1, 192), (7, 1, 0, 384)]),
    "opcode": _rows(
        [(10, 5, 1, 16), (12, 5, 0, 24), (12, 5, 0, 48), (10, 5, 0, 96), (12, 5, 0, 192), (9, 1, 0, 384)]
    ),
    "apiarg": _rows(
        [
            (11, 5, 0, 16),
            (11, 5, 1, 24),
            (12, 7, 0, 48),
            (11, 5, 0, 72),
            (11, 7, 2, 96),
            (11, 8, 0, 192),
            (11, 5, 0, 240),
            (3, 1, 0, 384),
        ]
    ),
    "agg2_org": _rows(
        [
            (11, 6, 1, 16),
            (16, 8, 1, 24),
            (16, 8, 1, 48),
            (12, 4, 0, 96),
            (12, 5, 0, 192),
            (11, 4, 0, 192),
            (8, 4, 0, 384),
            (7, 1, 0, 384),
        ]
    ),
    "agg3_org": _rows(
        [
            (11, 6, 0, 16),
            (15, 8, 2, 24),
            (15, 8, 1, 48),
            (11, 4, 0, 96),
            (11, 5, 1, 192),
            (7, 5, 1, 192),
            (8, 4, 0, 384),
            (6, 1, 0, 384),
        ]
    ),
}

BUILTIN_INPUT_DIMS = {
    "ember": 2381,
    "opcode": 33338,
    "apiarg": 1048576,
    "agg2_org": 2381 + 1048576,
    "agg3_org": 2381 + 33338 + 1048576,
}

BUILTIN_NAMES = tuple(BUILTIN_INPUT_DIMS)


def builtin_spec(name, variant="resnet1d_k3"):
    """Architecture for one of the named feature views."""
    if name not in _BUILTIN_BLOCKS:
        raise ValueError(f"unknown builtin architecture {name!r}; choose from {BUILTIN_NAMES}")
    return ArchitectureSpec(
        input_dim=BUILTIN_INPUT_DIMS[name],
        blocks=_BUILTIN_BLOCKS[name],
        variant=variant,
        head=DEFAULT_HEAD,
    )


def auto_spec(input_dim, variant="resnet1d_k3", channels=(16, 32, 64, 128, 256)):
    """Design a compact chain for an arbitrary input width.

    Strided blocks shrink the length until a final stride-1 block can close
    it at exactly 1, where the channel count jumps to the standard latent
    width so the model can participate in latent aggregation.
    """
    if input_dim < 2:
        raise ValueError(f"input_dim must be >= 2, got {input_dim}")
    rows = []
    length = input_dim
    idx = 0
    while length > 16:
        kernel = 11 if length > 1000 else 9
        stride = 8 if length > 200 else 5
        rows.append(LayerSpec(kernel, stride, 0, channels[min(idx, len(channels) - 1)]))
        length = conv1d_out_len(length, kernel, stride, 0)
        idx += 1
    rows.append(LayerSpec(length, 1, 0, LATENT_DIM))
    return ArchitectureSpec(input_dim=input_dim, blocks=tuple(rows), variant=variant)


def latent_agg_spec(members):
    """Composite spec aggregating the latents of the given member specs."""
    return AggSpec(members=tuple(members))


def save_spec(path, spec):
    write_json(path, spec.to_dict())


def load_spec(path):
    d = read_json(path)
    if "members" in d:
        return AggSpec.from_dict(d)
    return ArchitectureSpec.from_dict(d)
