"""Layer wrappers and the residual block family.

Every block is two paths summed and passed through a final relu: a main
feature path and a strided projection shortcut. The shortcut reuses the
row's (kernel, stride, padding) so both paths land on the same output
length by construction. Variants differ only in the main path wiring.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .arch import LayerSpec
from .tensor import parameter


def _kaiming_uniform(rng, shape, fan_in, dtype):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv1d:
    def __init__(self, in_channels, out_channels, kernel, stride=1, padding=0,
                 groups=1, rng=None, dtype=np.float32):
        if in_channels % groups or out_channels % groups:
            raise ValueError(
                f"channels ({in_channels}->{out_channels}) not divisible by groups={groups}"
            )
        self.stride = stride
        self.padding = padding
        self.groups = groups
        fan_in = (in_channels // groups) * kernel
        self.weight = parameter(
            _kaiming_uniform(rng, (out_channels, in_channels // groups, kernel), fan_in, dtype)
        )
        self.bias = parameter(np.zeros(out_channels, dtype=dtype))

    def __call__(self, x, training=False):
        return ops.conv1d(x, self.weight, self.bias, self.stride, self.padding, self.groups)

    def params(self):
        return [self.weight, self.bias]

    def state(self):
        return [("weight", self.weight.data), ("bias", self.bias.data)]


class BatchNorm1d:
    def __init__(self, channels, rng=None, dtype=np.float32, momentum=0.1, eps=1e-5):
        self.gamma = parameter(np.ones(channels, dtype=dtype))
        self.beta = parameter(np.zeros(channels, dtype=dtype))
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x, training=False):
        return ops.batchnorm1d(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            training, self.momentum, self.eps,
        )

    def params(self):
        return [self.gamma, self.beta]

    def state(self):
        return [
            ("gamma", self.gamma.data),
            ("beta", self.beta.data),
            ("running_mean", self.running_mean),
            ("running_var", self.running_var),
        ]


class ChannelNorm:
    def __init__(self, channels, rng=None, dtype=np.float32, eps=1e-5):
        self.gamma = parameter(np.ones(channels, dtype=dtype))
        self.beta = parameter(np.zeros(channels, dtype=dtype))
        self.eps = eps

    def __call__(self, x, training=False):
        return ops.channelnorm(x, self.gamma, self.beta, self.eps)

    def params(self):
        return [self.gamma, self.beta]

    def state(self):
        return [("gamma", self.gamma.data), ("beta", self.beta.data)]


class Activation:
    def __init__(self, kind):
        self.kind = kind

    def __call__(self, x, training=False):
        return ops.activation(x, self.kind)

    def params(self):
        return []

    def state(self):
        return []


class Linear:
    def __init__(self, in_dim, out_dim, rng=None, dtype=np.float32):
        self.weight = parameter(_kaiming_uniform(rng, (in_dim, out_dim), in_dim, dtype))
        self.bias = parameter(np.zeros(out_dim, dtype=dtype))

    def __call__(self, x, training=False):
        return ops.linear(x, self.weight, self.bias)

    def params(self):
        return [self.weight, self.bias]

    def state(self):
        return [("weight", self.weight.data), ("bias", self.bias.data)]


def _round_up(value, multiple):
    return ((value + multiple - 1) // multiple) * multiple


class ResidualBlock:
    """Two-path block; output length follows the row geometry on both paths."""

    def __init__(self, variant, spec: LayerSpec, in_channels, rng=None, dtype=np.float32):
        k, s, p, out_ch = spec.kernel, spec.stride, spec.padding, spec.out_channels
        self.variant = variant
        self.out_channels = out_ch
        main = []
        if variant in ("resnet1d_k3", "resnet1d_k1", "resnext1d", "inverted_resnext1d"):
            if variant == "inverted_resnext1d":
                mid = _round_up(4 * out_ch, 8)
            elif variant == "resnext1d":
                mid = _round_up(max(out_ch // 2, 1), 8)
            else:
                mid = max(out_ch // 2, 1)
            groups = 8 if variant in ("resnext1d", "inverted_resnext1d") else 1
            first_k, first_p = (1, 0) if variant == "resnet1d_k1" else (3, 1)
            main += [
                Conv1d(in_channels, mid, first_k, 1, first_p, rng=rng, dtype=dtype),
                BatchNorm1d(mid, dtype=dtype),
                Activation("relu"),
                Conv1d(mid, mid, k, s, p, groups=groups, rng=rng, dtype=dtype),
                BatchNorm1d(mid, dtype=dtype),
                Activation("relu"),
                Conv1d(mid, out_ch, 1, 1, 0, rng=rng, dtype=dtype),
                BatchNorm1d(out_ch, dtype=dtype),
            ]
        elif variant == "convnext1d":
            main += [
                Conv1d(in_channels, in_channels, k, s, p, groups=in_channels, rng=rng, dtype=dtype),
                ChannelNorm(in_channels, dtype=dtype),
                Conv1d(in_channels, 4 * in_channels, 1, 1, 0, rng=rng, dtype=dtype),
                Activation("gelu"),
                Conv1d(4 * in_channels, out_ch, 1, 1, 0, rng=rng, dtype=dtype),
            ]
        else:
            raise ValueError(f"unknown block variant {variant!r}")
        self.main = main
        self.shortcut_conv = Conv1d(in_channels, out_ch, k, s, p, rng=rng, dtype=dtype)
        self.shortcut_bn = BatchNorm1d(out_ch, dtype=dtype)

    def __call__(self, x, training=False):
        h = x
        for layer in self.main:
            h = layer(h, training)
        s = self.shortcut_bn(self.shortcut_conv(x, training), training)
        return ops.relu(ops.add(h, s))

    def params(self):
        out = []
        for layer in self.main:
            out.extend(layer.params())
        out.extend(self.shortcut_conv.params())
        out.extend(self.shortcut_bn.params())
        return out

    def state(self):
        out = []
        for i, layer in enumerate(self.main):
            out.extend((f"main.{i}.{n}", a) for n, a in layer.state())
        out.extend((f"shortcut.conv.{n}", a) for n, a in self.shortcut_conv.state())
        out.extend((f"shortcut.bn.{n}", a) for n, a in self.shortcut_bn.state())
        return out


def make_block(variant, spec, in_channels, rng=None, dtype=np.float32):
    """Build one residual block for a table row."""
    if rng is None:
        rng = np.random.default_rng(0)
    return ResidualBlock(variant, spec, in_channels, rng=rng, dtype=dtype)
