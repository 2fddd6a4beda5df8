"""Dense tensors with a recorded reverse-mode gradient tape.

Working precision is float32; gradient checks build everything in float64
instead (dtype follows the arrays passed in). Every differentiable
operation links its output tensor back to its inputs, and
``Tensor.backward()`` replays those links in reverse topological order.
"""

from __future__ import annotations

import struct

import numpy as np

from .util import FileFormatError, MaldistillError

TENSOR_MAGIC = b"MDT1"

_grad_enabled = True


class no_grad:
    """Context manager that pauses tape recording (teacher inference, eval)."""

    def __enter__(self):
        global _grad_enabled
        self._saved = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, exc_type, exc, tb):
        global _grad_enabled
        _grad_enabled = self._saved
        return False


def grad_enabled():
    return _grad_enabled


class Tensor:
    """A numpy-backed value that remembers how it was computed."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None):
        if isinstance(data, np.ndarray):
            self.data = data
        elif isinstance(data, np.generic):
            self.data = np.asarray(data)
        else:
            self.data = np.asarray(data, dtype=np.float32)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def needs_grad(self):
        """True when gradients must flow into or through this tensor."""
        return self.requires_grad or self._backward is not None

    def accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def item(self):
        return float(self.data)

    def backward(self):
        """Accumulate gradients of this scalar into every reachable leaf."""
        if self.data.size != 1:
            raise ValueError(f"backward expects a scalar, got shape {self.shape}")
        if self._backward is None and not self.requires_grad:
            raise MaldistillError("backward called without a recorded forward pass")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        tag = self.name or "tensor"
        return f"Tensor({tag}, shape={self.shape}, dtype={self.data.dtype})"


def parameter(data, name=None):
    """A trainable leaf tensor."""
    return Tensor(np.asarray(data), requires_grad=True, name=name)


def record(data, inputs, backward):
    """Wrap an op result, attaching the tape node when recording is on.

    ``backward`` receives the output gradient and is responsible for calling
    ``accumulate`` on whichever inputs need it.
    """
    out = Tensor(data)
    if _grad_enabled and any(t.needs_grad for t in inputs if isinstance(t, Tensor)):
        out._parents = tuple(t for t in inputs if isinstance(t, Tensor))
        out._backward = backward
    return out


def save_tensor(path, array):
    """Serialize one array: magic, rank and extents as little-endian u64, f32 payload."""
    a = np.ascontiguousarray(np.asarray(array))
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<Q", a.ndim))
        for extent in a.shape:
            fh.write(struct.pack("<Q", extent))
        fh.write(a.astype("<f4", copy=False).tobytes())


def load_tensor(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != TENSOR_MAGIC:
        raise FileFormatError(f"bad tensor magic {blob[:4]!r}, expected {TENSOR_MAGIC!r}", offset=0)
    if len(blob) < 12:
        raise FileFormatError("truncated tensor header", offset=len(blob))
    (rank,) = struct.unpack_from("<Q", blob, 4)
    header_end = 12 + 8 * rank
    if len(blob) < header_end:
        raise FileFormatError("truncated tensor extents", offset=len(blob))
    shape = struct.unpack_from(f"<{rank}Q" if rank else "", blob, 12) if rank else ()
    count = 1
    for extent in shape:
        count *= extent
    expected = header_end + 4 * count
    if len(blob) != expected:
        raise FileFormatError(
            f"tensor payload length {len(blob) - header_end} != {4 * count}", offset=header_end
        )
    flat = np.frombuffer(blob, dtype="<f4", count=count, offset=header_end)
    return flat.reshape(shape).astype(np.float32)
