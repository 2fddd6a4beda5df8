"""Feature matrices and their on-disk container.

Binary layout: magic ``MDF1``, a length-prefixed view tag, sample and
feature counts as little-endian u64, one storage byte (0 dense, 1
sparse-binary), then the payload. Dense payload is row-major float32;
sparse payload stores each row as a varint count followed by the first
index and successive index gaps, all varint-encoded. A JSON sidecar
manifest carries sample ids, labels, and provenance.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..util import FileFormatError, read_json, write_json

MATRIX_MAGIC = b"MDF1"

VIEW_TAGS = ("ember", "opcode", "apiarg", "aggregated")

_DENSE = 0
_SPARSE = 1


@dataclass
class FeatureMatrix:
    """Dense real or sparse-binary rows for one feature view."""

    view: str
    n_features: int
    dense: np.ndarray | None = None
    rows: list | None = None
    vocab: list | None = None

    def __post_init__(self):
        if (self.dense is None) == (self.rows is None):
            raise ValueError("exactly one of dense/rows must be set")
        if self.dense is not None:
            self.dense = np.asarray(self.dense, dtype=np.float32)
            if self.dense.ndim != 2 or self.dense.shape[1] != self.n_features:
                raise ValueError(
                    f"dense block must be (n, {self.n_features}), got {self.dense.shape}"
                )
        else:
            self.rows = [np.asarray(r, dtype=np.int64) for r in self.rows]
            for i, r in enumerate(self.rows):
                if r.size and (r[0] < 0 or r[-1] >= self.n_features):
                    raise ValueError(f"row {i} has indices outside [0, {self.n_features})")
                if r.size > 1 and not (np.diff(r) > 0).all():
                    raise ValueError(f"row {i} indices are not strictly increasing")

    @property
    def n_samples(self):
        return self.dense.shape[0] if self.dense is not None else len(self.rows)

    @property
    def storage(self):
        return "dense" if self.dense is not None else "sparse"

    def to_dense(self):
        """Materialize as float32; sparse rows become 0/1 indicator rows."""
        if self.dense is not None:
            return self.dense
        out = np.zeros((len(self.rows), self.n_features), dtype=np.float32)
        for i, r in enumerate(self.rows):
            out[i, r] = 1.0
        return out

    def subset(self, idx):
        if self.dense is not None:
            return FeatureMatrix(self.view, self.n_features, dense=self.dense[idx],
                                 vocab=self.vocab)
        return FeatureMatrix(self.view, self.n_features,
                             rows=[self.rows[i] for i in idx], vocab=self.vocab)

    def select_columns(self, kept):
        """Project onto the kept (sorted ascending) column indices."""
        kept = np.asarray(sorted(kept), dtype=np.int64)
        if self.dense is not None:
            return FeatureMatrix(self.view, len(kept), dense=self.dense[:, kept],
                                 vocab=[self.vocab[k] for k in kept] if self.vocab else None)
        pos = {int(c): i for i, c in enumerate(kept)}
        rows = []
        for r in self.rows:
            rows.append(np.asarray(sorted(pos[c] for c in r.tolist() if c in pos), dtype=np.int64))
        return FeatureMatrix(self.view, len(kept), rows=rows,
                             vocab=[self.vocab[k] for k in kept] if self.vocab else None)


def _write_varint(out, value):
    if value < 0:
        raise ValueError("varint must be non-negative")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _read_varint(blob, offset):
    shift = 0
    value = 0
    while True:
        if offset >= len(blob):
            raise FileFormatError("truncated varint", offset=offset)
        byte = blob[offset]
        offset += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, offset
        shift += 7


def store_feature_file(path, matrix: FeatureMatrix):
    with open(path, "wb") as fh:
        tag = matrix.view.encode("utf-8")
        if len(tag) > 255:
            raise ValueError("view tag too long")
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<B", len(tag)))
        fh.write(tag)
        fh.write(struct.pack("<QQB", matrix.n_samples, matrix.n_features,
                             _DENSE if matrix.dense is not None else _SPARSE))
        if matrix.dense is not None:
            fh.write(matrix.dense.astype("<f4", copy=False).tobytes())
        else:
            payload = bytearray()
            for row in matrix.rows:
                _write_varint(payload, len(row))
                prev = None
                for idx in row.tolist():
                    _write_varint(payload, idx if prev is None else idx - prev)
                    prev = idx
            fh.write(bytes(payload))


def load_feature_file(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MATRIX_MAGIC:
        raise FileFormatError(
            f"bad feature-file magic {blob[:4]!r}, expected {MATRIX_MAGIC!r}", offset=0
        )
    if len(blob) < 5:
        raise FileFormatError("truncated header", offset=len(blob))
    tag_len = blob[4]
    header_end = 5 + tag_len + 17
    if len(blob) < header_end:
        raise FileFormatError("truncated header", offset=len(blob))
    view = blob[5 : 5 + tag_len].decode("utf-8")
    n_samples, n_features, storage = struct.unpack_from("<QQB", blob, 5 + tag_len)
    offset = header_end
    if storage == _DENSE:
        count = n_samples * n_features
        if len(blob) - offset != 4 * count:
            raise FileFormatError(
                f"dense payload is {len(blob) - offset} bytes, expected {4 * count}",
                offset=offset,
            )
        dense = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        return FeatureMatrix(view, int(n_features),
                             dense=dense.reshape(n_samples, n_features).astype(np.float32))
    if storage != _SPARSE:
        raise FileFormatError(f"unknown storage kind {storage}", offset=5 + tag_len + 16)
    rows = []
    for _ in range(n_samples):
        count, offset = _read_varint(blob, offset)
        indices = np.empty(count, dtype=np.int64)
        prev = 0
        for j in range(count):
            delta, offset = _read_varint(blob, offset)
            prev = delta if j == 0 else prev + delta
            indices[j] = prev
        rows.append(indices)
    if offset != len(blob):
        raise FileFormatError(f"{len(blob) - offset} trailing bytes", offset=offset)
    return FeatureMatrix(view, int(n_features), rows=rows)


def write_manifest(path, matrix: FeatureMatrix, sample_ids=None, labels=None,
                   provenance=None):
    """JSON sidecar describing a feature file."""
    doc = {
        "view": matrix.view,
        "n_samples": matrix.n_samples,
        "n_features": matrix.n_features,
        "storage": matrix.storage,
        "sample_ids": list(sample_ids) if sample_ids is not None else None,
        "labels": [int(v) for v in labels] if labels is not None else None,
        "provenance": provenance or {},
    }
    if matrix.vocab is not None:
        doc["vocab"] = list(matrix.vocab)
    write_json(path, doc)


def read_manifest(path):
    return read_json(path)
