"""Static byte-level feature vector (2381 dims) for raw executables.

Three format-agnostic groups are computed directly from the byte stream:
a normalized byte histogram, a joint byte/entropy histogram over sliding
windows, and printable-string statistics. The remaining parsed groups
(file info, headers, sections, imports, exports, data directories) depend
on a structured parser this toolkit does not ship; their values are taken
from an optional sidecar document and zero-filled otherwise, keeping the
total width fixed.
"""

from __future__ import annotations

import re

import numpy as np

EMBER_DIM = 2381

ENTROPY_WINDOW = 2048
ENTROPY_STRIDE = 1024

# (group, width, source) in vector order; widths follow the reference
# feature set so sidecars produced by a full parser drop straight in.
GROUP_LAYOUT = (
    ("histogram", 256, "bytes"),
    ("byteentropy", 256, "bytes"),
    ("strings", 104, "bytes"),
    ("general", 10, "parsed"),
    ("header", 62, "parsed"),
    ("section", 255, "parsed"),
    ("imports", 1280, "parsed"),
    ("exports", 128, "parsed"),
    ("datadirectories", 30, "parsed"),
)

PARSED_GROUPS = tuple(name for name, _, src in GROUP_LAYOUT if src == "parsed")

_PRINTABLE = re.compile(rb"[\x20-\x7f]{5,}")
_PATHS = re.compile(rb"c:\\", re.IGNORECASE)
_URLS = re.compile(rb"https?://", re.IGNORECASE)
_REGISTRY = re.compile(rb"HKEY_")
_MZ = re.compile(rb"MZ")


def group_slices():
    out = {}
    start = 0
    for name, width, _ in GROUP_LAYOUT:
        out[name] = slice(start, start + width)
        start += width
    assert start == EMBER_DIM
    return out


_SLICES = group_slices()


def byte_histogram(data):
    counts = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=256)
    return counts.astype(np.float32) / max(counts.sum(), 1)


def _window_entropy_counts(block):
    """Coarse 16-bin byte histogram of a window plus its entropy bin.

    Bytes are bucketed by their high nibble; the entropy of that coarse
    distribution is doubled to land back on the 0..8-bit scale.
    """
    c = np.bincount(block >> 4, minlength=16)
    p = c.astype(np.float64) / len(block)
    nz = p > 0
    entropy = float(-(p[nz] * np.log2(p[nz])).sum() * 2)
    return min(int(entropy * 2), 15), c


def byte_entropy_histogram(data, window=ENTROPY_WINDOW, stride=ENTROPY_STRIDE):
    """Joint (entropy bin x coarse byte bin) histogram over sliding windows.

    A file shorter than one window contributes its single truncated window.
    """
    a = np.frombuffer(data, dtype=np.uint8)
    grid = np.zeros((16, 16), dtype=np.float64)
    if len(a) < window:
        ebin, counts = _window_entropy_counts(a)
        grid[ebin] += counts
    else:
        for start in range(0, len(a) - window + 1, stride):
            ebin, counts = _window_entropy_counts(a[start : start + window])
            grid[ebin] += counts
    flat = grid.reshape(-1)
    return (flat / max(flat.sum(), 1)).astype(np.float32)


def string_stats(data):
    """Statistics over printable runs of length >= 5.

    Order: count, mean length, total printable chars, the 96-bucket
    printable character distribution (normalized), character entropy, and
    counts of drive-path, URL, registry, and MZ markers.
    """
    strings = _PRINTABLE.findall(data)
    if strings:
        lengths = [len(s) for s in strings]
        avlength = sum(lengths) / len(lengths)
        shifted = np.frombuffer(b"".join(strings), dtype=np.uint8) - 0x20
        dist = np.bincount(shifted, minlength=96).astype(np.float64)
        total = dist.sum()
        p = dist / total
        nz = p > 0
        entropy = float(-(p[nz] * np.log2(p[nz])).sum())
    else:
        avlength = 0.0
        dist = np.zeros(96, dtype=np.float64)
        total = 0.0
        entropy = 0.0
    divisor = total if total > 0 else 1.0
    return np.hstack(
        [
            len(strings),
            avlength,
            total,
            dist / divisor,
            entropy,
            len(_PATHS.findall(data)),
            len(_URLS.findall(data)),
            len(_REGISTRY.findall(data)),
            len(_MZ.findall(data)),
        ]
    ).astype(np.float32)


def ember_lite(data, parsed=None):
    """Full fixed-width row for one file's raw bytes.

    ``parsed`` may supply any of the parsed group vectors by name; missing
    groups stay zero.
    """
    if not data:
        raise ValueError("empty byte string")
    row = np.zeros(EMBER_DIM, dtype=np.float32)
    row[_SLICES["histogram"]] = byte_histogram(data)
    row[_SLICES["byteentropy"]] = byte_entropy_histogram(data)
    row[_SLICES["strings"]] = string_stats(data)
    if parsed:
        for name, values in parsed.items():
            if name not in PARSED_GROUPS:
                raise ValueError(f"unknown parsed group {name!r}; expected {PARSED_GROUPS}")
            sl = _SLICES[name]
            values = np.asarray(values, dtype=np.float32)
            if values.shape != (sl.stop - sl.start,):
                raise ValueError(
                    f"parsed group {name!r} must have {sl.stop - sl.start} values, "
                    f"got {values.shape}"
                )
            row[sl] = values
    return row
