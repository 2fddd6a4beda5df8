"""Dynamic-analysis token features hashed into a fixed-width binary vector.

Each monitored call contributes one token per argument: the normalized
call name joined with the argument key and a category for the value.
Tokens map to vector indices through MurmurHash3 (x86 32-bit, seed 0)
modulo the vector width; rows are presence bits, so repeated tokens are
idempotent and the hash sign is ignored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .store import FeatureMatrix

HASH_DIM = 1 << 20
HASH_SEED = 0

# Longest match first; at most one suffix is removed per name.
NAME_SUFFIXES = ("ExW", "ExA", "Ex", "W", "A")

_COMMAND_PREFIXES = (
    "cmd.exe", "cmd /", "powershell", "rundll32", "regsvr32", "wscript", "cscript",
)

_PATH_CATEGORIES = (
    ("system32", "system32"),
    ("\\temp", "temp"),
    ("/tmp", "temp"),
    ("%temp%", "temp"),
    ("\\windows", "windows"),
    ("program files", "programfiles"),
)


@dataclass
class ApiCallRecord:
    """One monitored call: name plus (key, raw value) argument pairs."""

    api_name: str
    args: list = field(default_factory=list)

    def __post_init__(self):
        if not self.api_name:
            raise ValueError("api_name must be non-empty")


def murmur3_x86_32(data, seed=HASH_SEED):
    """MurmurHash3 x86 32-bit of a byte string, as an unsigned int."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    c1, c2 = 0xCC9E2D51, 0x1B873593
    h = seed & 0xFFFFFFFF
    length = len(data)
    rounded = length - (length & 3)
    for i in range(0, rounded, 4):
        k = int.from_bytes(data[i : i + 4], "little")
        k = (k * c1) & 0xFFFFFFFF
        k = ((k << 15) | (k >> 17)) & 0xFFFFFFFF
        k = (k * c2) & 0xFFFFFFFF
        h ^= k
        h = ((h << 13) | (h >> 19)) & 0xFFFFFFFF
        h = (h * 5 + 0xE6546B64) & 0xFFFFFFFF
    k = 0
    tail = data[rounded:]
    if len(tail) >= 3:
        k ^= tail[2] << 16
    if len(tail) >= 2:
        k ^= tail[1] << 8
    if len(tail) >= 1:
        k ^= tail[0]
        k = (k * c1) & 0xFFFFFFFF
        k = ((k << 15) | (k >> 17)) & 0xFFFFFFFF
        k = (k * c2) & 0xFFFFFFFF
        h ^= k
    h ^= length
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & 0xFFFFFFFF
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & 0xFFFFFFFF
    h ^= h >> 16
    return h


def normalize_api_name(name):
    """Strip exactly one wide/ansi/extended suffix, longest match first."""
    for suffix in NAME_SUFFIXES:
        if name.endswith(suffix) and len(name) > len(suffix):
            return name[: -len(suffix)]
    return name


def int_bin(value):
    """Logarithmic bin index: floor(log2(v + 1)), negatives clamped to 0."""
    v = max(int(value), 0)
    return int(math.floor(math.log2(v + 1)))


def categorize_value(value):
    """Collapse a raw argument value to a compact category token."""
    if value is None:
        return "none"
    if isinstance(value, bool):
        return f"int_bin:{int_bin(int(value))}"
    if isinstance(value, (int, float)):
        return f"int_bin:{int_bin(value)}"
    text = str(value)
    low = text.lower().strip().strip('"')
    if low.startswith("hkey_"):
        hive = low.split("\\", 1)[0].split("/", 1)[0]
        return f"reg:{hive}"
    if low.startswith(("http://", "https://", "ftp://", "www.")):
        return "url"
    if low.startswith(_COMMAND_PREFIXES):
        return "cmd"
    looks_like_path = ":\\" in low or "\\" in low or "/" in low
    if looks_like_path:
        for needle, category in _PATH_CATEGORIES:
            if needle in low:
                return category
        return "generic_path"
    return low


def api_arg_tokens(record: ApiCallRecord):
    """Tokens for one call: ``name|key=category`` per argument.

    A call without arguments still contributes its bare normalized name so
    the call's presence is represented.
    """
    name = normalize_api_name(record.api_name)
    if not record.args:
        return [name]
    return [f"{name}|{key}={categorize_value(value)}" for key, value in record.args]


def hash_vectorize(tokens, dim=HASH_DIM):
    """Sparse presence row: token index = murmur3(token, seed 0) mod dim."""
    if dim <= 0 or dim & (dim - 1):
        raise ValueError(f"dim must be a power of two, got {dim}")
    hits = {murmur3_x86_32(t) % dim for t in tokens}
    return np.asarray(sorted(hits), dtype=np.int64)


def parse_behavior_report(doc):
    """Extract call records from a sandbox behavior report (JSON subset).

    Accepts either the nested ``behavior.processes[].calls[]`` layout or a
    flat top-level ``calls`` list. Arguments may be a mapping or a list of
    ``{"name": ..., "value": ...}`` objects.
    """
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    calls = []
    if "calls" in doc:
        raw_calls = doc["calls"]
    else:
        raw_calls = []
        for proc in doc.get("behavior", {}).get("processes", []):
            raw_calls.extend(proc.get("calls", []))
    for call in raw_calls:
        api = call.get("api")
        if not api:
            continue
        raw_args = call.get("arguments", {})
        if isinstance(raw_args, dict):
            args = sorted(raw_args.items())
        else:
            args = [(a.get("name", ""), a.get("value")) for a in raw_args]
        calls.append(ApiCallRecord(api_name=api, args=args))
    return calls


def encode_behavior_reports(docs, dim=HASH_DIM):
    """Hash every report's call tokens into one sparse-binary matrix."""
    rows = []
    for doc in docs:
        tokens = []
        for record in parse_behavior_report(doc):
            tokens.extend(api_arg_tokens(record))
        rows.append(hash_vectorize(tokens, dim))
    return FeatureMatrix("apiarg", dim, rows=rows)
