"""Feature views: byte-level static vectors, opcode n-grams, hashed call
tokens, selection, and concatenation of original vectors."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..util import thread_cap
from .ember import EMBER_DIM, ember_lite
from .hashing import (
    HASH_DIM,
    ApiCallRecord,
    api_arg_tokens,
    encode_behavior_reports,
    hash_vectorize,
    murmur3_x86_32,
)
from .ngrams import build_ngram_vocab, encode_ngram_corpus, extract_ngrams, read_opcode_listing
from .select import SelectionReport, prune_correlated, select_by_mi
from .store import (
    FeatureMatrix,
    load_feature_file,
    read_manifest,
    store_feature_file,
    write_manifest,
)

__all__ = [
    "ApiCallRecord",
    "EMBER_DIM",
    "FeatureMatrix",
    "HASH_DIM",
    "SelectionReport",
    "aggregate_org",
    "api_arg_tokens",
    "build_ngram_vocab",
    "ember_lite",
    "encode_behavior_reports",
    "encode_ngram_corpus",
    "extract_ngrams",
    "extract_many",
    "hash_vectorize",
    "load_feature_file",
    "murmur3_x86_32",
    "prune_correlated",
    "read_manifest",
    "read_opcode_listing",
    "select_by_mi",
    "store_feature_file",
    "write_manifest",
]


def aggregate_org(rows):
    """Concatenate original feature vectors in argument order.

    Needs at least two non-empty vectors; the result width is the sum of
    the member widths.
    """
    rows = [np.asarray(r, dtype=np.float32) for r in rows]
    if len(rows) < 2:
        raise ValueError(f"concatenation needs at least 2 vectors, got {len(rows)}")
    for i, r in enumerate(rows):
        if r.ndim != 1 or r.size == 0:
            raise ValueError(f"vector {i} must be 1-D and non-empty, got shape {r.shape}")
    return np.concatenate(rows)


def extract_many(fn, samples, threads=None):
    """Run a pure per-sample extractor across samples, order preserved.

    Parallelism is capped by the MALDISTILL_THREADS environment variable;
    the default is sequential.
    """
    workers = thread_cap(threads)
    samples = list(samples)
    if workers <= 1 or len(samples) <= 1:
        return [fn(s) for s in samples]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, samples))
