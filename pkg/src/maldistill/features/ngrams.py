"""Opcode n-gram presence features.

The vocabulary is the union of all n-grams seen in the training corpus,
ordered lexicographically; each sample row is a sparse-binary presence
vector over that vocabulary (a gram is set if it occurs at least once).
Listings arrive one mnemonic per line with ``>sample_id`` boundary
markers.
"""

from __future__ import annotations

import numpy as np

from .store import FeatureMatrix

GRAM_SEP = " "


def iter_ngrams(seq, n=3):
    """All length-n windows of a mnemonic sequence, joined for vocabulary keys."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    for i in range(len(seq) - n + 1):
        yield GRAM_SEP.join(seq[i : i + n])


def build_ngram_vocab(sequences, n=3):
    """Lexicographically ordered union of n-grams over the corpus."""
    grams = set()
    for seq in sequences:
        grams.update(iter_ngrams(seq, n))
    return sorted(grams)


def extract_ngrams(seq, vocab_index, n=3):
    """Sparse presence row for one sequence over a prebuilt vocabulary.

    A sequence shorter than n has no windows and yields the all-zero row.
    Grams outside the vocabulary are ignored.
    """
    hits = set()
    for gram in iter_ngrams(seq, n):
        idx = vocab_index.get(gram)
        if idx is not None:
            hits.add(idx)
    return np.asarray(sorted(hits), dtype=np.int64)


def encode_ngram_corpus(sequences, n=3, vocab=None):
    """Encode a corpus into a sparse-binary matrix (building the vocab if needed)."""
    sequences = list(sequences)
    if vocab is None:
        vocab = build_ngram_vocab(sequences, n)
    index = {g: i for i, g in enumerate(vocab)}
    rows = [extract_ngrams(seq, index, n) for seq in sequences]
    return FeatureMatrix("opcode", len(vocab), rows=rows, vocab=list(vocab))


def read_opcode_listing(path):
    """Parse a listing file into (sample_ids, sequences).

    Lines starting with ``>`` open a new sample named by the rest of the
    line; every other non-blank line is one mnemonic of the current sample.
    """
    ids = []
    seqs = []
    current = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith(">"):
                sample_id = line[1:].strip()
                if not sample_id:
                    raise ValueError(f"{path}:{lineno}: empty sample id")
                ids.append(sample_id)
                current = []
                seqs.append(current)
            else:
                if current is None:
                    raise ValueError(f"{path}:{lineno}: mnemonic before any sample marker")
                current.append(line)
    return ids, seqs
