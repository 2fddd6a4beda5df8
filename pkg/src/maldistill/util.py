"""Shared plumbing: errors, seeded rng streams, thread capping, JSON io."""

from __future__ import annotations

import json
import os

import numpy as np

THREADS_ENV = "MALDISTILL_THREADS"


class MaldistillError(Exception):
    """Base class for errors raised by this package."""


class FileFormatError(MaldistillError):
    """A binary artifact failed to parse; ``offset`` points at the bad byte."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingDiverged(MaldistillError):
    """Loss became non-finite during optimization."""


def rng_streams(seed, n):
    """Derive ``n`` independent deterministic generators from one seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.default_rng(s) for s in children]


def thread_cap(requested=None):
    """Worker parallelism: min(requested, MALDISTILL_THREADS), at least 1."""
    env = os.environ.get(THREADS_ENV)
    cap = None
    if env is not None:
        try:
            cap = max(1, int(env))
        except ValueError:
            cap = None
    if requested is None:
        requested = cap if cap is not None else 1
    if cap is not None:
        requested = min(requested, cap)
    return max(1, int(requested))


def write_json(path, obj):
    """Write JSON with sorted keys and a trailing newline (byte-stable)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
