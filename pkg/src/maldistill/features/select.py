"""Column selection: correlation pruning and mutual-information ranking.

Pruning scans columns left to right and drops any column whose absolute
Pearson correlation with an already-kept column exceeds the threshold, so
the first occurrence of a duplicate group always survives. MI selection
scores each binary column against the binary label in nats and keeps the
columns strictly above a nearest-rank percentile of the score
distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SelectionReport:
    kept: list
    mi_scores: list | None = None
    pruned_pairs: list = field(default_factory=list)
    dropped_constant: list = field(default_factory=list)
    warning: str | None = None

    def to_dict(self):
        return {
            "kept": [int(k) for k in self.kept],
            "mi_scores": None if self.mi_scores is None else [float(s) for s in self.mi_scores],
            "pruned_pairs": [[int(i), int(j), float(r)] for i, j, r in self.pruned_pairs],
            "dropped_constant": [int(c) for c in self.dropped_constant],
            "warning": self.warning,
        }


def _dense_matrix(m):
    if hasattr(m, "to_dense"):
        return m.to_dense().astype(np.float64)
    return np.asarray(m, dtype=np.float64)


def prune_correlated(matrix, threshold=0.95):
    """Drop near-duplicate columns (|r| > threshold against any kept column).

    Zero-variance columns are dropped up front; the scan then proceeds in
    ascending column order, keeping the first member of each correlated
    group. Deterministic for a given matrix.
    """
    x = _dense_matrix(matrix)
    n, d = x.shape
    if n < 2:
        raise ValueError(f"need at least 2 samples to correlate, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    norms = np.sqrt((centered * centered).sum(axis=0))
    constant = norms == 0.0
    dropped_constant = [int(j) for j in np.nonzero(constant)[0]]
    kept = []
    kept_cols = []
    pruned = []
    for j in range(d):
        if constant[j]:
            continue
        zj = centered[:, j] / norms[j]
        hit = None
        if kept_cols:
            corr = np.asarray(kept_cols) @ zj
            over = np.nonzero(np.abs(corr) > threshold)[0]
            if over.size:
                hit = (kept[over[0]], float(corr[over[0]]))
        if hit is None:
            kept.append(j)
            kept_cols.append(zj)
        else:
            pruned.append((hit[0], j, hit[1]))
    return SelectionReport(kept=kept, pruned_pairs=pruned,
                           dropped_constant=dropped_constant)


def mutual_information_nats(col, labels):
    """MI between one binary column and binary labels, empirical, in nats."""
    n = len(labels)
    joint = np.zeros((2, 2), dtype=np.float64)
    for x in (0, 1):
        for y in (0, 1):
            joint[x, y] = np.count_nonzero((col == x) & (labels == y))
    joint /= n
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    mi = 0.0
    for x in (0, 1):
        for y in (0, 1):
            p = joint[x, y]
            if p > 0.0:
                mi += p * np.log(p / (px[x] * py[y]))
    return float(mi)


def nearest_rank_percentile(values, percentile):
    """Value at rank ceil(p/100 * N) of the ascending-sorted list (1-based)."""
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    n = len(ordered)
    if n == 0:
        raise ValueError("empty value list")
    rank = int(np.ceil(percentile / 100.0 * n))
    rank = min(max(rank, 1), n)
    return float(ordered[rank - 1])


def select_by_mi(matrix, labels, percentile=98.0):
    """Keep the columns whose MI against the label clears the percentile cut.

    Columns tied with the percentile value are excluded (strictly above).
    With single-class labels every score is zero and the kept set is empty,
    flagged by the report warning.
    """
    x = _dense_matrix(matrix)
    labels = np.asarray(labels, dtype=np.int64)
    if x.shape[0] != labels.shape[0]:
        raise ValueError(f"matrix rows {x.shape[0]} != labels {labels.shape[0]}")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be binary 0/1")
    uniq = np.unique(x)
    if not np.isin(uniq, (0.0, 1.0)).all():
        raise ValueError("MI selection expects binary features")
    xi = x.astype(np.int64)
    scores = [mutual_information_nats(xi[:, j], labels) for j in range(x.shape[1])]
    if len(np.unique(labels)) < 2:
        return SelectionReport(kept=[], mi_scores=scores,
                               warning="single-class labels: all MI zero")
    cut = nearest_rank_percentile(scores, percentile)
    kept = [j for j, s in enumerate(scores) if s > cut]
    return SelectionReport(kept=kept, mi_scores=scores)
