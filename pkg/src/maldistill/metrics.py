"""Detection metrics over binary predictions; malicious is the positive class."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Metrics:
    tp: int
    fp: int
    tn: int
    fn: int
    accuracy: float
    f1: float
    fpr: float
    fnr: float
    undefined: tuple = ()

    @property
    def n(self):
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self):
        def enc(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        return {
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "accuracy": self.accuracy,
            "f1": enc(self.f1),
            "fpr": enc(self.fpr),
            "fnr": enc(self.fnr),
            "undefined": list(self.undefined),
        }


def compute_metrics(predictions, labels):
    """Confusion counts plus accuracy, F1 = 2TP/(2TP+FP+FN), FPR, FNR.

    A rate whose denominator is zero is reported as NaN and named in
    ``undefined`` rather than raising.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise ValueError(
            f"predictions/labels must be equal-length vectors, got "
            f"{predictions.shape} vs {labels.shape}"
        )
    if predictions.size == 0:
        raise ValueError("empty input")
    for arr, name in ((predictions, "predictions"), (labels, "labels")):
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must be binary 0/1")
    tp = int(np.count_nonzero((predictions == 1) & (labels == 1)))
    fp = int(np.count_nonzero((predictions == 1) & (labels == 0)))
    tn = int(np.count_nonzero((predictions == 0) & (labels == 0)))
    fn = int(np.count_nonzero((predictions == 0) & (labels == 1)))
    n = tp + fp + tn + fn
    undefined = []

    def rate(num, den, name):
        if den == 0:
            undefined.append(name)
            return float("nan")
        return num / den

    accuracy = (tp + tn) / n
    f1 = rate(2 * tp, 2 * tp + fp + fn, "f1")
    fpr = rate(fp, fp + tn, "fpr")
    fnr = rate(fn, fn + tp, "fnr")
    return Metrics(tp=tp, fp=fp, tn=tn, fn=fn, accuracy=accuracy, f1=f1,
                   fpr=fpr, fnr=fnr, undefined=tuple(undefined))
