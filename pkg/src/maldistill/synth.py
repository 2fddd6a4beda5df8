"""Synthetic multi-view datasets and stratified splitting.

The generator is linear-Gaussian with binary thresholding for the sparse
views. Two latent factors drive the label: the static view expresses the
first factor, the dynamic view the second, and the overlap parameter sets
how much of the label signal the first factor carries. At overlap 1 the
static view alone is sufficient; below 1 the views complement each other,
so aggregating them strictly helps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .features.store import FeatureMatrix

VIEW_ROLES = ("static", "dynamic", "opcode")

# Canonical view tag carried by each role's feature matrix.
ROLE_TAGS = {"static": "ember", "dynamic": "apiarg", "opcode": "opcode"}


@dataclass
class SyntheticSpec:
    n_samples: int = 2000
    class_balance: float = 0.5
    static_dim: int = 2381
    dynamic_dim: int = 4096
    opcode_dim: int = 1024
    static_strength: float = 1.0
    dynamic_strength: float = 1.0
    opcode_strength: float = 0.3
    overlap: float = 0.5
    noise: float = 0.25
    sparsity: float = 0.15
    signal_support: float = 0.03
    seed: int = 0

    def __post_init__(self):
        if min(self.static_dim, self.dynamic_dim, self.opcode_dim) < 2:
            raise ValueError("view dims must be >= 2")
        if not 0.0 < self.class_balance < 1.0:
            raise ValueError(f"class_balance must be in (0, 1), got {self.class_balance}")
        for name in ("static_strength", "dynamic_strength", "opcode_strength", "overlap"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        if not 0.0 < self.sparsity < 1.0:
            raise ValueError(f"sparsity must be in (0, 1), got {self.sparsity}")
        if not 0.0 < self.signal_support <= 1.0:
            raise ValueError(f"signal_support must be in (0, 1], got {self.signal_support}")

    def to_dict(self):
        return {k: getattr(self, k) for k in (
            "n_samples", "class_balance", "static_dim", "dynamic_dim", "opcode_dim",
            "static_strength", "dynamic_strength", "opcode_strength", "overlap",
            "noise", "sparsity", "signal_support", "seed",
        )}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class MultiViewDataset:
    views: dict
    labels: np.ndarray
    sample_ids: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.labels)

    def subset(self, idx):
        idx = np.asarray(idx)
        return MultiViewDataset(
            views={role: m.subset(idx) for role, m in self.views.items()},
            labels=self.labels[idx],
            sample_ids=[self.sample_ids[i] for i in idx] if self.sample_ids else [],
            provenance=dict(self.provenance),
        )


def _signal_support(rng, dim, support_frac):
    """A random contiguous coordinate block carrying the view's signal.

    Feature views have locally structured semantics (histogram regions,
    related token buckets), and a contiguous block keeps the signal
    detectable by strided convolutions at desk scale.
    """
    k = max(2, int(np.ceil(dim * support_frac)))
    start = int(rng.integers(0, dim - k + 1))
    return np.arange(start, start + k)


def _signal_direction(rng, dim, support_frac):
    """Unit-norm direction on a contiguous support block."""
    w = np.zeros(dim)
    support = _signal_support(rng, dim, support_frac)
    weights = rng.standard_normal(len(support))
    w[support] = weights / np.linalg.norm(weights)
    return w


def _binary_view(rng, factor, dim, strength, noise, sparsity, support_frac, tag):
    """Sparse presence rows that jointly encode the factor.

    Support coordinates threshold the (noisy, sign-flipped) factor at
    quantiles spread over its range, so together they resolve it like a
    rank code; the remaining coordinates are background bits firing at the
    base sparsity rate. At zero strength the support carries no signal.
    """
    n = len(factor)
    support = _signal_support(rng, dim, support_frac)
    k = len(support)
    signs = rng.choice([-1.0, 1.0], size=k)
    cuts = ndtri(np.linspace(0.12, 0.88, k))
    noisy = strength * signs[None, :] * factor[:, None] \
        + max(noise, 0.02) * rng.standard_normal((n, k))
    support_bits = noisy > cuts[None, :] * max(strength, 1e-12)
    background = rng.standard_normal((n, dim)) > ndtri(1.0 - sparsity)
    grid = background
    grid[:, support] = support_bits
    rows = [np.nonzero(grid[i])[0].astype(np.int64) for i in range(n)]
    return FeatureMatrix(tag, dim, rows=rows)


def generate_synthetic(spec: SyntheticSpec, seed=None):
    """Draw a dataset; fully determined by the seed (spec.seed if omitted)."""
    if seed is None:
        seed = spec.seed
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = spec.n_samples
    h_static = rng.standard_normal(n)
    h_dynamic = rng.standard_normal(n)
    label_noise = rng.standard_normal(n)
    signal = np.sqrt(spec.overlap) * h_static + np.sqrt(1.0 - spec.overlap) * h_dynamic
    score = signal + spec.noise * label_noise
    cut = ndtri(1.0 - spec.class_balance) * np.sqrt(1.0 + spec.noise * spec.noise)
    labels = (score > cut).astype(np.int64)

    w_static = _signal_direction(rng, spec.static_dim, spec.signal_support)
    x_static = (
        spec.static_strength * np.outer(h_static, w_static)
        + spec.noise * rng.standard_normal((n, spec.static_dim))
    ).astype(np.float32)
    views = {
        "static": FeatureMatrix(ROLE_TAGS["static"], spec.static_dim, dense=x_static),
        "dynamic": _binary_view(
            rng, h_dynamic, spec.dynamic_dim, spec.dynamic_strength,
            max(spec.noise, 0.05), spec.sparsity, spec.signal_support,
            ROLE_TAGS["dynamic"],
        ),
        "opcode": _binary_view(
            rng, h_static, spec.opcode_dim, spec.opcode_strength,
            max(spec.noise, 0.05) * 2.0, spec.sparsity, spec.signal_support,
            ROLE_TAGS["opcode"],
        ),
    }
    ids = [f"s{i:06d}" for i in range(n)]
    return MultiViewDataset(
        views=views, labels=labels, sample_ids=ids,
        provenance={"generator": "linear-gaussian", "seed": int(seed), "spec": spec.to_dict()},
    )


def _allocate(per_class, total):
    """Largest-remainder split of ``total`` across classes, proportional."""
    counts = np.asarray(per_class, dtype=np.int64)
    exact = counts * (total / counts.sum())
    base = np.floor(exact).astype(np.int64)
    short = total - base.sum()
    order = np.argsort(-(exact - base))
    for i in range(short):
        base[order[i]] += 1
    return base


def stratified_indices(labels, seed, test_frac=0.2, val_frac=0.2):
    """Disjoint (train, val, test) index arrays, stratified by label.

    The test fraction comes off the whole set first; the validation
    fraction then comes off the remaining training pool.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if n < 10:
        raise ValueError(f"need at least 10 samples to split, got {n}")
    classes, counts = np.unique(labels, return_counts=True)
    if counts.min() < 2:
        raise ValueError("every class needs at least 2 samples")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    test_per_class = _allocate(counts, int(round(n * test_frac)))
    train_idx, val_idx, test_idx = [], [], []
    rest_counts = counts - test_per_class
    val_per_class = _allocate(rest_counts, int(round(rest_counts.sum() * val_frac)))
    for cls, n_test, n_val in zip(classes, test_per_class, val_per_class):
        members = np.nonzero(labels == cls)[0]
        members = members[rng.permutation(len(members))]
        test_idx.append(members[:n_test])
        val_idx.append(members[n_test : n_test + n_val])
        train_idx.append(members[n_test + n_val :])
    order = lambda parts: np.sort(np.concatenate(parts))
    return order(train_idx), order(val_idx), order(test_idx)


def split_dataset(dataset: MultiViewDataset, seed, test_frac=0.2, val_frac=0.2):
    """Stratified (train, val, test) partition of a multi-view dataset."""
    train_idx, val_idx, test_idx = stratified_indices(
        dataset.labels, seed, test_frac, val_frac
    )
    return dataset.subset(train_idx), dataset.subset(val_idx), dataset.subset(test_idx)
