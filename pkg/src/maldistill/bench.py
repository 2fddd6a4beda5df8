"""Per-stage detection-delay measurement.

Stages (analysis, feature extraction, inference) are registered as
callables chained per sample; each stage's wall-clock mean is reported in
milliseconds from a monotonic timer, with one warm-up sample excluded.
Unregistered stages report zero, so a static-only pipeline shows no
analysis delay. A stage error excludes that sample from the affected
means and is counted instead of aborting the run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

STAGE_ORDER = ("analysis", "feat_extr", "inference")

STAGE_TITLES = {
    "analysis": "Analysis",
    "feat_extr": "Feat-Extr.",
    "inference": "Inference",
}


@dataclass
class TimingReport:
    analysis_ms: float
    feat_extr_ms: float
    inference_ms: float
    e2e_ms: float
    n_samples: int
    errors: dict = field(default_factory=dict)

    def stage_ms(self, stage):
        return getattr(self, f"{stage}_ms")

    def to_dict(self):
        return {
            "analysis_ms": self.analysis_ms,
            "feat_extr_ms": self.feat_extr_ms,
            "inference_ms": self.inference_ms,
            "e2e_ms": self.e2e_ms,
            "n_samples": self.n_samples,
            "errors": dict(self.errors),
        }


def time_breakdown(stages, samples, warmup=True):
    """Measure each registered stage per sample and average.

    ``stages`` maps a stage name (any of analysis / feat_extr / inference)
    to a callable taking the previous stage's output. End-to-end time is
    measured around the whole chain, so it is at least the sum of the
    stage means up to timer resolution.
    """
    unknown = set(stages) - set(STAGE_ORDER)
    if unknown:
        raise ValueError(f"unknown stages {sorted(unknown)}; expected {STAGE_ORDER}")
    samples = list(samples)
    if not samples:
        raise ValueError("no samples to measure")
    chain = [(name, stages[name]) for name in STAGE_ORDER if name in stages]
    if warmup and chain:
        value = samples[0]
        try:
            for _, fn in chain:
                value = fn(value)
        except Exception:
            pass
    totals = {name: 0.0 for name in STAGE_ORDER}
    counts = {name: 0 for name in STAGE_ORDER}
    errors = {name: 0 for name in STAGE_ORDER}
    e2e_total = 0.0
    e2e_count = 0
    for sample in samples:
        value = sample
        sample_times = {}
        failed = False
        t_sample = time.perf_counter()
        for name, fn in chain:
            t0 = time.perf_counter()
            try:
                value = fn(value)
            except Exception:
                errors[name] += 1
                failed = True
                break
            sample_times[name] = (time.perf_counter() - t0) * 1000.0
        if failed:
            continue
        e2e_total += (time.perf_counter() - t_sample) * 1000.0
        e2e_count += 1
        for name, ms in sample_times.items():
            totals[name] += ms
            counts[name] += 1

    def mean(name):
        return totals[name] / counts[name] if counts[name] else 0.0

    return TimingReport(
        analysis_ms=mean("analysis"),
        feat_extr_ms=mean("feat_extr"),
        inference_ms=mean("inference"),
        e2e_ms=e2e_total / e2e_count if e2e_count else 0.0,
        n_samples=e2e_count,
        errors={k: v for k, v in errors.items() if v},
    )


def render_delay_table(rows):
    """Aligned text table of (method, TimingReport) rows.

    Columns: Methods, Analysis, Feat-Extr., Inference, E2E Delay.
    """
    header = ["Methods", "Analysis", "Feat-Extr.", "Inference", "E2E Delay"]
    body = [
        [
            method,
            f"{report.analysis_ms:.1f}",
            f"{report.feat_extr_ms:.1f}",
            f"{report.inference_ms:.1f}",
            f"{report.e2e_ms:.1f}",
        ]
        for method, report in rows
    ]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = []
    for r in [header] + body:
        lines.append(
            "  ".join(col.ljust(w) if i == 0 else col.rjust(w)
                      for i, (col, w) in enumerate(zip(r, widths)))
        )
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)
