"""Figure rendering for report outputs.

Every reporting path writes its delimited data first and then a matching
PNG next to it; figures are presentation only and never the source of
truth.
"""

from __future__ import annotations

import csv
import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .bench import STAGE_ORDER, STAGE_TITLES  # noqa: E402


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def save_training_curves(log, path, title="training"):
    """Loss and training accuracy per epoch."""
    epochs = [row["epoch"] for row in log]
    fig, ax1 = plt.subplots(figsize=(7, 4.2))
    ax1.plot(epochs, [row["loss"] for row in log], color="tab:red", label="loss")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss", color="tab:red")
    ax2 = ax1.twinx()
    ax2.plot(epochs, [row["train_acc"] for row in log], color="tab:blue", label="accuracy")
    ax2.set_ylabel("train accuracy", color="tab:blue")
    ax2.set_ylim(0.0, 1.02)
    ax1.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_confusion_matrix(metrics, path, title="confusion"):
    grid = [[metrics.tn, metrics.fp], [metrics.fn, metrics.tp]]
    fig, ax = plt.subplots(figsize=(4.2, 4))
    ax.imshow(grid, cmap="Blues")
    for i in range(2):
        for j in range(2):
            ax.text(j, i, str(grid[i][j]), ha="center", va="center")
    ax.set_xticks([0, 1], ["pred benign", "pred malicious"])
    ax.set_yticks([0, 1], ["benign", "malicious"])
    acc = metrics.accuracy
    f1 = metrics.f1 if not math.isnan(metrics.f1) else float("nan")
    ax.set_title(f"{title} (acc={acc:.4f}, f1={f1:.4f})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_delay_bars(rows, path, title="detection delay breakdown"):
    """Horizontal stacked bars of per-stage means for each method row."""
    methods = [m for m, _ in rows]
    fig, ax = plt.subplots(figsize=(7, 1.2 + 0.6 * len(rows)))
    left = [0.0] * len(rows)
    for stage in STAGE_ORDER:
        vals = [report.stage_ms(stage) for _, report in rows]
        ax.barh(methods, vals, left=left, label=STAGE_TITLES[stage])
        left = [a + b for a, b in zip(left, vals)]
    ax.set_xlabel("mean delay (ms)")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_attempts_histogram(jobs, path, title="analysis attempts"):
    succeeded = {}
    failed = {}
    for job in jobs.values():
        bucket = succeeded if job.status == "succeeded" else failed
        bucket[job.attempts] = bucket.get(job.attempts, 0) + 1
    xs = sorted(set(succeeded) | set(failed))
    fig, ax = plt.subplots(figsize=(6, 3.6))
    width = 0.4
    ax.bar([x - width / 2 for x in xs], [succeeded.get(x, 0) for x in xs],
           width=width, label="succeeded", color="tab:green")
    ax.bar([x + width / 2 for x in xs], [failed.get(x, 0) for x in xs],
           width=width, label="failed", color="tab:red")
    ax.set_xlabel("executions started")
    ax.set_ylabel("jobs")
    ax.set_xticks(xs)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
