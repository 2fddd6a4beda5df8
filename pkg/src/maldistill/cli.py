"""Command-line entry point.

One binary, subcommand style. Every command writes a ``manifest.json``
into its output directory recording the fully resolved configuration and
seed; re-running a command with ``--config <that manifest>`` reproduces
the artifacts bitwise (training runs in deterministic mode). Values from
a config file are overridden by explicit flags. On failure the command
exits nonzero with one machine-parsable line on stderr and removes any
partial outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import time

import numpy as np

from .arch import AggSpec, BUILTIN_NAMES, auto_spec, builtin_spec, load_spec
from .bench import render_delay_table, time_breakdown
from .features import (
    ember_lite,
    encode_behavior_reports,
    encode_ngram_corpus,
    extract_many,
    load_feature_file,
    prune_correlated,
    read_opcode_listing,
    select_by_mi,
    store_feature_file,
    write_manifest,
)
from .features.store import FeatureMatrix
from .losses import DistillConfig
from .metrics import compute_metrics
from .model import load_checkpoint, predict_logits, save_checkpoint
from .orchestrator import PoolConfig, run_simulation
from .report import (
    save_attempts_histogram,
    save_confusion_matrix,
    save_delay_bars,
    save_training_curves,
    write_csv,
)
from .synth import SyntheticSpec, generate_synthetic
from .training import (
    DistillData,
    LabeledViews,
    TeacherEnsemble,
    TrainConfig,
    train_distilled,
    train_supervised,
)
from .util import read_json, write_json


class Outputs:
    """Tracks artifacts so a failed run can remove its partial outputs."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.created_dir = not os.path.isdir(out_dir)
        os.makedirs(out_dir, exist_ok=True)
        self.files = []
        self.dirs = []

    def path(self, name):
        p = os.path.join(self.out_dir, name)
        self.files.append(p)
        return p

    def subdir(self, name):
        p = os.path.join(self.out_dir, name)
        self.dirs.append(p)
        return p

    def cleanup(self):
        if self.created_dir:
            shutil.rmtree(self.out_dir, ignore_errors=True)
            return
        for d in self.dirs:
            shutil.rmtree(d, ignore_errors=True)
        for f in self.files:
            if os.path.isfile(f):
                os.unlink(f)


def _config_value(args, key, default=None):
    v = getattr(args, key, None)
    if v is not None:
        return v
    cfg = getattr(args, "_config", None) or {}
    if key in cfg:
        return cfg[key]
    return default


def _write_run_manifest(outputs, command, config):
    write_json(outputs.path("manifest.json"), {"command": command, "config": config})


def _load_labels_csv(path):
    labels = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            sample_id, _, value = line.partition(",")
            if value not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: label must be 0 or 1, got {value!r}")
            labels[sample_id.strip()] = int(value)
    return labels


def _labels_for(ids, table, path):
    missing = [s for s in ids if s not in table]
    if missing:
        raise ValueError(f"labels file {path} missing {len(missing)} ids (first: {missing[0]})")
    return [table[s] for s in ids]


# ---------------------------------------------------------------- extract


def _cmd_extract(args, outputs):
    view = _config_value(args, "view")
    source = _config_value(args, "input")
    if view not in ("ember", "opcode", "apiarg"):
        raise ValueError(f"--view must be ember, opcode, or apiarg, got {view!r}")
    if source is None:
        raise ValueError("--input is required")
    labels_path = _config_value(args, "labels")
    label_table = _load_labels_csv(labels_path) if labels_path else None

    if view == "ember":
        names = sorted(
            f for f in os.listdir(source)
            if os.path.isfile(os.path.join(source, f)) and not f.endswith(".features.json")
        )
        if not names:
            raise ValueError(f"no input files under {source}")

        def one(name):
            with open(os.path.join(source, name), "rb") as fh:
                data = fh.read()
            sidecar = os.path.join(source, name + ".features.json")
            parsed = read_json(sidecar) if os.path.isfile(sidecar) else None
            return ember_lite(data, parsed)

        rows = extract_many(one, names)
        matrix = FeatureMatrix("ember", rows[0].shape[0], dense=np.stack(rows))
        ids = names
    elif view == "opcode":
        ids, seqs = read_opcode_listing(source)
        if not ids:
            raise ValueError(f"no samples in listing {source}")
        matrix = encode_ngram_corpus(seqs, n=int(_config_value(args, "ngram", 3)))
    else:
        names = sorted(f for f in os.listdir(source) if f.endswith(".json"))
        if not names:
            raise ValueError(f"no .json reports under {source}")
        docs = []
        for name in names:
            docs.append(read_json(os.path.join(source, name)))
        matrix = encode_behavior_reports(docs, dim=int(_config_value(args, "hash_dim", 1 << 20)))
        ids = [os.path.splitext(n)[0] for n in names]

    labels = _labels_for(ids, label_table, labels_path) if label_table else None
    store_feature_file(outputs.path("features.mdf"), matrix)
    write_manifest(
        outputs.path("features.manifest.json"), matrix, sample_ids=ids, labels=labels,
        provenance={"command": "extract", "view": view, "input": source},
    )
    _write_run_manifest(
        outputs, "extract",
        {"view": view, "input": source, "labels": labels_path,
         "ngram": int(_config_value(args, "ngram", 3)),
         "hash_dim": int(_config_value(args, "hash_dim", 1 << 20)),
         "seed": int(_config_value(args, "seed", 0))},
    )


# ----------------------------------------------------------------- select


def _cmd_select(args, outputs):
    source = _config_value(args, "input")
    if source is None:
        raise ValueError("--input is required")
    matrix = load_feature_file(source)
    manifest_path = _config_value(args, "data_manifest")
    if manifest_path is None:
        guess = os.path.splitext(source)[0] + ".manifest.json"
        manifest_path = guess if os.path.isfile(guess) else None
    if manifest_path is None:
        raise ValueError("need a manifest with labels (--data-manifest)")
    manifest = read_json(manifest_path)
    labels = manifest.get("labels")
    if labels is None:
        raise ValueError(f"manifest {manifest_path} carries no labels")
    threshold = float(_config_value(args, "pearson_threshold", 0.95))
    percentile = float(_config_value(args, "mi_percentile", 98.0))

    pruned = prune_correlated(matrix, threshold=threshold)
    reduced = matrix.select_columns(pruned.kept)
    mi = select_by_mi(reduced, labels, percentile=percentile)
    kept_original = [pruned.kept[j] for j in mi.kept]
    final = reduced.select_columns(mi.kept)

    store_feature_file(outputs.path("reduced.mdf"), final)
    write_manifest(
        outputs.path("reduced.manifest.json"), final,
        sample_ids=manifest.get("sample_ids"), labels=labels,
        provenance={"command": "select", "input": source},
    )
    write_json(
        outputs.path("selection.json"),
        {
            "pearson": pruned.to_dict(),
            "mi": mi.to_dict(),
            "kept_original_columns": [int(c) for c in kept_original],
            "n_features_out": final.n_features,
        },
    )
    _write_run_manifest(
        outputs, "select",
        {"input": source, "data_manifest": manifest_path,
         "pearson_threshold": threshold, "mi_percentile": percentile,
         "seed": int(_config_value(args, "seed", 0))},
    )


# --------------------------------------------------------------- gen-data


def _cmd_gen_data(args, outputs):
    seed = int(_config_value(args, "seed", 0))
    spec = SyntheticSpec(
        n_samples=int(_config_value(args, "samples", 2000)),
        class_balance=float(_config_value(args, "balance", 0.5)),
        static_dim=int(_config_value(args, "static_dim", 2381)),
        dynamic_dim=int(_config_value(args, "dynamic_dim", 4096)),
        opcode_dim=int(_config_value(args, "opcode_dim", 1024)),
        overlap=float(_config_value(args, "overlap", 0.5)),
        noise=float(_config_value(args, "noise", 0.25)),
        seed=seed,
    )
    dataset = generate_synthetic(spec, seed)
    view_files = {}
    for role, matrix in dataset.views.items():
        fname = f"{role}.mdf"
        store_feature_file(outputs.path(fname), matrix)
        view_files[role] = fname
    _write_run_manifest(
        outputs, "gen-data",
        {"samples": spec.n_samples, "balance": spec.class_balance,
         "static_dim": spec.static_dim, "dynamic_dim": spec.dynamic_dim,
         "opcode_dim": spec.opcode_dim, "overlap": spec.overlap,
         "noise": spec.noise, "seed": seed},
    )
    write_json(
        outputs.path("dataset.json"),
        {
            "views": view_files,
            "labels": [int(v) for v in dataset.labels],
            "sample_ids": dataset.sample_ids,
            "spec": spec.to_dict(),
            "seed": seed,
        },
    )


def _load_dataset(data):
    """Dataset directory (dataset.json layout) -> (views dict, labels, doc)."""
    doc_path = os.path.join(data, "dataset.json")
    if os.path.isfile(doc_path):
        doc = read_json(doc_path)
        views = {
            role: load_feature_file(os.path.join(data, fname))
            for role, fname in doc["views"].items()
        }
        return views, np.asarray(doc["labels"], dtype=np.int64), doc
    if os.path.isfile(data):
        matrix = load_feature_file(data)
        manifest_path = os.path.splitext(data)[0] + ".manifest.json"
        if not os.path.isfile(manifest_path):
            raise ValueError(f"no manifest next to {data}")
        manifest = read_json(manifest_path)
        if manifest.get("labels") is None:
            raise ValueError(f"manifest {manifest_path} carries no labels")
        return (
            {"static": matrix},
            np.asarray(manifest["labels"], dtype=np.int64),
            manifest,
        )
    raise ValueError(f"no dataset at {data}")


def _resolve_arch(arch, variant, views):
    """--arch may be a builtin name, 'auto', or a spec JSON path."""
    dims = [m.n_features for m in views]
    if arch in (None, "auto"):
        specs = [auto_spec(d, variant=variant) for d in dims]
        spec = specs[0] if len(specs) == 1 else AggSpec(members=tuple(specs))
    elif arch in BUILTIN_NAMES:
        if len(dims) != 1:
            raise ValueError("builtin architectures are single-view")
        spec = builtin_spec(arch, variant=variant)
    elif os.path.isfile(arch):
        spec = load_spec(arch)
    else:
        raise ValueError(f"--arch must be auto, a builtin name {BUILTIN_NAMES}, or a spec file")
    if isinstance(spec, AggSpec):
        expect = [m.input_dim for m in spec.members]
    else:
        expect = [spec.input_dim]
    if expect != dims:
        raise ValueError(f"architecture input dims {expect} != data dims {dims}")
    return spec


def _train_config(args, view_roles):
    profile_view = view_roles[0] if len(view_roles) == 1 else "aggregated"
    drops = (30, 80) if profile_view == "opcode" else (50,)
    return TrainConfig(
        epochs=int(_config_value(args, "epochs", 100)),
        lr=float(_config_value(args, "lr", 0.02)),
        lr_drop_epochs=tuple(
            int(e) for e in _config_value(args, "lr_drop_epochs", drops)
        ),
        batch_size=int(_config_value(args, "batch_size", 64)),
        momentum=float(_config_value(args, "momentum", 0.9)),
        weight_decay=float(_config_value(args, "weight_decay", 1e-3)),
        seed=int(_config_value(args, "seed", 0)),
    )


def _write_training_outputs(outputs, model, log, manifest_extra, title):
    ckpt_dir = outputs.subdir("checkpoint")
    save_checkpoint(ckpt_dir, model, manifest_extra=manifest_extra)
    with open(outputs.path("train_log.jsonl"), "w", encoding="utf-8") as fh:
        for row in log:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    write_csv(
        outputs.path("train_log.csv"),
        ["epoch", "lr", "loss", "train_acc"],
        [[r["epoch"], r["lr"], r["loss"], r["train_acc"]] for r in log],
    )
    save_training_curves(log, outputs.path("train_curves.png"), title=title)


# ------------------------------------------------------------------ train


def _cmd_train(args, outputs):
    data = _config_value(args, "data")
    if data is None:
        raise ValueError("--data is required")
    raw_roles = _config_value(args, "views", "static")
    if isinstance(raw_roles, str):
        roles = [r.strip() for r in raw_roles.split(",") if r.strip()]
    else:
        roles = list(raw_roles)
    views, labels, _ = _load_dataset(data)
    for role in roles:
        if role not in views:
            raise ValueError(f"dataset has no view {role!r}; available {sorted(views)}")
    matrices = [views[r] for r in roles]
    variant = _config_value(args, "variant", "resnet1d_k3")
    arch = _config_value(args, "arch", "auto")
    spec = _resolve_arch(arch, variant, matrices)
    tc = _train_config(args, roles)
    dataset = LabeledViews(views=tuple(m.to_dense() for m in matrices), labels=labels)
    model, log = train_supervised(spec, dataset, tc)
    config = {
        "data": data, "views": roles, "arch": arch, "variant": variant,
        **tc.to_dict(),
    }
    _write_training_outputs(
        outputs, model, log,
        manifest_extra={"views": roles, "train": tc.to_dict(), "seed": tc.seed,
                        "data": data},
        title=f"train {'+'.join(roles)}",
    )
    _write_run_manifest(outputs, "train", config)


# ---------------------------------------------------------------- distill


def _cmd_distill(args, outputs):
    data = _config_value(args, "data")
    teachers = _config_value(args, "teacher")
    if data is None or not teachers:
        raise ValueError("--data and at least one --teacher are required")
    if isinstance(teachers, str):
        teachers = [teachers]
    student_role = str(_config_value(args, "student_view", "static"))
    views, labels, _ = _load_dataset(data)
    if student_role not in views:
        raise ValueError(f"dataset has no view {student_role!r}")

    members = []
    teacher_roles = None
    for path in teachers:
        model, manifest = load_checkpoint(path)
        roles = manifest.get("views")
        if roles is None:
            raise ValueError(f"teacher checkpoint {path} does not record its views")
        if teacher_roles is None:
            teacher_roles = roles
        elif roles != teacher_roles:
            raise ValueError("teacher ensemble members disagree on views")
        members.append(model)
    for role in teacher_roles:
        if role not in views:
            raise ValueError(f"dataset has no view {role!r} required by the teacher")
    ensemble = TeacherEnsemble(members)

    loss_kind = str(_config_value(args, "loss", "kd-mse")).replace("-", "_")
    cfg = DistillConfig(
        alpha=float(_config_value(args, "alpha", 0.5)),
        tau=float(_config_value(args, "tau", 5.0)),
        loss_kind=loss_kind,
        teacher_count=len(members),
    )
    variant = _config_value(args, "variant", "resnet1d_k3")
    arch = _config_value(args, "arch", "auto")
    student_spec = _resolve_arch(arch, variant, [views[student_role]])
    tc = _train_config(args, [student_role])
    distill_data = DistillData(
        student_views=(views[student_role].to_dense(),),
        teacher_views=tuple(views[r].to_dense() for r in teacher_roles),
        labels=labels,
    )
    student, log = train_distilled(student_spec, distill_data, ensemble, cfg, tc)
    config = {
        "data": data, "student_view": student_role, "teacher": list(teachers),
        "arch": arch, "variant": variant,
        "alpha": cfg.alpha, "tau": cfg.tau, "loss": cfg.loss_kind.replace("_", "-"),
        **tc.to_dict(),
    }
    _write_training_outputs(
        outputs, student, log,
        manifest_extra={"views": [student_role], "train": tc.to_dict(),
                        "seed": tc.seed, "data": data, "distill": cfg.to_dict(),
                        "teachers": list(teachers)},
        title=f"distill {student_role} ({cfg.loss_kind})",
    )
    _write_run_manifest(outputs, "distill", config)


# ------------------------------------------------------------------- eval


def _cmd_eval(args, outputs):
    ckpt = _config_value(args, "checkpoint")
    data = _config_value(args, "data")
    if ckpt is None or data is None:
        raise ValueError("--checkpoint and --data are required")
    model, manifest = load_checkpoint(ckpt)
    roles = _config_value(args, "views")
    if roles is None:
        roles = manifest.get("views")
        if roles is None:
            raise ValueError("checkpoint does not record views; pass --views")
    elif isinstance(roles, str):
        roles = [r.strip() for r in roles.split(",") if r.strip()]
    views, labels, _ = _load_dataset(data)
    arrays = [views[r].to_dense() for r in roles]
    logits = predict_logits(model, arrays)
    predictions = logits.argmax(axis=1)
    metrics = compute_metrics(predictions, labels)
    write_json(outputs.path("metrics.json"), metrics.to_dict())
    write_csv(
        outputs.path("metrics.csv"),
        ["tp", "fp", "tn", "fn", "accuracy", "f1", "fpr", "fnr"],
        [[metrics.tp, metrics.fp, metrics.tn, metrics.fn,
          metrics.accuracy, metrics.f1, metrics.fpr, metrics.fnr]],
    )
    save_confusion_matrix(metrics, outputs.path("confusion.png"))
    _write_run_manifest(
        outputs, "eval",
        {"checkpoint": ckpt, "data": data, "views": list(roles),
         "seed": int(_config_value(args, "seed", 0))},
    )


# ------------------------------------------------------------------ bench


def _cmd_bench(args, outputs):
    ckpt = _config_value(args, "checkpoint")
    data = _config_value(args, "data")
    if ckpt is None or data is None:
        raise ValueError("--checkpoint and --data are required")
    model, manifest = load_checkpoint(ckpt)
    roles = manifest.get("views") or ["static"]
    views, labels, _ = _load_dataset(data)
    arrays = [views[r].to_dense() for r in roles]
    limit = int(_config_value(args, "limit", 64))
    n = min(limit, arrays[0].shape[0])
    samples = [tuple(a[i] for a in arrays) for i in range(n)]
    analysis_ms = float(_config_value(args, "simulate_analysis_ms", 0.0))

    stages = {}
    if analysis_ms > 0:
        def analysis(sample):
            time.sleep(analysis_ms / 1000.0)
            return sample

        stages["analysis"] = analysis
    stages["inference"] = lambda sample: predict_logits(
        model, [v[None, :] for v in sample], batch_size=1
    )
    report = time_breakdown(stages, samples)
    method = "+".join(roles)
    write_json(outputs.path("bench.json"), {"method": method, **report.to_dict()})
    write_csv(
        outputs.path("bench.csv"),
        ["method", "analysis_ms", "feat_extr_ms", "inference_ms", "e2e_ms", "n_samples"],
        [[method, report.analysis_ms, report.feat_extr_ms,
          report.inference_ms, report.e2e_ms, report.n_samples]],
    )
    table = render_delay_table([(method, report)])
    with open(outputs.path("bench.txt"), "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    save_delay_bars([(method, report)], outputs.path("bench.png"))
    _write_run_manifest(
        outputs, "bench",
        {"checkpoint": ckpt, "data": data, "limit": limit,
         "simulate_analysis_ms": analysis_ms,
         "seed": int(_config_value(args, "seed", 0))},
    )


# -------------------------------------------------------- orchestrate-sim


def _cmd_orchestrate_sim(args, outputs):
    seed = int(_config_value(args, "seed", 0))
    n_jobs = int(_config_value(args, "jobs", 200))
    pool = PoolConfig(
        n_workers=int(_config_value(args, "workers", 12)),
        max_resubmit=int(_config_value(args, "max_resubmit", 3)),
    )
    crash_prob = float(_config_value(args, "crash_prob", 0.3))
    result = run_simulation(pool, [f"sample-{i:05d}" for i in range(n_jobs)],
                            crash_prob, seed)
    with open(outputs.path("events.jsonl"), "w", encoding="utf-8") as fh:
        for event in result.events:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
    write_csv(
        outputs.path("jobs.csv"),
        ["job_id", "sample_id", "status", "attempts"],
        [[j.job_id, j.sample_id, j.status, j.attempts]
         for j in result.jobs.values()],
    )
    summary = {
        "jobs": n_jobs,
        "succeeded": sum(j.status == "succeeded" for j in result.jobs.values()),
        "failed_permanent": sum(
            j.status == "failed_permanent" for j in result.jobs.values()
        ),
        "ticks": result.ticks,
        "crash_prob": crash_prob,
        "seed": seed,
    }
    write_json(outputs.path("summary.json"), summary)
    save_attempts_histogram(result.jobs, outputs.path("attempts.png"))
    _write_run_manifest(
        outputs, "orchestrate-sim",
        {"jobs": n_jobs, "workers": pool.n_workers, "max_resubmit": pool.max_resubmit,
         "crash_prob": crash_prob, "seed": seed},
    )


# ------------------------------------------------------------------ wiring

_HANDLERS = {
    "extract": _cmd_extract,
    "select": _cmd_select,
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "distill": _cmd_distill,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "orchestrate-sim": _cmd_orchestrate_sim,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="maldistill", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="manifest or config JSON; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=False, help="output directory")

    p = sub.add_parser("extract", help="artifacts -> feature file")
    common(p)
    p.add_argument("--view", choices=("ember", "opcode", "apiarg"))
    p.add_argument("--input", help="directory of binaries/reports, or a listing file")
    p.add_argument("--labels", help="CSV of sample_id,label")
    p.add_argument("--ngram", type=int)
    p.add_argument("--hash-dim", dest="hash_dim", type=int)

    p = sub.add_parser("select", help="feature file -> selection report + reduced matrix")
    common(p)
    p.add_argument("--input")
    p.add_argument("--data-manifest", dest="data_manifest")
    p.add_argument("--pearson-threshold", dest="pearson_threshold", type=float)
    p.add_argument("--mi-percentile", dest="mi_percentile", type=float)

    p = sub.add_parser("gen-data", help="synthetic multi-view dataset")
    common(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--balance", type=float)
    p.add_argument("--static-dim", dest="static_dim", type=int)
    p.add_argument("--dynamic-dim", dest="dynamic_dim", type=int)
    p.add_argument("--opcode-dim", dest="opcode_dim", type=int)
    p.add_argument("--overlap", type=float)
    p.add_argument("--noise", type=float)

    def train_flags(p):
        p.add_argument("--data")
        p.add_argument("--arch", help=f"auto, one of {BUILTIN_NAMES}, or a spec JSON path")
        p.add_argument("--variant")
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--momentum", type=float)
        p.add_argument("--weight-decay", dest="weight_decay", type=float)

    p = sub.add_parser("train", help="dataset + architecture -> checkpoint + log")
    common(p)
    train_flags(p)
    p.add_argument("--views", help="comma-separated view roles (default static)")

    p = sub.add_parser("distill", help="teacher checkpoints + dataset -> student checkpoint")
    common(p)
    train_flags(p)
    p.add_argument("--teacher", action="append", help="teacher checkpoint dir (repeatable)")
    p.add_argument("--student-view", dest="student_view")
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--loss", choices=("kd-kl", "kd-mse"))

    p = sub.add_parser("eval", help="checkpoint + dataset -> metrics")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.add_argument("--views")

    p = sub.add_parser("bench", help="checkpoint + dataset -> delay breakdown")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--data")
    p.add_argument("--limit", type=int)
    p.add_argument("--simulate-analysis-ms", dest="simulate_analysis_ms", type=float)

    p = sub.add_parser("orchestrate-sim", help="simulated analysis pool -> event log")
    common(p)
    p.add_argument("--jobs", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--max-resubmit", dest="max_resubmit", type=int)
    p.add_argument("--crash-prob", dest="crash_prob", type=float)

    return parser


def dispatch(argv=None):
    """Run one subcommand; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    if args.config:
        doc = read_json(args.config)
        recorded = doc.get("command")
        if recorded is not None and recorded != command:
            print(
                "maldistill-error: "
                + json.dumps(
                    {"command": command, "error": "ValueError",
                     "message": f"config was recorded by {recorded!r}"},
                    separators=(",", ":"),
                ),
                file=sys.stderr,
            )
            return 1
        args._config = doc.get("config", doc)
    else:
        args._config = {}
    out_dir = args.out or f"maldistill-{command}-out"
    outputs = Outputs(out_dir)
    try:
        _HANDLERS[command](args, outputs)
        return 0
    except Exception as exc:  # single-line machine-parsable error contract
        outputs.cleanup()
        print(
            "maldistill-error: "
            + json.dumps(
                {"command": command, "error": type(exc).__name__, "message": str(exc)},
                separators=(",", ":"),
            ),
            file=sys.stderr,
        )
        return 1


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
