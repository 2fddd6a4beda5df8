"""End-to-end command-line pipelines on tiny synthetic inputs."""

import json
import os

import numpy as np
import pytest

from maldistill.cli import dispatch
from maldistill.features import load_feature_file
from maldistill.util import read_json

GEN = ["gen-data", "--samples", "80", "--static-dim", "40", "--dynamic-dim", "64",
       "--opcode-dim", "24", "--seed", "11"]


def run(args):
    return dispatch([str(a) for a in args])


def _checkpoint_bytes(ckpt_dir):
    manifest = read_json(os.path.join(ckpt_dir, "manifest.json"))
    return b"".join(
        open(os.path.join(ckpt_dir, entry["file"]), "rb").read()
        for entry in manifest["tensors"]
    )


def test_gen_train_eval_pipeline(tmp_path):
    ds = tmp_path / "ds"
    assert run(GEN + ["--out", ds]) == 0
    assert (ds / "static.mdf").exists()
    doc = read_json(ds / "dataset.json")
    assert len(doc["labels"]) == 80

    t = tmp_path / "train"
    assert run(["train", "--data", ds, "--views", "static", "--epochs", "4",
                "--batch-size", "16", "--seed", "1", "--out", t]) == 0
    assert (t / "checkpoint" / "manifest.json").exists()
    assert (t / "train_curves.png").exists()
    assert (t / "train_log.csv").exists()

    e = tmp_path / "eval"
    assert run(["eval", "--checkpoint", t / "checkpoint", "--data", ds, "--out", e]) == 0
    metrics = read_json(e / "metrics.json")
    for key in ("accuracy", "f1", "fpr", "fnr"):
        assert key in metrics and metrics[key] is not None
    assert (e / "confusion.png").exists()
    assert (e / "metrics.csv").exists()


def test_distill_alpha_one_matches_train_checkpoints(tmp_path):
    ds = tmp_path / "ds"
    assert run(GEN + ["--out", ds]) == 0
    teacher = tmp_path / "teacher"
    assert run(["train", "--data", ds, "--views", "static,dynamic", "--epochs", "2",
                "--batch-size", "16", "--seed", "3", "--out", teacher]) == 0

    plain = tmp_path / "plain"
    assert run(["train", "--data", ds, "--views", "static", "--epochs", "3",
                "--batch-size", "16", "--seed", "5", "--out", plain]) == 0
    distilled = tmp_path / "distilled"
    assert run(["distill", "--data", ds, "--teacher", teacher / "checkpoint",
                "--alpha", "1.0", "--epochs", "3", "--batch-size", "16",
                "--seed", "5", "--out", distilled]) == 0
    assert _checkpoint_bytes(plain / "checkpoint") == _checkpoint_bytes(
        distilled / "checkpoint"
    )


def test_distill_kd_mse_runs(tmp_path):
    ds = tmp_path / "ds"
    assert run(GEN + ["--out", ds]) == 0
    teacher = tmp_path / "teacher"
    assert run(["train", "--data", ds, "--views", "static,dynamic", "--epochs", "2",
                "--batch-size", "16", "--seed", "3", "--out", teacher]) == 0
    out = tmp_path / "student"
    assert run(["distill", "--data", ds, "--teacher", teacher / "checkpoint",
                "--alpha", "0.5", "--loss", "kd-mse", "--epochs", "2",
                "--batch-size", "16", "--seed", "4", "--out", out]) == 0
    manifest = read_json(out / "checkpoint" / "manifest.json")
    assert manifest["distill"]["loss_kind"] == "kd_mse"
    assert manifest["views"] == ["static"]


def test_bench_static_pipeline_zero_analysis(tmp_path):
    ds = tmp_path / "ds"
    assert run(GEN + ["--out", ds]) == 0
    t = tmp_path / "train"
    assert run(["train", "--data", ds, "--views", "static", "--epochs", "1",
                "--batch-size", "16", "--seed", "1", "--out", t]) == 0
    b = tmp_path / "bench"
    assert run(["bench", "--checkpoint", t / "checkpoint", "--data", ds,
                "--limit", "8", "--out", b]) == 0
    report = read_json(b / "bench.json")
    assert report["analysis_ms"] == 0.0
    assert report["inference_ms"] > 0.0
    table = (b / "bench.txt").read_text()
    assert table.splitlines()[0].split()[:2] == ["Methods", "Analysis"]
    assert (b / "bench.png").exists()
    assert (b / "bench.csv").exists()

    b2 = tmp_path / "bench-sim"
    assert run(["bench", "--checkpoint", t / "checkpoint", "--data", ds,
                "--limit", "4", "--simulate-analysis-ms", "3", "--out", b2]) == 0
    simulated = read_json(b2 / "bench.json")
    assert simulated["analysis_ms"] >= 2.5


def test_orchestrate_sim_outputs(tmp_path):
    out = tmp_path / "sim"
    assert run(["orchestrate-sim", "--jobs", "40", "--workers", "6",
                "--crash-prob", "0.2", "--seed", "5", "--out", out]) == 0
    events = [json.loads(line) for line in (out / "events.jsonl").read_text().splitlines()]
    assert all({"t", "entity", "transition"} <= set(e) for e in events)
    summary = read_json(out / "summary.json")
    assert summary["succeeded"] + summary["failed_permanent"] == 40
    assert (out / "attempts.png").exists()
    assert (out / "jobs.csv").exists()


def test_extract_opcode_then_select(tmp_path):
    listing = tmp_path / "ops.txt"
    rng = np.random.default_rng(8)
    vocab = ["mov", "add", "xor", "push", "pop", "ret", "nop", "cmp"]
    lines = []
    for i in range(16):
        lines.append(f">s{i:02d}")
        seq = [vocab[k] for k in rng.integers(0, len(vocab), 12)]
        if i % 2:
            seq[3:3] = ["jmp", "call", "jmp"]
        lines.extend(seq)
    listing.write_text("\n".join(lines) + "\n")
    labels = tmp_path / "labels.csv"
    labels.write_text("".join(f"s{i:02d},{i % 2}\n" for i in range(16)))

    ex = tmp_path / "ex"
    assert run(["extract", "--view", "opcode", "--input", listing,
                "--labels", labels, "--out", ex]) == 0
    matrix = load_feature_file(ex / "features.mdf")
    assert matrix.view == "opcode"
    assert matrix.n_samples == 16

    sel = tmp_path / "sel"
    assert run(["select", "--input", ex / "features.mdf",
                "--mi-percentile", "50", "--out", sel]) == 0
    report = read_json(sel / "selection.json")
    reduced = load_feature_file(sel / "reduced.mdf")
    assert reduced.n_features == report["n_features_out"]
    assert reduced.n_features >= 1


def test_extract_ember_and_apiarg(tmp_path):
    raw = tmp_path / "raw"
    raw.mkdir()
    (raw / "a.bin").write_bytes(b"MZ" + bytes(range(256)) * 4)
    (raw / "b.bin").write_bytes(bytes(1000))
    ex = tmp_path / "ember"
    assert run(["extract", "--view", "ember", "--input", raw, "--out", ex]) == 0
    m = load_feature_file(ex / "features.mdf")
    assert m.n_features == 2381 and m.n_samples == 2

    reports = tmp_path / "reports"
    reports.mkdir()
    (reports / "r1.json").write_text(json.dumps(
        {"calls": [{"api": "CreateFileW", "arguments": {"path": "C:\\Windows\\system32\\x"}}]}
    ))
    (reports / "r2.json").write_text(json.dumps({"calls": []}))
    ex2 = tmp_path / "apiarg"
    assert run(["extract", "--view", "apiarg", "--input", reports,
                "--hash-dim", str(1 << 12), "--out", ex2]) == 0
    m2 = load_feature_file(ex2 / "features.mdf")
    assert m2.view == "apiarg" and m2.n_features == 1 << 12


def test_failure_is_single_line_and_cleans_outputs(tmp_path, capsys):
    out = tmp_path / "broken"
    status = run(["train", "--data", tmp_path / "missing", "--out", out])
    assert status == 1
    err = capsys.readouterr().err.strip()
    assert len(err.splitlines()) == 1
    assert err.startswith("maldistill-error: ")
    payload = json.loads(err.split("maldistill-error: ", 1)[1])
    assert payload["command"] == "train"
    assert not out.exists()


def test_config_file_rerun_reproduces_bitwise(tmp_path):
    ds1 = tmp_path / "ds1"
    assert run(GEN + ["--out", ds1]) == 0
    t1 = tmp_path / "t1"
    assert run(["train", "--data", ds1, "--views", "static", "--epochs", "3",
                "--batch-size", "16", "--seed", "7", "--out", t1]) == 0

    # dataset rerun from its manifest
    ds2 = tmp_path / "ds2"
    assert run(["gen-data", "--config", ds1 / "manifest.json", "--out", ds2]) == 0
    assert (ds1 / "static.mdf").read_bytes() == (ds2 / "static.mdf").read_bytes()
    assert (ds1 / "dataset.json").read_bytes() == (ds2 / "dataset.json").read_bytes()

    # training rerun from its manifest
    t2 = tmp_path / "t2"
    assert run(["train", "--config", t1 / "manifest.json", "--out", t2]) == 0
    assert _checkpoint_bytes(t1 / "checkpoint") == _checkpoint_bytes(t2 / "checkpoint")
    assert (t1 / "train_log.jsonl").read_bytes() == (t2 / "train_log.jsonl").read_bytes()
    assert (t1 / "manifest.json").read_bytes() == (t2 / "manifest.json").read_bytes()


def test_config_command_mismatch_rejected(tmp_path, capsys):
    ds = tmp_path / "ds"
    assert run(GEN + ["--out", ds]) == 0
    status = run(["eval", "--config", ds / "manifest.json", "--out", tmp_path / "x"])
    assert status == 1
    assert "recorded by" in capsys.readouterr().err


def test_arch_flag_accepts_spec_file(tmp_path):
    from maldistill.arch import auto_spec, save_spec

    ds = tmp_path / "ds"
    assert run(GEN + ["--out", ds]) == 0
    spec_path = tmp_path / "spec.json"
    save_spec(spec_path, auto_spec(40))
    t = tmp_path / "train"
    assert run(["train", "--data", ds, "--views", "static", "--arch", spec_path,
                "--epochs", "1", "--batch-size", "16", "--seed", "0", "--out", t]) == 0
    manifest = read_json(t / "checkpoint" / "manifest.json")
    assert manifest["spec"]["input_dim"] == 40
