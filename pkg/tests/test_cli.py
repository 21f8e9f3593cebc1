import io
import json
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from boog.cli import main
from boog.encoder import init_encoder_params
from boog.graph_store import load_dataset, load_embeddings
from boog.pretrain import load_checkpoint


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def payload(out):
    return json.loads(out)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One synthetic dataset plus a short pre-training run, shared by the
    read-only CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data.json"
    ckpt = root / "ckpt.json"
    code, _, _ = run("synth", "--profile", "citation", "--n", 120,
                     "--classes", 3, "--dim", 16, "--seed", 0,
                     "--out", data)
    assert code == 0
    code, _, _ = run("pretrain", "--dataset", data, "--out", ckpt,
                     "--epochs", 10, "--seed", 0)
    assert code == 0
    return root, data, ckpt


# ------------------------------------------------------------------ synth

def test_synth_round_trips_through_loader(tmp_path):
    out = tmp_path / "d.json"
    code, stdout, _ = run("synth", "--n", 40, "--classes", 2, "--dim", 8,
                          "--seed", 1, "--out", out)
    assert code == 0
    doc = payload(stdout)
    assert doc["task"] == "node" and doc["n"] == 40
    collection, catalog, split, task = load_dataset(out)
    assert task == "node"
    assert catalog.num_classes == 2
    assert collection.graphs[0].node_count == 40


def test_synth_rejects_fewer_instances_than_classes(tmp_path):
    code, stdout, stderr = run("synth", "--n", 2, "--classes", 5,
                               "--out", tmp_path / "d.json")
    assert code == 1
    assert stdout == ""
    assert "n >= C" in stderr


def test_synth_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        code, _, _ = run("synth", "--n", 30, "--classes", 3, "--dim", 8,
                         "--seed", 9, "--out", path)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()


def test_synth_molecule_profile_makes_graph_task(tmp_path):
    out = tmp_path / "m.json"
    code, stdout, _ = run("synth", "--profile", "molecule", "--n", 36,
                          "--classes", 2, "--dim", 8, "--seed", 0,
                          "--out", out)
    assert code == 0
    assert payload(stdout)["task"] == "graph"
    _, _, _, task = load_dataset(out)
    assert task == "graph"


def test_synth_can_share_a_catalog(tmp_path, workspace):
    _, data, _ = workspace
    out = tmp_path / "shared.json"
    code, _, _ = run("synth", "--profile", "molecule", "--n", 54,
                     "--classes", 3, "--dim", 16, "--seed", 2,
                     "--catalog-from", data, "--out", out)
    assert code == 0
    _, cat_a, _, _ = load_dataset(data)
    _, cat_b, _, _ = load_dataset(out)
    np.testing.assert_array_equal(cat_a.class_embeddings,
                                  cat_b.class_embeddings)


# --------------------------------------------------------------- pretrain

def test_pretrain_writes_checkpoint_and_trace(workspace, tmp_path):
    _, data, _ = workspace
    ckpt = tmp_path / "c.json"
    trace = tmp_path / "t.jsonl"
    code, stdout, _ = run("pretrain", "--dataset", data, "--out", ckpt,
                          "--epochs", 5, "--trace", trace, "--seed", 0)
    assert code == 0
    doc = payload(stdout)
    assert doc["final_loss"] < doc["first_epoch_loss"]
    rows = [json.loads(line) for line in trace.read_text().splitlines()]
    assert [r["epoch"] for r in rows] == list(range(5))
    load_checkpoint(ckpt)  # parses and validates


def test_pretrain_zero_epochs_equals_initialization(workspace, tmp_path):
    _, data, _ = workspace
    ckpt = tmp_path / "c.json"
    code, _, _ = run("pretrain", "--dataset", data, "--out", ckpt,
                     "--epochs", 0, "--seed", 4)
    assert code == 0
    got = load_checkpoint(ckpt).params
    want = init_encoder_params(16, 4)
    np.testing.assert_array_equal(got.self_proj, want.self_proj)
    np.testing.assert_array_equal(got.score_vec, want.score_vec)


def test_pretrain_missing_dataset_is_io_failure(tmp_path):
    code, _, stderr = run("pretrain", "--dataset", tmp_path / "nope.json",
                          "--out", tmp_path / "c.json")
    assert code == 2
    assert "io failure" in stderr


def test_pretrain_numerical_blowup_is_exit_3(workspace, tmp_path):
    _, data, _ = workspace
    code, _, stderr = run("pretrain", "--dataset", data,
                          "--out", tmp_path / "c.json", "--lr", "1e200",
                          "--epochs", 1, "--batch-size", 8)
    assert code == 3
    assert "numerical failure" in stderr


def test_pretrain_workers_bit_identical(workspace, tmp_path):
    _, data, _ = workspace
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    code, _, _ = run("pretrain", "--dataset", data, "--out", a,
                     "--epochs", 3, "--seed", 1, "--workers", 1)
    assert code == 0
    code, _, _ = run("pretrain", "--dataset", data, "--out", b,
                     "--epochs", 3, "--seed", 1, "--workers", 3)
    assert code == 0
    assert a.read_bytes() == b.read_bytes()


# ------------------------------------------------------------------- eval

def test_eval_zero_shot_report_shape(workspace):
    _, data, ckpt = workspace
    code, stdout, _ = run("eval", "--dataset", data, "--checkpoint", ckpt,
                          "--regime", "zero-shot")
    assert code == 0
    doc = payload(stdout)
    assert doc["regime"] == "zero-shot"
    assert doc["metric"] == "accuracy"
    assert 0.0 <= doc["value"] <= 1.0
    assert doc["n_test"] == 24
    assert doc["task"] == "node"


@pytest.mark.parametrize("regime,metric", [
    ("few-shot", "accuracy"),
    ("supervised", "accuracy"),
    ("link-zero", "roc_auc"),
    ("link-supervised", "roc_auc"),
])
def test_eval_all_regimes_run(workspace, regime, metric):
    _, data, ckpt = workspace
    code, stdout, _ = run("eval", "--dataset", data, "--checkpoint", ckpt,
                          "--regime", regime, "--steps", 50)
    assert code == 0
    doc = payload(stdout)
    assert doc["metric"] == metric
    assert 0.0 <= doc["value"] <= 1.0


def test_eval_appends_to_results_file(workspace, tmp_path):
    _, data, ckpt = workspace
    results = tmp_path / "res.jsonl"
    for _ in range(2):
        code, _, _ = run("eval", "--dataset", data, "--checkpoint", ckpt,
                         "--regime", "zero-shot", "--results", results)
        assert code == 0
    rows = [json.loads(line) for line in results.read_text().splitlines()]
    assert len(rows) == 2
    assert rows[0] == rows[1]
    assert set(rows[0]) == {"task", "regime", "metric", "value", "seed",
                            "n_test"}


def test_eval_rejects_unknown_regime(workspace):
    _, data, ckpt = workspace
    code, _, stderr = run("eval", "--dataset", data, "--checkpoint", ckpt,
                          "--regime", "transductive")
    assert code == 1
    assert "regime" in stderr


def test_eval_dim_mismatch_fails_before_training(workspace, tmp_path):
    _, data, _ = workspace
    other = tmp_path / "d8.json"
    ckpt8 = tmp_path / "c8.json"
    assert run("synth", "--n", 40, "--classes", 2, "--dim", 8,
               "--out", other)[0] == 0
    assert run("pretrain", "--dataset", other, "--out", ckpt8,
               "--epochs", 0)[0] == 0
    code, _, stderr = run("eval", "--dataset", data, "--checkpoint", ckpt8,
                          "--regime", "supervised")
    assert code == 1
    assert "dim" in stderr


# ------------------------------------------------------------------- grid

def test_grid_single_point_returns_it(workspace):
    _, data, _ = workspace
    code, stdout, _ = run("grid", "--dataset", data, "--epochs", 2,
                          "--lr", "0.05")
    assert code == 0
    doc = payload(stdout)
    assert len(doc["table"]) == 1
    assert doc["best"]["lr"] == 0.05


def test_grid_two_by_two_best_is_max(workspace):
    _, data, _ = workspace
    code, stdout, _ = run("grid", "--dataset", data, "--epochs", 3,
                          "--alpha", "0.2,0.8", "--tau", "0.5,1.0")
    assert code == 0
    doc = payload(stdout)
    assert len(doc["table"]) == 4
    best = max(row["metric"] for row in doc["table"])
    assert doc["best_metric"] == best


def test_grid_ties_break_to_lowest_config(workspace):
    # epochs=0 leaves the encoder at initialization and lr/weight-decay
    # only affect training, so all four points tie exactly
    _, data, _ = workspace
    code, stdout, _ = run("grid", "--dataset", data, "--epochs", 0,
                          "--lr", "0.2,0.1", "--weight-decay", "1e-3,1e-4")
    assert code == 0
    doc = payload(stdout)
    metrics = {row["metric"] for row in doc["table"]}
    assert len(metrics) == 1
    assert doc["best"]["lr"] == 0.1
    assert doc["best"]["weight-decay"] == 1e-4


# ------------------------------------------------------------------ bench

def test_bench_single_size(tmp_path):
    code, stdout, _ = run("bench", "--sizes", "60", "--repetitions", 1,
                          "--dim", 8)
    assert code == 0
    doc = payload(stdout)
    assert len(doc["table"]) == 1
    row = doc["table"][0]
    assert row["n"] == 60
    assert row["ratio_vs_prev"] is None
    assert row["seconds"] > 0


def test_bench_rejects_unsorted_sizes():
    code, _, stderr = run("bench", "--sizes", "100,50")
    assert code == 1
    assert "ascending" in stderr


# ------------------------------------------------------------ export-repr

def test_export_repr_writes_loadable_embeddings(workspace, tmp_path):
    _, data, ckpt = workspace
    out = tmp_path / "z.bin"
    code, stdout, _ = run("export-repr", "--dataset", data,
                          "--checkpoint", ckpt, "--out", out,
                          "--split", "test")
    assert code == 0
    doc = payload(stdout)
    vectors = load_embeddings(out)
    assert len(vectors) == doc["count"] == 24
    assert vectors[0].shape == (16,)


def test_export_repr_rejects_bad_split(workspace, tmp_path):
    _, data, ckpt = workspace
    code, _, stderr = run("export-repr", "--dataset", data,
                          "--checkpoint", ckpt,
                          "--out", tmp_path / "z.bin", "--split", "dev")
    assert code == 1
    assert "split" in stderr


# ----------------------------------------------------- config file + env

def test_config_file_supplies_values(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 30\nclasses = 3\ndim = 8  # trailing comment\n"
                   "seed = 5\n\n# full-line comment\n")
    out = tmp_path / "d.json"
    code, stdout, _ = run("synth", "--config", cfg, "--out", out)
    assert code == 0
    doc = payload(stdout)
    assert doc["n"] == 30 and doc["dim"] == 8 and doc["seed"] == 5


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 30\ndim = 8\n")
    code, stdout, _ = run("synth", "--config", cfg, "--n", 60,
                          "--out", tmp_path / "d.json")
    assert code == 0
    assert payload(stdout)["n"] == 60


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("bogus = 1\n")
    code, _, stderr = run("synth", "--config", cfg,
                          "--out", tmp_path / "d.json")
    assert code == 1
    assert "bogus" in stderr


def test_malformed_config_line_rejected(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("just some words\n")
    code, _, stderr = run("synth", "--config", cfg,
                          "--out", tmp_path / "d.json")
    assert code == 1
    assert "key=value" in stderr


def test_seed_falls_back_to_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BOOG_SEED", "7")
    code, stdout, _ = run("synth", "--n", 20, "--classes", 2, "--dim", 4,
                          "--out", tmp_path / "d.json")
    assert code == 0
    assert payload(stdout)["seed"] == 7


def test_explicit_seed_beats_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BOOG_SEED", "7")
    code, stdout, _ = run("synth", "--n", 20, "--classes", 2, "--dim", 4,
                          "--seed", 1, "--out", tmp_path / "d.json")
    assert code == 0
    assert payload(stdout)["seed"] == 1


# ------------------------------------------------------------- plumbing

def test_missing_required_flag_is_validation_failure():
    code, _, stderr = run("synth")
    assert code == 1
    assert "--out" in stderr


def test_no_command_is_validation_failure():
    code, _, stderr = run()
    assert code == 1


def test_unknown_flag_is_validation_failure(tmp_path):
    code, _, _ = run("synth", "--frobnicate", 3, "--out", tmp_path / "d")
    assert code == 1


def test_bad_integer_flag_is_validation_failure(tmp_path):
    code, _, stderr = run("synth", "--n", "many", "--out", tmp_path / "d")
    assert code == 1
    assert "integer" in stderr


def test_stdout_is_pure_json(workspace):
    _, data, ckpt = workspace
    code, stdout, stderr = run("eval", "--dataset", data,
                               "--checkpoint", ckpt,
                               "--regime", "zero-shot")
    assert code == 0
    json.loads(stdout)  # a single parseable document
    assert stderr != ""  # human log landed on stderr
