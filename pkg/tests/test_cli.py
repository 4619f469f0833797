import json
from pathlib import Path

import numpy as np
import pytest

from gdlink.cli import main

GENE_DIM = "24"
DISEASE_DIM = "16"

COMMON_TRAIN_FLAGS = [
    "--gene-dim", GENE_DIM,
    "--disease-dim", DISEASE_DIM,
    "--epochs", "3",
    "--batch-size", "64",
    "--hidden-dim", "8",
    "--embed-dim", "4",
    "--dropout", "0.1",
    "--seed", "21",
]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """synth -> build-graph -> split, shared by the command tests."""
    root = tmp_path_factory.mktemp("pipeline")
    data = root / "data"
    assert main([
        "synth", "--out", str(data),
        "--n-genes", "40", "--n-diseases", "40",
        "--n-gd", "150", "--n-gg", "80", "--n-dd", "80",
        "--communities", "5", "--cluster-size", "2",
        "--gene-dim", GENE_DIM, "--disease-dim", DISEASE_DIM,
        "--seed", "17",
    ]) == 0
    graph = root / "graph.json"
    assert main([
        "build-graph",
        "--gg", str(data / "gg.tsv"),
        "--dd", str(data / "dd.tsv"),
        "--gd", str(data / "gd.tsv"),
        "--out", str(graph),
    ]) == 0
    split = root / "split"
    assert main([
        "split",
        "--graph", str(graph),
        "--clusters", str(data / "clusters.tsv"),
        "--out", str(split),
        "--seed", "21",
    ]) == 0
    return {
        "root": root,
        "data": data,
        "graph": graph,
        "split": split,
    }


@pytest.fixture(scope="module")
def trained(workspace):
    run = workspace["root"] / "run"
    rc = main([
        "train",
        "--graph", str(workspace["graph"]),
        "--gene-embeddings", str(workspace["data"] / "gene_embeddings.tsv"),
        "--disease-embeddings", str(workspace["data"] / "disease_embeddings.tsv"),
        "--split", str(workspace["split"]),
        "--out", str(run),
        *COMMON_TRAIN_FLAGS,
    ])
    assert rc == 0
    return run


def test_synth_writes_expected_files(workspace):
    for name in (
        "gg.tsv", "dd.tsv", "gd.tsv", "clusters.tsv",
        "gene_embeddings.tsv", "disease_embeddings.tsv", "synth.meta.json",
    ):
        assert (workspace["data"] / name).exists()


def test_build_graph_manifest_counts(tmp_path):
    (tmp_path / "gg.tsv").write_text("src\tdst\ng1\tg2\ng2\tg3\n")
    (tmp_path / "dd.tsv").write_text("src\tdst\nd1\td2\nd2\td3\n")
    (tmp_path / "gd.tsv").write_text("src\tdst\ng1\td1\ng2\td2\n")
    out = tmp_path / "g.json"
    assert main([
        "build-graph",
        "--gg", str(tmp_path / "gg.tsv"),
        "--dd", str(tmp_path / "dd.tsv"),
        "--gd", str(tmp_path / "gd.tsv"),
        "--out", str(out),
        "--name", "toy",
    ]) == 0
    manifest = (tmp_path / "g.manifest.tsv").read_text().splitlines()
    assert manifest[0].split("\t") == ["graph", "genes", "diseases", "gga", "dda", "gda"]
    assert manifest[1].split("\t") == ["toy", "3", "3", "2", "2", "2"]


def test_score_threshold_monotone(tmp_path):
    (tmp_path / "gg.tsv").write_text("src\tdst\ng1\tg2\n")
    (tmp_path / "dd.tsv").write_text("src\tdst\nd1\td2\n")
    (tmp_path / "gd.tsv").write_text(
        "src\tdst\tscore\ng1\td1\t0.95\ng1\td2\t0.4\ng2\td2\t0.07\n"
    )
    counts = {}
    for threshold in ("0.9", "0.05"):
        out = tmp_path / f"g{threshold}.json"
        assert main([
            "build-graph",
            "--gg", str(tmp_path / "gg.tsv"),
            "--dd", str(tmp_path / "dd.tsv"),
            "--gd", str(tmp_path / "gd.tsv"),
            "--gd-score-threshold", threshold,
            "--out", str(out),
        ]) == 0
        row = (tmp_path / f"g{threshold}.manifest.tsv").read_text().splitlines()[1]
        counts[threshold] = int(row.split("\t")[-1])
    assert counts["0.9"] == 1
    assert counts["0.05"] >= counts["0.9"]


def test_split_rerun_is_byte_identical(workspace, tmp_path):
    again = tmp_path / "split2"
    assert main([
        "split",
        "--graph", str(workspace["graph"]),
        "--clusters", str(workspace["data"] / "clusters.tsv"),
        "--out", str(again),
        "--seed", "21",
    ]) == 0
    for name in ("train.tsv", "val.tsv", "test.tsv", "split.meta.json"):
        assert (again / name).read_bytes() == (workspace["split"] / name).read_bytes()


def test_audit_only_flags_corruption(workspace, tmp_path):
    corrupt = tmp_path / "corrupt"
    corrupt.mkdir()
    for name in ("train.tsv", "val.tsv", "test.tsv", "split.meta.json"):
        (corrupt / name).write_bytes((workspace["split"] / name).read_bytes())
    # Move the first val positive into train: its gene's cluster now spans two splits.
    val_lines = (corrupt / "val.tsv").read_text().splitlines()
    moved = next(l for l in val_lines[1:] if l.endswith("\t1"))
    val_lines.remove(moved)
    (corrupt / "val.tsv").write_text("\n".join(val_lines) + "\n")
    train_lines = (corrupt / "train.tsv").read_text().splitlines()
    train_lines.append(moved)
    (corrupt / "train.tsv").write_text("\n".join(train_lines) + "\n")
    rc = main([
        "split", "--audit-only",
        "--graph", str(workspace["graph"]),
        "--clusters", str(workspace["data"] / "clusters.tsv"),
        "--split-dir", str(corrupt),
    ])
    assert rc == 2


def test_audit_only_clean_split_exits_zero(workspace):
    rc = main([
        "split", "--audit-only",
        "--graph", str(workspace["graph"]),
        "--clusters", str(workspace["data"] / "clusters.tsv"),
        "--split-dir", str(workspace["split"]),
    ])
    assert rc == 0


def test_train_outputs_and_rerun_determinism(workspace, trained, tmp_path):
    assert (trained / "checkpoint.npz").exists()
    assert (trained / "trainlog.tsv").exists()
    assert (trained / "run.txt").exists()
    rerun = tmp_path / "rerun"
    assert main([
        "train",
        "--graph", str(workspace["graph"]),
        "--gene-embeddings", str(workspace["data"] / "gene_embeddings.tsv"),
        "--disease-embeddings", str(workspace["data"] / "disease_embeddings.tsv"),
        "--split", str(workspace["split"]),
        "--out", str(rerun),
        *COMMON_TRAIN_FLAGS,
    ]) == 0
    assert (rerun / "trainlog.tsv").read_bytes() == (trained / "trainlog.tsv").read_bytes()


def test_evaluate_val_matches_trainlog_best_epoch(workspace, trained, capsys):
    rc = main([
        "evaluate",
        "--checkpoint", str(trained / "checkpoint.npz"),
        "--graph", str(workspace["graph"]),
        "--gene-embeddings", str(workspace["data"] / "gene_embeddings.tsv"),
        "--disease-embeddings", str(workspace["data"] / "disease_embeddings.tsv"),
        "--split", str(workspace["split"]),
        "--which", "val",
    ])
    assert rc == 0
    out_lines = capsys.readouterr().out.strip().splitlines()
    header = out_lines[-2].split("\t")
    values = dict(zip(header, out_lines[-1].split("\t")))

    log_lines = (trained / "trainlog.tsv").read_text().splitlines()
    run = dict(
        line.split("=", 1) for line in (trained / "run.txt").read_text().splitlines()
    )
    best_epoch = int(run["best_epoch"])
    log_header = log_lines[0].split("\t")
    best_row = dict(zip(log_header, log_lines[best_epoch].split("\t")))
    assert values["roc_auc"] == best_row["val_rocauc"]


def test_evaluate_artifact_mismatch(workspace, trained, tmp_path):
    tampered = tmp_path / "tampered.tsv"
    original = (workspace["data"] / "gene_embeddings.tsv").read_text()
    tampered.write_text(original.replace("0.", "0.0", 1))
    rc = main([
        "evaluate",
        "--checkpoint", str(trained / "checkpoint.npz"),
        "--graph", str(workspace["graph"]),
        "--gene-embeddings", str(tampered),
        "--disease-embeddings", str(workspace["data"] / "disease_embeddings.tsv"),
        "--split", str(workspace["split"]),
        "--which", "val",
    ])
    assert rc == 1


def test_predict_ranking(workspace, trained, capsys):
    graph_payload = json.loads(workspace["graph"].read_text())
    disease_id = next(n for n, kind in graph_payload["nodes"] if kind == "disease")
    rc = main([
        "predict",
        "--checkpoint", str(trained / "checkpoint.npz"),
        "--graph", str(workspace["graph"]),
        "--gene-embeddings", str(workspace["data"] / "gene_embeddings.tsv"),
        "--disease-embeddings", str(workspace["data"] / "disease_embeddings.tsv"),
        "--disease", disease_id,
        "--top-k", "1000",
    ])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split("\t") == ["rank", "gene_id", "disease_id", "probability", "known_edge"]
    rows = [l.split("\t") for l in lines[1:]]
    assert len(rows) == 40  # top_k above candidate count returns everything
    probs = [float(r[3]) for r in rows]
    assert probs == sorted(probs, reverse=True)
    assert {r[4] for r in rows} <= {"0", "1"}


def test_predict_excludes_known_edges(workspace, trained, capsys):
    graph_payload = json.loads(workspace["graph"].read_text())
    gd_edges = graph_payload["edges"]["GD"]
    nodes = graph_payload["nodes"]
    disease_idx = gd_edges[0][1]
    disease_id = nodes[disease_idx][0]
    known_genes = {nodes[g][0] for g, d in gd_edges if d == disease_idx}
    rc = main([
        "predict",
        "--checkpoint", str(trained / "checkpoint.npz"),
        "--graph", str(workspace["graph"]),
        "--gene-embeddings", str(workspace["data"] / "gene_embeddings.tsv"),
        "--disease-embeddings", str(workspace["data"] / "disease_embeddings.tsv"),
        "--disease", disease_id,
        "--exclude-known",
    ])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    listed = {l.split("\t")[1] for l in lines[1:]}
    assert not listed & known_genes


def test_predict_unknown_id(workspace, trained):
    rc = main([
        "predict",
        "--checkpoint", str(trained / "checkpoint.npz"),
        "--graph", str(workspace["graph"]),
        "--gene-embeddings", str(workspace["data"] / "gene_embeddings.tsv"),
        "--disease-embeddings", str(workspace["data"] / "disease_embeddings.tsv"),
        "--disease", "NOPE",
    ])
    assert rc == 1


def test_config_file_and_env_precedence(workspace, tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed=5\nepochs=2\n")
    monkeypatch.setenv("GDLINK_SEED", "6")
    out = tmp_path / "s"
    assert main([
        "split",
        "--graph", str(workspace["graph"]),
        "--clusters", str(workspace["data"] / "clusters.tsv"),
        "--out", str(out),
        "--config", str(cfg),
    ]) == 0
    meta = json.loads((out / "split.meta.json").read_text())
    assert meta["seed"] == 6  # env beats file
    out2 = tmp_path / "s2"
    assert main([
        "split",
        "--graph", str(workspace["graph"]),
        "--clusters", str(workspace["data"] / "clusters.tsv"),
        "--out", str(out2),
        "--config", str(cfg),
        "--seed", "7",
    ]) == 0
    meta2 = json.loads((out2 / "split.meta.json").read_text())
    assert meta2["seed"] == 7  # flag beats env

    bad = tmp_path / "bad.cfg"
    bad.write_text("not_a_key=3\n")
    assert main([
        "split",
        "--graph", str(workspace["graph"]),
        "--clusters", str(workspace["data"] / "clusters.tsv"),
        "--out", str(tmp_path / "s3"),
        "--config", str(bad),
    ]) == 1


def test_ablate_emits_four_rows_and_matches_standalone_run(
    workspace, trained, tmp_path, capsys
):
    out = tmp_path / "ablation"
    rc = main([
        "ablate",
        "--graph", str(workspace["graph"]),
        "--clusters", str(workspace["data"] / "clusters.tsv"),
        "--gene-embeddings", str(workspace["data"] / "gene_embeddings.tsv"),
        "--disease-embeddings", str(workspace["data"] / "disease_embeddings.tsv"),
        "--out", str(out),
        *COMMON_TRAIN_FLAGS,
    ])
    assert rc == 0
    capsys.readouterr()
    lines = (out / "ablation.tsv").read_text().splitlines()
    assert len(lines) == 5
    header = lines[0].split("\t")
    assert header[:2] == ["embedding_default", "negatives_constrained"]
    rows = [l.split("\t") for l in lines[1:]]
    assert [(r[0], r[1]) for r in rows] == [("N", "N"), ("N", "Y"), ("Y", "N"), ("Y", "Y")]
    assert {r[-1] for r in rows} == {"21"}  # shared seed recorded per row

    # The default configuration row must equal a standalone train + evaluate
    # with the same seeds (the `trained` fixture used an identically seeded
    # split and configuration).
    default_row = dict(zip(header, rows[-1]))
    rc = main([
        "evaluate",
        "--checkpoint", str(trained / "checkpoint.npz"),
        "--graph", str(workspace["graph"]),
        "--gene-embeddings", str(workspace["data"] / "gene_embeddings.tsv"),
        "--disease-embeddings", str(workspace["data"] / "disease_embeddings.tsv"),
        "--split", str(workspace["split"]),
        "--which", "val",
    ])
    assert rc == 0
    out_lines = capsys.readouterr().out.strip().splitlines()
    standalone = dict(zip(out_lines[-2].split("\t"), out_lines[-1].split("\t")))
    assert default_row["val_rocauc"] == standalone["roc_auc"]
    assert default_row["val_acc"] == standalone["acc"]
    assert default_row["val_f1"] == standalone["f1"]


def test_checkpoint_dir_env_override(workspace, tmp_path, monkeypatch):
    ckpt_dir = tmp_path / "ckpts"
    monkeypatch.setenv("GDLINK_CHECKPOINT_DIR", str(ckpt_dir))
    out = tmp_path / "run"
    assert main([
        "train",
        "--graph", str(workspace["graph"]),
        "--gene-embeddings", str(workspace["data"] / "gene_embeddings.tsv"),
        "--disease-embeddings", str(workspace["data"] / "disease_embeddings.tsv"),
        "--split", str(workspace["split"]),
        "--out", str(out),
        "--gene-dim", GENE_DIM, "--disease-dim", DISEASE_DIM,
        "--epochs", "1", "--hidden-dim", "8", "--embed-dim", "4", "--seed", "21",
    ]) == 0
    assert (ckpt_dir / "checkpoint.npz").exists()
    assert not (out / "checkpoint.npz").exists()
