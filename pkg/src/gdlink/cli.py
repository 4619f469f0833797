"""Command-line pipeline: build-graph, split, train, evaluate, predict, ablate, synth.

Every command resolves one layered configuration (flags > env > file >
defaults), hashes its input artifacts, and writes deterministic outputs,
so identical seeds reproduce identical files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import dataset as ds
from . import features as feat
from . import graph as gr
from . import model as mdl
from . import synth as syn
from . import training as trn
from .errors import ArtifactMismatch, PipelineError, UnknownEntity
from .metrics import METRIC_COLUMNS, MetricReport

logger = logging.getLogger("gdlink")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_AUDIT = 2

CHECKPOINT_DIR_ENV = "GDLINK_CHECKPOINT_DIR"

# CLI flag name (dest) -> config key, attached to commands that train/split.
_FLAG_KEYS = {
    "seed": "seed",
    "epochs": "epochs",
    "learning_rate": "learning_rate",
    "batch_size": "batch_size",
    "dropout": "dropout",
    "weight_decay": "weight_decay",
    "w0": "w0",
    "w1": "w1",
    "hidden_dim": "hidden_dim",
    "embed_dim": "embed_dim",
    "final_activation": "final_activation",
    "align_mode": "align_mode",
    "missing": "missing",
    "gene_dim": "gene_dim",
    "disease_dim": "disease_dim",
    "train_ratio": "train_ratio",
    "val_ratio": "val_ratio",
    "test_ratio": "test_ratio",
    "negative_mode": "negative_mode",
    "degree_aware": "degree_aware",
    "alpha": "alpha",
    "degree_source": "degree_source",
    "resample_train_negatives": "resample_train_negatives",
    "full_graph_batching": "full_graph_batching",
    "subgraph_hops": "subgraph_hops",
    "threshold": "threshold",
    "mix_gg": "mix_gg",
    "mix_dd": "mix_dd",
    "mix_gd": "mix_gd",
}


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="key=value config file")
    g = parser.add_argument_group("configuration overrides")
    g.add_argument("--seed", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--learning-rate", dest="learning_rate", type=float)
    g.add_argument("--batch-size", dest="batch_size", type=int)
    g.add_argument("--dropout", type=float)
    g.add_argument("--weight-decay", dest="weight_decay", type=float)
    g.add_argument("--w0", type=float)
    g.add_argument("--w1", type=float)
    g.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    g.add_argument("--embed-dim", dest="embed_dim", type=int)
    g.add_argument("--final-activation", dest="final_activation", choices=["relu", "none"])
    g.add_argument("--align-mode", dest="align_mode", choices=["default", "ablation"])
    g.add_argument("--missing", choices=["error", "zero_fill"])
    g.add_argument("--gene-dim", dest="gene_dim", type=int)
    g.add_argument("--disease-dim", dest="disease_dim", type=int)
    g.add_argument("--train-ratio", dest="train_ratio", type=float)
    g.add_argument("--val-ratio", dest="val_ratio", type=float)
    g.add_argument("--test-ratio", dest="test_ratio", type=float)
    g.add_argument(
        "--negative-mode", dest="negative_mode", choices=["constrained", "unconstrained"]
    )
    g.add_argument("--degree-aware", dest="degree_aware", action=argparse.BooleanOptionalAction)
    g.add_argument("--alpha", type=float)
    g.add_argument("--degree-source", dest="degree_source", choices=["total", "gd"])
    g.add_argument(
        "--resample-train-negatives",
        dest="resample_train_negatives",
        action=argparse.BooleanOptionalAction,
    )
    g.add_argument(
        "--full-graph-batching",
        dest="full_graph_batching",
        action=argparse.BooleanOptionalAction,
    )
    g.add_argument("--subgraph-hops", dest="subgraph_hops", type=int, choices=[1, 2])
    g.add_argument("--threshold", type=float)
    g.add_argument("--mix-gg", dest="mix_gg", type=float)
    g.add_argument("--mix-dd", dest="mix_dd", type=float)
    g.add_argument("--mix-gd", dest="mix_gd", type=float)


def _resolve(args: argparse.Namespace) -> dict:
    overrides = {}
    for dest, key in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    return cfgmod.resolve_config(file_path=getattr(args, "config", None), overrides=overrides)


def _mixing_weights(cfg: dict) -> dict[gr.RelationKind, float]:
    return {
        gr.RelationKind.GG: cfg["mix_gg"],
        gr.RelationKind.DD: cfg["mix_dd"],
        gr.RelationKind.GD: cfg["mix_gd"],
    }


def _load_features(graph: gr.HeteroGraph, gene_path: Path, disease_path: Path, cfg: dict) -> feat.FeatureMatrix:
    raws = feat.load_embeddings(gene_path, feat.NodeKind.GENE, expected=cfg["gene_dim"])
    raws += feat.load_embeddings(disease_path, feat.NodeKind.DISEASE, expected=cfg["disease_dim"])
    return feat.align_features(
        graph,
        raws,
        mode=cfg["align_mode"],
        missing_policy=cfg["missing"],
        gene_dim=cfg["gene_dim"],
        disease_dim=cfg["disease_dim"],
    )


def _split_dir_hash(directory: Path) -> str:
    import hashlib

    h = hashlib.sha256()
    for name in ("train.tsv", "val.tsv", "test.tsv", ds.SPLIT_META_NAME):
        h.update(name.encode())
        h.update((directory / name).read_bytes())
    return h.hexdigest()


def _train_config(cfg: dict) -> trn.TrainConfig:
    return trn.TrainConfig(
        learning_rate=cfg["learning_rate"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        w0=cfg["w0"],
        w1=cfg["w1"],
        weight_decay=cfg["weight_decay"],
        dropout=cfg["dropout"],
        seed=cfg["seed"],
        resample_train_negatives=cfg["resample_train_negatives"],
        full_graph_batching=cfg["full_graph_batching"],
        subgraph_hops=cfg["subgraph_hops"],
        hidden_dim=cfg["hidden_dim"],
        embed_dim=cfg["embed_dim"],
        final_activation=cfg["final_activation"],
    )


# -- commands ------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    dataset = syn.make_planted_dataset(
        n_genes=args.n_genes,
        n_diseases=args.n_diseases,
        n_gd=args.n_gd,
        n_gg=args.n_gg,
        n_dd=args.n_dd,
        n_communities=args.communities,
        within_prob=args.within_prob,
        cluster_size=args.cluster_size,
        seed=args.seed,
    )
    paths = syn.write_synthetic_files(
        dataset,
        args.out,
        embedding_seed=args.seed + 1,
        gene_dim=args.gene_dim,
        disease_dim=args.disease_dim,
        signal=args.signal,
    )
    for key, path in sorted(paths.items()):
        print(f"{key}\t{path}")
    return EXIT_OK


def cmd_build_graph(args: argparse.Namespace) -> int:
    graph = gr.build_graph_from_files(
        args.gg, args.dd, args.gd, gd_score_threshold=args.gd_score_threshold
    )
    gr.save_graph(graph, args.out)
    manifest = gr.graph_manifest(graph, name=args.name or Path(args.out).stem)
    manifest_path = Path(args.out).with_suffix(".manifest.tsv")
    manifest_path.write_text(gr.manifest_tsv(manifest), encoding="utf-8")
    print(gr.manifest_tsv(manifest), end="")
    return EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    graph = gr.load_graph(args.graph)
    clusters = ds.ClusterMap.from_tsv(args.clusters)

    if args.audit_only:
        split = ds.load_split_manifests(args.split_dir, graph)
        report = ds.check_leakage(graph, split, clusters)
        _print_audit(report)
        return EXIT_OK if report.ok else EXIT_AUDIT

    ratios = (cfg["train_ratio"], cfg["val_ratio"], cfg["test_ratio"])
    split = ds.build_edge_split(
        graph,
        clusters,
        ratios=ratios,
        seed=cfg["seed"],
        mode=cfg["negative_mode"],
        degree_aware=cfg["degree_aware"],
        alpha=cfg["alpha"],
        degree_source=cfg["degree_source"],
    )
    report = ds.check_leakage(graph, split, clusters)
    ds.write_split_manifests(
        args.out,
        graph,
        split,
        extra_meta={
            "graph_sha256": cfgmod.sha256_file(args.graph),
            "leakage_violations": len(report.violations),
            "fractions": {k: round(v, 6) for k, v in report.fractions.items()},
        },
    )
    _print_audit(report)
    return EXIT_OK if report.ok else EXIT_AUDIT


def _print_audit(report: ds.LeakageReport) -> None:
    print(f"leakage_violations\t{len(report.violations)}")
    for cid, splits in report.violations:
        print(f"violation\t{cid}\t{','.join(splits)}")
    for name in ds.SPLIT_NAMES:
        print(f"{name}_pairs\t{report.split_sizes[name]}\tfraction\t{report.fractions[name]:.4f}")


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    graph = gr.load_graph(args.graph)
    split_dir = Path(args.split)
    meta = json.loads((split_dir / ds.SPLIT_META_NAME).read_text(encoding="utf-8"))
    graph_sha = cfgmod.sha256_file(args.graph)
    if meta.get("graph_sha256") not in (None, graph_sha):
        raise ArtifactMismatch(
            f"split was built from graph {meta['graph_sha256'][:12]}..., "
            f"got {graph_sha[:12]}..."
        )
    split = ds.load_split_manifests(split_dir, graph)
    fm = _load_features(graph, args.gene_embeddings, args.disease_embeddings, cfg)
    op = trn.build_context_operator(graph, split, _mixing_weights(cfg))

    params, log = trn.train(graph, op, fm.matrix, split, _train_config(cfg))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_dir = Path(os.environ.get(CHECKPOINT_DIR_ENV, out_dir))
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = ckpt_dir / "checkpoint.npz"

    hashes = {
        "graph_sha256": graph_sha,
        "gene_embeddings_sha256": cfgmod.sha256_file(args.gene_embeddings),
        "disease_embeddings_sha256": cfgmod.sha256_file(args.disease_embeddings),
        "split_sha256": _split_dir_hash(split_dir),
    }
    mdl.save_checkpoint(
        ckpt_path, params, val_roc_auc=log.best_val_roc_auc, config={**cfg, **hashes}
    )
    (out_dir / "trainlog.tsv").write_text(log.tsv(), encoding="utf-8")
    descriptor = {**cfg, **hashes}
    descriptor["config_sha256"] = cfgmod.config_hash(cfg)
    descriptor["best_epoch"] = log.best_epoch
    descriptor["best_val_rocauc"] = format(log.best_val_roc_auc, ".10g")
    descriptor["checkpoint"] = str(ckpt_path)
    cfgmod.write_run_descriptor(out_dir / "run.txt", descriptor)
    print(f"best_epoch\t{log.best_epoch}")
    print(f"best_val_rocauc\t{log.best_val_roc_auc:.10g}")
    print(f"checkpoint\t{ckpt_path}")
    return EXIT_OK


def _verify_artifacts(ckpt_cfg: dict, args: argparse.Namespace) -> None:
    expected = {
        "graph_sha256": cfgmod.sha256_file(args.graph),
        "gene_embeddings_sha256": cfgmod.sha256_file(args.gene_embeddings),
        "disease_embeddings_sha256": cfgmod.sha256_file(args.disease_embeddings),
    }
    if getattr(args, "split", None):
        expected["split_sha256"] = _split_dir_hash(Path(args.split))
    for key, actual in expected.items():
        recorded = ckpt_cfg.get(key)
        if recorded is not None and recorded != actual:
            raise ArtifactMismatch(f"{key}: checkpoint saw {recorded[:12]}..., got {actual[:12]}...")


def cmd_evaluate(args: argparse.Namespace) -> int:
    params, _, ckpt_cfg = mdl.load_checkpoint(args.checkpoint)
    _verify_artifacts(ckpt_cfg, args)
    cfg = {**cfgmod.CONFIG_DEFAULTS, **{k: v for k, v in ckpt_cfg.items() if k in cfgmod.CONFIG_DEFAULTS}}
    graph = gr.load_graph(args.graph)
    split = ds.load_split_manifests(args.split, graph)
    fm = _load_features(graph, args.gene_embeddings, args.disease_embeddings, cfg)
    op = trn.build_context_operator(graph, split, _mixing_weights(cfg))
    pairs = ds.pairs_to_array(split.pairs(args.which))
    report = trn.evaluate_pairs(params, op, fm.matrix, pairs)
    header = "\t".join(METRIC_COLUMNS)
    row = report.tsv_row()
    print(header)
    print(row)
    if args.out:
        Path(args.out).write_text(f"{header}\n{row}\n", encoding="utf-8")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    params, _, ckpt_cfg = mdl.load_checkpoint(args.checkpoint)
    _verify_artifacts(ckpt_cfg, args)
    cfg = {**cfgmod.CONFIG_DEFAULTS, **{k: v for k, v in ckpt_cfg.items() if k in cfgmod.CONFIG_DEFAULTS}}
    graph = gr.load_graph(args.graph)
    fm = _load_features(graph, args.gene_embeddings, args.disease_embeddings, cfg)
    op = gr.build_propagation_operator(graph, _mixing_weights(cfg))

    query_id = args.disease or args.gene
    anchor = graph.index_of(query_id)
    if anchor is None:
        raise UnknownEntity(query_id)
    if args.disease:
        candidates = graph.indices_of_kind(gr.NodeKind.GENE)
        make_pair = lambda c: (int(c), anchor)
    else:
        candidates = graph.indices_of_kind(gr.NodeKind.DISEASE)
        make_pair = lambda c: (anchor, int(c))

    trace = mdl.encode(params, op, fm.matrix, training=False)
    pair_arr = np.array([make_pair(c) for c in candidates], dtype=np.int64)
    _, probs = mdl.decode_pairs(trace.Z, pair_arr)

    rows = []
    for (g, d), prob in zip(pair_arr, probs):
        known = graph.has_edge(gr.RelationKind.GD, int(g), int(d))
        if args.exclude_known and known:
            continue
        rows.append((float(prob), graph.id_of(int(g)), graph.id_of(int(d)), known))
    rows.sort(key=lambda r: (-r[0], r[1], r[2]))
    if args.top_k is not None:
        rows = rows[: args.top_k]

    lines = ["rank\tgene_id\tdisease_id\tprobability\tknown_edge"]
    for rank, (prob, gid, did, known) in enumerate(rows, start=1):
        lines.append(f"{rank}\t{gid}\t{did}\t{prob:.10g}\t{int(known)}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return EXIT_OK


ABLATION_GRID = (
    ("ablation", "unconstrained"),
    ("ablation", "constrained"),
    ("default", "unconstrained"),
    ("default", "constrained"),  # the default configuration, last
)

ABLATION_HEADER = (
    "embedding_default",
    "negatives_constrained",
    "val_acc",
    "val_f1",
    "val_prec",
    "val_rec",
    "val_rocauc",
    "test_acc",
    "test_f1",
    "test_prec",
    "test_rec",
    "test_rocauc",
    "seed",
)


def run_pipeline(
    graph: gr.HeteroGraph,
    clusters: ds.ClusterMap,
    gene_raws: list,
    disease_raws: list,
    cfg: dict,
) -> tuple[mdl.ModelParams, trn.TrainLog, MetricReport, MetricReport]:
    """Shared split->features->train->evaluate path for train and ablate."""
    split = ds.build_edge_split(
        graph,
        clusters,
        ratios=(cfg["train_ratio"], cfg["val_ratio"], cfg["test_ratio"]),
        seed=cfg["seed"],
        mode=cfg["negative_mode"],
        degree_aware=cfg["degree_aware"],
        alpha=cfg["alpha"],
        degree_source=cfg["degree_source"],
    )
    fm = feat.align_features(
        graph,
        gene_raws + disease_raws,
        mode=cfg["align_mode"],
        missing_policy=cfg["missing"],
        gene_dim=cfg["gene_dim"],
        disease_dim=cfg["disease_dim"],
    )
    op = trn.build_context_operator(graph, split, _mixing_weights(cfg))
    params, log = trn.train(graph, op, fm.matrix, split, _train_config(cfg))
    val_report = trn.evaluate_pairs(params, op, fm.matrix, ds.pairs_to_array(split.val))
    test_report = trn.evaluate_pairs(params, op, fm.matrix, ds.pairs_to_array(split.test))
    return params, log, val_report, test_report


def cmd_ablate(args: argparse.Namespace) -> int:
    base_cfg = _resolve(args)
    graph = gr.load_graph(args.graph)
    clusters = ds.ClusterMap.from_tsv(args.clusters)
    gene_raws = feat.load_embeddings(
        args.gene_embeddings, feat.NodeKind.GENE, expected=base_cfg["gene_dim"]
    )
    disease_raws = feat.load_embeddings(
        args.disease_embeddings, feat.NodeKind.DISEASE, expected=base_cfg["disease_dim"]
    )

    lines = ["\t".join(ABLATION_HEADER)]
    for align_mode, negative_mode in ABLATION_GRID:
        cfg = dict(base_cfg)
        cfg["align_mode"] = align_mode
        cfg["negative_mode"] = negative_mode
        _, _, val_report, test_report = run_pipeline(
            graph, clusters, gene_raws, disease_raws, cfg
        )
        fields = [
            "Y" if align_mode == "default" else "N",
            "Y" if negative_mode == "constrained" else "N",
        ]
        for rep in (val_report, test_report):
            fields += [
                format(v, ".10g")
                for v in (rep.acc, rep.f1, rep.precision, rep.recall, rep.roc_auc)
            ]
        fields.append(str(cfg["seed"]))
        lines.append("\t".join(fields))
    text = "\n".join(lines) + "\n"
    print(text, end="")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablation.tsv").write_text(text, encoding="utf-8")
    cfgmod.write_run_descriptor(
        out_dir / "run.txt", {**base_cfg, "config_sha256": cfgmod.config_hash(base_cfg)}
    )
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdlink",
        description="Gene-disease link prediction on a heterogeneous graph.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic planted-structure dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n-genes", type=int, default=200)
    p.add_argument("--n-diseases", type=int, default=200)
    p.add_argument("--n-gd", type=int, default=2000)
    p.add_argument("--n-gg", type=int, default=1000)
    p.add_argument("--n-dd", type=int, default=1000)
    p.add_argument("--communities", type=int, default=8)
    p.add_argument("--within-prob", type=float, default=0.95)
    p.add_argument("--cluster-size", type=int, default=2)
    p.add_argument("--gene-dim", type=int, default=feat.GENE_DIM)
    p.add_argument("--disease-dim", type=int, default=feat.DISEASE_DIM)
    p.add_argument("--signal", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build-graph", help="assemble and serialize the graph")
    p.add_argument("--gg", type=Path, required=True)
    p.add_argument("--dd", type=Path, required=True)
    p.add_argument("--gd", type=Path, required=True)
    p.add_argument("--gd-score-threshold", type=float, default=None)
    p.add_argument("--name", default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("split", help="cluster-respecting split plus negatives")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--clusters", type=Path, required=True)
    p.add_argument("--out", type=Path)
    p.add_argument("--audit-only", action="store_true")
    p.add_argument("--split-dir", type=Path, help="existing split to audit")
    _add_config_args(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train and checkpoint the best epoch")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--gene-embeddings", type=Path, required=True)
    p.add_argument("--disease-embeddings", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="metric row for a checkpoint on val or test")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--gene-embeddings", type=Path, required=True)
    p.add_argument("--disease-embeddings", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--which", choices=["val", "test"], required=True)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="rank candidate partners for a gene or disease")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--gene-embeddings", type=Path, required=True)
    p.add_argument("--disease-embeddings", type=Path, required=True)
    q = p.add_mutually_exclusive_group(required=True)
    q.add_argument("--disease", help="rank genes for this disease id")
    q.add_argument("--gene", help="rank diseases for this gene id")
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--exclude-known", action="store_true")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="2x2 alignment x negative-sampling comparison")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--clusters", type=Path, required=True)
    p.add_argument("--gene-embeddings", type=Path, required=True)
    p.add_argument("--disease-embeddings", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_args(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
