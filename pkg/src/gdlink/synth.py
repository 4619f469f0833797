"""Synthetic planted-community datasets for end-to-end runs and tests.

Genes and diseases are assigned to communities; edges of every relation
are drawn mostly within a community and node features (see
``features.synth_embeddings``) correlate within a community, so a link
predictor has a real signal to find.  Gene clusters are small same-community
groups, which keeps the cluster-respecting split meaningful.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ClusterMap
from .features import RawEmbedding, synth_embeddings, write_embeddings
from .graph import HeteroGraph, NodeKind, RelationKind
from .seeding import named_stream


@dataclass
class SyntheticDataset:
    graph: HeteroGraph
    clusters: ClusterMap
    communities: np.ndarray  # per node index
    meta: dict


# Reference task for the acceptance suite and the quickstart script.  The
# seeds were calibrated once against the learnability and null-control bars
# and are frozen; see tests/test_acceptance.py.
REFERENCE_TASK = {
    "graph": dict(
        n_genes=200,
        n_diseases=200,
        n_gd=2000,
        n_gg=1000,
        n_dd=1000,
        n_communities=8,
        within_prob=0.95,
        cluster_size=2,
        seed=11,
    ),
    "embedding_seed": 12,
    "signal": 0.9,
    "split_seed": 13,
    "train_seed": 14,
    "dropout": 0.1,
    "epochs": 40,
    "null_epochs": 20,
    "label_shuffle_seed": 5,
}


def make_planted_dataset(
    n_genes: int = 200,
    n_diseases: int = 200,
    n_gd: int = 2000,
    n_gg: int = 1000,
    n_dd: int = 1000,
    n_communities: int = 8,
    within_prob: float = 0.95,
    cluster_size: int = 2,
    seed: int = 0,
) -> SyntheticDataset:
    rng = named_stream(seed, "synth-graph")
    graph = HeteroGraph()
    gene_ids = [f"G{i:05d}" for i in range(n_genes)]
    disease_ids = [f"D{i:05d}" for i in range(n_diseases)]
    for gid in gene_ids:
        graph.add_node(gid, NodeKind.GENE)
    for did in disease_ids:
        graph.add_node(did, NodeKind.DISEASE)

    communities = np.empty(graph.node_count, dtype=np.int64)
    communities[:n_genes] = rng.integers(0, n_communities, size=n_genes)
    communities[n_genes:] = rng.integers(0, n_communities, size=n_diseases)

    gene_idx = np.arange(n_genes)
    dis_idx = np.arange(n_genes, n_genes + n_diseases)
    genes_by_comm = {c: gene_idx[communities[:n_genes] == c] for c in range(n_communities)}
    dis_by_comm = {c: dis_idx[communities[n_genes:] == c] for c in range(n_communities)}

    def draw_pair(pool_a, pool_b, by_comm_a, by_comm_b):
        if rng.random() < within_prob:
            c = int(rng.integers(0, n_communities))
            ca, cb = by_comm_a[c], by_comm_b[c]
            if len(ca) and len(cb):
                return int(ca[rng.integers(0, len(ca))]), int(cb[rng.integers(0, len(cb))])
        return int(pool_a[rng.integers(0, len(pool_a))]), int(pool_b[rng.integers(0, len(pool_b))])

    def fill(rel: RelationKind, target: int, pool_a, pool_b, by_a, by_b):
        seen: set[tuple[int, int]] = set()
        attempts = 0
        cap = 200 * target + 1000
        while len(seen) < target and attempts < cap:
            attempts += 1
            a, b = draw_pair(pool_a, pool_b, by_a, by_b)
            if a == b:
                continue
            key = (min(a, b), max(a, b)) if rel is not RelationKind.GD else (a, b)
            if key in seen:
                continue
            graph.add_edge(rel, a, b)
            seen.add(key)
        if len(seen) < target:
            raise ValueError(f"could not place {target} {rel.value} edges")

    fill(RelationKind.GD, n_gd, gene_idx, dis_idx, genes_by_comm, dis_by_comm)
    fill(RelationKind.GG, n_gg, gene_idx, gene_idx, genes_by_comm, genes_by_comm)
    fill(RelationKind.DD, n_dd, dis_idx, dis_idx, dis_by_comm, dis_by_comm)
    graph.finalize()

    # Same-community genes are chunked into small clusters.
    mapping: dict[str, str] = {}
    counter = 0
    for c in range(n_communities):
        members = list(genes_by_comm[c])
        rng.shuffle(members)
        for start in range(0, len(members), cluster_size):
            for g in members[start : start + cluster_size]:
                mapping[gene_ids[g]] = f"C{counter:05d}"
            counter += 1
    clusters = ClusterMap(mapping)

    meta = {
        "n_genes": n_genes,
        "n_diseases": n_diseases,
        "n_gd": n_gd,
        "n_gg": n_gg,
        "n_dd": n_dd,
        "n_communities": n_communities,
        "within_prob": within_prob,
        "cluster_size": cluster_size,
        "seed": seed,
    }
    return SyntheticDataset(graph=graph, clusters=clusters, communities=communities, meta=meta)


def planted_embeddings(
    ds: SyntheticDataset,
    seed: int,
    gene_dim: int,
    disease_dim: int,
    signal: float = 0.8,
) -> list[RawEmbedding]:
    return synth_embeddings(
        ds.graph,
        seed=seed,
        planted=ds.communities,
        gene_dim=gene_dim,
        disease_dim=disease_dim,
        signal=signal,
    )


def write_synthetic_files(
    ds: SyntheticDataset,
    directory: str | Path,
    embedding_seed: int,
    gene_dim: int,
    disease_dim: int,
    signal: float = 0.8,
) -> dict[str, Path]:
    """Write edge lists, cluster map, and embedding files for the CLI."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    graph = ds.graph
    paths: dict[str, Path] = {}

    for rel, fname in ((RelationKind.GG, "gg.tsv"), (RelationKind.DD, "dd.tsv"), (RelationKind.GD, "gd.tsv")):
        path = directory / fname
        with path.open("w", encoding="utf-8") as fh:
            fh.write("src\tdst\n")
            for i, j in graph.edges(rel):
                fh.write(f"{graph.id_of(int(i))}\t{graph.id_of(int(j))}\n")
        paths[rel.value.lower()] = path

    cluster_path = directory / "clusters.tsv"
    ds.clusters.to_tsv(cluster_path)
    paths["clusters"] = cluster_path

    raws = planted_embeddings(ds, embedding_seed, gene_dim, disease_dim, signal)
    gene_raws = [r for r in raws if r.kind is NodeKind.GENE]
    disease_raws = [r for r in raws if r.kind is NodeKind.DISEASE]
    gene_path = directory / "gene_embeddings.tsv"
    disease_path = directory / "disease_embeddings.tsv"
    write_embeddings(gene_path, gene_raws)
    write_embeddings(disease_path, disease_raws)
    paths["gene_embeddings"] = gene_path
    paths["disease_embeddings"] = disease_path

    meta = dict(ds.meta)
    meta.update(
        {"embedding_seed": embedding_seed, "gene_dim": gene_dim, "disease_dim": disease_dim, "signal": signal}
    )
    meta_path = directory / "synth.meta.json"
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=1), encoding="utf-8")
    paths["meta"] = meta_path
    return paths
