"""Shared fixtures-by-hand: random graph builders and independent oracles.

The oracles here deliberately avoid the library's sparse code paths: they
build dense matrices straight from edge lists and evaluate the model with
plain loops/matmuls, so they can arbitrate the sparse implementations.
"""

from __future__ import annotations

import numpy as np

from gdlink.graph import HeteroGraph, NodeKind, RelationKind
from gdlink.model import ModelParams


def random_hetero_graph(
    rng: np.random.Generator,
    n_genes: int,
    n_diseases: int,
    edge_prob: float = 0.3,
) -> HeteroGraph:
    graph = HeteroGraph()
    for i in range(n_genes):
        graph.add_node(f"g{i}", NodeKind.GENE)
    for i in range(n_diseases):
        graph.add_node(f"d{i}", NodeKind.DISEASE)
    genes = list(range(n_genes))
    diseases = list(range(n_genes, n_genes + n_diseases))
    for a in genes:
        for b in genes:
            if a < b and rng.random() < edge_prob:
                graph.add_edge(RelationKind.GG, a, b)
    for a in diseases:
        for b in diseases:
            if a < b and rng.random() < edge_prob:
                graph.add_edge(RelationKind.DD, a, b)
    for a in genes:
        for b in diseases:
            if rng.random() < edge_prob:
                graph.add_edge(RelationKind.GD, a, b)
    return graph.finalize()


def dense_normalized(n: int, edges: np.ndarray) -> np.ndarray:
    """Brute-force D^{-1/2} (A + I) D^{-1/2} from an edge list."""
    a_hat = np.eye(n)
    for i, j in edges:
        a_hat[i, j] = 1.0
        a_hat[j, i] = 1.0
    deg = a_hat.sum(axis=1)
    d = 1.0 / np.sqrt(deg)
    return a_hat * d[:, None] * d[None, :]


def dense_operator(graph: HeteroGraph, weights: dict[RelationKind, float]) -> np.ndarray:
    n = graph.node_count
    out = np.zeros((n, n))
    for rel in RelationKind:
        out += weights[rel] * dense_normalized(n, graph.edges(rel))
    return out


def dense_encode(
    params: ModelParams, a_dense: np.ndarray, X: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Two dense layers, evaluation mode, written independently."""
    h1 = np.maximum(a_dense @ X @ params.W0, 0.0)
    z_pre = a_dense @ h1 @ params.W1
    if params.final_activation == "relu":
        return h1, np.maximum(z_pre, 0.0)
    return h1, z_pre


def brute_force_roc_auc(scores, labels) -> float:
    """O(P*N) pairwise comparison; ties count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = np.sum(pos[:, None] > neg[None, :])
    ties = np.sum(pos[:, None] == neg[None, :])
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def pr_auc_by_threshold_recomputation(scores, labels) -> float:
    """Rebuild the confusion matrix at every unique threshold and step-sum."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    thresholds = sorted(set(scores.tolist()), reverse=True)
    area = 0.0
    prev_recall = 0.0
    for t in thresholds:
        pred = scores >= t
        tp = int(np.sum(pred & (labels == 1)))
        fp = int(np.sum(pred & (labels == 0)))
        precision = tp / (tp + fp)
        recall = tp / n_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area
