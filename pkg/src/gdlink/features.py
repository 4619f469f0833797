"""Node feature loading and alignment.

Gene vectors (1024-d by default) and disease vectors (768-d) live in
separate files; the aligned matrix places them in disjoint coordinate
blocks so both kinds share one feature space without mixing raw values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptEmbedding, DimensionMismatch, MissingEmbedding
from .graph import HeteroGraph, NodeKind

logger = logging.getLogger(__name__)

GENE_DIM = 1024
DISEASE_DIM = 768

ALIGN_DEFAULT = "default"
ALIGN_ABLATION = "ablation"


@dataclass(frozen=True)
class RawEmbedding:
    external_id: str
    kind: NodeKind
    values: np.ndarray


@dataclass(frozen=True)
class FeatureMatrix:
    """Per-node feature rows aligned to graph node indices."""

    matrix: np.ndarray
    mode: str
    gene_dim: int
    disease_dim: int
    missing_count: int = 0

    @property
    def width(self) -> int:
        return self.matrix.shape[1]


def expected_dim(kind: NodeKind, gene_dim: int = GENE_DIM, disease_dim: int = DISEASE_DIM) -> int:
    return gene_dim if kind is NodeKind.GENE else disease_dim


def load_embeddings(
    path: str | Path,
    kind: NodeKind,
    expected: int | None = None,
    whitespace_values: bool = False,
) -> list[RawEmbedding]:
    """Read `id<TAB>v1,v2,...` rows (or whitespace-separated values).

    Every vector must have the width expected for its kind and contain only
    finite numbers.
    """
    if expected is None:
        expected = expected_dim(kind)
    out: list[RawEmbedding] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            external_id, _, rest = line.partition("\t")
            tokens = rest.split() if whitespace_values else rest.split(",")
            try:
                values = np.array([float(t) for t in tokens], dtype=np.float64)
            except ValueError:
                raise CorruptEmbedding(external_id, "non-numeric token")
            if values.shape[0] != expected:
                raise DimensionMismatch(external_id, expected, values.shape[0])
            if not np.all(np.isfinite(values)):
                raise CorruptEmbedding(external_id)
            out.append(RawEmbedding(external_id, kind, values))
    return out


def write_embeddings(path: str | Path, raws: list[RawEmbedding]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for raw in raws:
            vals = ",".join(repr(float(v)) for v in raw.values)
            fh.write(f"{raw.external_id}\t{vals}\n")


def align_features(
    graph: HeteroGraph,
    raws: list[RawEmbedding],
    mode: str = ALIGN_DEFAULT,
    missing_policy: str = "error",
    gene_dim: int = GENE_DIM,
    disease_dim: int = DISEASE_DIM,
) -> FeatureMatrix:
    """Assemble the node-aligned feature matrix.

    default mode (width = gene_dim + disease_dim):
      gene rows    [gene vector | zeros(disease_dim)]
      disease rows [zeros(gene_dim) | disease vector]
    ablation mode (width = gene_dim, requires gene_dim >= disease_dim):
      gene rows    used as-is
      disease rows [disease vector | zeros(gene_dim - disease_dim)]

    Graph nodes without an embedding are an error, or zero rows (counted
    and logged) under ``missing_policy='zero_fill'``.  Embedding ids absent
    from the graph are skipped with a warning.
    """
    if mode not in (ALIGN_DEFAULT, ALIGN_ABLATION):
        raise ValueError(f"unknown alignment mode {mode!r}")
    if missing_policy not in ("error", "zero_fill"):
        raise ValueError(f"unknown missing policy {missing_policy!r}")
    if mode == ALIGN_ABLATION and gene_dim < disease_dim:
        raise ValueError("ablation alignment needs gene_dim >= disease_dim")

    width = gene_dim + disease_dim if mode == ALIGN_DEFAULT else gene_dim
    n = graph.node_count
    matrix = np.zeros((n, width), dtype=np.float64)
    seen = np.zeros(n, dtype=bool)

    for raw in raws:
        idx = graph.index_of(raw.external_id)
        if idx is None:
            logger.warning("embedding id %r not in graph; skipped", raw.external_id)
            continue
        want = expected_dim(raw.kind, gene_dim, disease_dim)
        if raw.values.shape[0] != want:
            raise DimensionMismatch(raw.external_id, want, raw.values.shape[0])
        if seen[idx]:
            logger.warning("duplicate embedding for %r; keeping the later row", raw.external_id)
        if raw.kind is NodeKind.GENE:
            matrix[idx, :gene_dim] = raw.values
            if mode == ALIGN_DEFAULT:
                matrix[idx, gene_dim:] = 0.0
        else:
            if mode == ALIGN_DEFAULT:
                matrix[idx, :gene_dim] = 0.0
                matrix[idx, gene_dim:] = raw.values
            else:
                matrix[idx, :disease_dim] = raw.values
                matrix[idx, disease_dim:] = 0.0
        seen[idx] = True

    missing = int(n - int(seen.sum()))
    if missing:
        if missing_policy == "error":
            first = int(np.flatnonzero(~seen)[0])
            raise MissingEmbedding(graph.id_of(first))
        logger.warning("%d of %d nodes lack embeddings; rows left at zero", missing, n)

    return FeatureMatrix(
        matrix=matrix,
        mode=mode,
        gene_dim=gene_dim,
        disease_dim=disease_dim,
        missing_count=missing,
    )


def synth_embeddings(
    graph: HeteroGraph,
    seed: int,
    planted: np.ndarray | None = None,
    gene_dim: int = GENE_DIM,
    disease_dim: int = DISEASE_DIM,
    signal: float = 0.8,
) -> list[RawEmbedding]:
    """Deterministic unit-norm random vectors, one per graph node.

    With ``planted`` (a per-node community id array), nodes of the same
    kind and community draw around a shared prototype so their pairwise
    cosine similarity concentrates near ``signal``.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    protos: dict[tuple[NodeKind, int], np.ndarray] = {}
    if planted is not None:
        if len(planted) != graph.node_count:
            raise ValueError("planted community array must cover every node")
        for kind in (NodeKind.GENE, NodeKind.DISEASE):
            dim = expected_dim(kind, gene_dim, disease_dim)
            for comm in sorted({int(c) for c in planted}):
                p = rng.standard_normal(dim)
                protos[(kind, comm)] = p / np.linalg.norm(p)

    out: list[RawEmbedding] = []
    for idx in range(graph.node_count):
        kind = graph.kind_of(idx)
        dim = expected_dim(kind, gene_dim, disease_dim)
        noise = rng.standard_normal(dim)
        noise /= np.linalg.norm(noise)
        if planted is not None:
            proto = protos[(kind, int(planted[idx]))]
            v = np.sqrt(signal) * proto + np.sqrt(1.0 - signal) * noise
        else:
            v = noise
        v = v / np.linalg.norm(v)
        out.append(RawEmbedding(graph.id_of(idx), kind, v))
    return out
