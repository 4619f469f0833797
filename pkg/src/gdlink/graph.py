"""Heterogeneous gene-disease graph and its propagation operator.

The graph holds two node kinds (gene, disease) and three undirected,
unweighted relations (gene-gene, disease-disease, gene-disease).  Message
passing uses a single sparse operator obtained by symmetrically normalizing
each relation's adjacency with self-loops and convexly mixing the three
normalized matrices.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import (
    DuplicateNode,
    GraphNotFinalized,
    InvalidMixingWeights,
    MissingScoreColumn,
    SelfLoopRejected,
    ShapeError,
    TypeConstraintViolation,
)


class NodeKind(enum.Enum):
    GENE = "gene"
    DISEASE = "disease"


class RelationKind(enum.Enum):
    GG = "GG"
    DD = "DD"
    GD = "GD"


# Required (kind of lower endpoint role, kind of higher endpoint role).
RELATION_ENDPOINT_KINDS: dict[RelationKind, tuple[NodeKind, NodeKind]] = {
    RelationKind.GG: (NodeKind.GENE, NodeKind.GENE),
    RelationKind.DD: (NodeKind.DISEASE, NodeKind.DISEASE),
    RelationKind.GD: (NodeKind.GENE, NodeKind.DISEASE),
}

WEIGHT_SUM_TOL = 1e-9


class HeteroGraph:
    """Typed node set plus three typed undirected edge sets.

    Nodes get dense indices in insertion order.  Edges are stored as
    unordered pairs, de-duplicated, with self-edges rejected.  Once
    :meth:`finalize` is called the graph is immutable and safe to share.
    """

    def __init__(self) -> None:
        self._ids: list[str] = []
        self._kinds: list[NodeKind] = []
        self._index: dict[str, int] = {}
        self._edges: dict[RelationKind, set[tuple[int, int]]] = {
            rel: set() for rel in RelationKind
        }
        self._finalized = False

    # -- construction ----------------------------------------------------

    def add_node(self, external_id: str, kind: NodeKind) -> int:
        """Insert a node and return its dense index."""
        self._check_mutable()
        if external_id in self._index:
            raise DuplicateNode(external_id)
        idx = len(self._ids)
        self._ids.append(external_id)
        self._kinds.append(kind)
        self._index[external_id] = idx
        return idx

    def add_edge(self, rel: RelationKind, i: int, j: int) -> None:
        """Store the unordered pair (i, j) under relation ``rel``.

        Re-adding an existing pair is a silent no-op.
        """
        self._check_mutable()
        n = len(self._ids)
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"edge endpoint out of range: ({i}, {j}) with {n} nodes")
        if i == j:
            raise SelfLoopRejected(f"self edge on node {i} ({self._ids[i]!r})")
        want = RELATION_ENDPOINT_KINDS[rel]
        got = tuple(sorted((self._kinds[i], self._kinds[j]), key=lambda k: k.value))
        want_sorted = tuple(sorted(want, key=lambda k: k.value))
        if got != want_sorted:
            raise TypeConstraintViolation(
                f"{rel.value} edge requires kinds {tuple(k.value for k in want)}, "
                f"got ({self._kinds[i].value}, {self._kinds[j].value})"
            )
        # GD pairs are canonically (gene, disease); same-kind pairs (min, max).
        if rel is RelationKind.GD and self._kinds[i] is not NodeKind.GENE:
            i, j = j, i
        elif rel is not RelationKind.GD and i > j:
            i, j = j, i
        self._edges[rel].add((i, j))

    def finalize(self) -> "HeteroGraph":
        self._finalized = True
        return self

    def _check_mutable(self) -> None:
        if self._finalized:
            raise GraphNotFinalized("graph is finalized; no further mutation allowed")

    # -- queries -----------------------------------------------------------

    @property
    def finalized(self) -> bool:
        return self._finalized

    @property
    def node_count(self) -> int:
        return len(self._ids)

    def kind_of(self, i: int) -> NodeKind:
        return self._kinds[i]

    def id_of(self, i: int) -> str:
        return self._ids[i]

    def index_of(self, external_id: str) -> int | None:
        return self._index.get(external_id)

    def contains(self, external_id: str) -> bool:
        return external_id in self._index

    def indices_of_kind(self, kind: NodeKind) -> np.ndarray:
        return np.array(
            [i for i, k in enumerate(self._kinds) if k is kind], dtype=np.int64
        )

    def edges(self, rel: RelationKind) -> np.ndarray:
        """Return the relation's edges as a sorted (m, 2) index array."""
        pairs = sorted(self._edges[rel])
        if not pairs:
            return np.empty((0, 2), dtype=np.int64)
        return np.array(pairs, dtype=np.int64)

    def edge_count(self, rel: RelationKind) -> int:
        return len(self._edges[rel])

    def has_edge(self, rel: RelationKind, i: int, j: int) -> bool:
        if rel is RelationKind.GD:
            return (i, j) in self._edges[rel] or (j, i) in self._edges[rel]
        a, b = (i, j) if i < j else (j, i)
        return (a, b) in self._edges[rel]

    def gd_edge_set(self) -> frozenset[tuple[int, int]]:
        """All gene-disease edges as (gene, disease) pairs."""
        return frozenset(self._edges[RelationKind.GD])

    def degrees(self, rel: RelationKind | None = None) -> np.ndarray:
        """Per-node degree for one relation, or the all-relation total."""
        deg = np.zeros(self.node_count, dtype=np.int64)
        rels = [rel] if rel is not None else list(RelationKind)
        for r in rels:
            for i, j in self._edges[r]:
                deg[i] += 1
                deg[j] += 1
        return deg


# -- normalization and mixing ----------------------------------------------


def normalized_adjacency(n: int, edges: np.ndarray) -> sp.csr_matrix:
    """D^{-1/2} (A + I) D^{-1/2} from an explicit unordered-pair edge array.

    A is the 0/1 adjacency over n nodes and D the degree matrix of A + I;
    an empty edge set yields the identity.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([edges[:, 0], edges[:, 1], np.arange(n)])
    cols = np.concatenate([edges[:, 1], edges[:, 0], np.arange(n)])
    data = np.ones(rows.shape[0], dtype=np.float64)
    a_hat = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    deg = np.asarray(a_hat.sum(axis=1)).ravel()
    d_inv_sqrt = 1.0 / np.sqrt(deg)
    out = a_hat.multiply(d_inv_sqrt[:, None]).multiply(d_inv_sqrt[None, :]).tocsr()
    out.sort_indices()
    return out


def normalize_relation(graph: HeteroGraph, rel: RelationKind) -> sp.csr_matrix:
    """Symmetrically normalized adjacency with self-loops for one relation."""
    if not graph.finalized:
        raise GraphNotFinalized("finalize the graph before normalization")
    return normalized_adjacency(graph.node_count, graph.edges(rel))


@dataclass(frozen=True)
class PropagationOperator:
    """Convex mixture of the per-relation normalized adjacencies.

    ``matrix`` is CSR with sorted column indices so that accumulation order
    is reproducible run to run.
    """

    matrix: sp.csr_matrix
    weights: dict[RelationKind, float]

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def mix_relations(
    mats: Mapping[RelationKind, sp.csr_matrix],
    weights: Mapping[RelationKind, float],
) -> PropagationOperator:
    """Combine per-relation matrices with nonnegative weights summing to 1."""
    w = {rel: float(weights[rel]) for rel in mats}
    if any(v < 0 for v in w.values()):
        raise InvalidMixingWeights(f"negative mixing weight in {w}")
    total = sum(w.values())
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        raise InvalidMixingWeights(f"mixing weights sum to {total!r}, expected 1")
    shapes = {m.shape for m in mats.values()}
    if len(shapes) != 1:
        raise ShapeError(f"relation matrices disagree in shape: {shapes}")

    acc: sp.csr_matrix | None = None
    # Zero-weight terms are skipped so a one-hot mixture reproduces the
    # selected matrix bit for bit.
    for rel in sorted(mats, key=lambda r: r.value):
        if w[rel] == 0.0:
            continue
        term = mats[rel].multiply(w[rel]).tocsr()
        acc = term if acc is None else (acc + term).tocsr()
    if acc is None:
        n = next(iter(mats.values())).shape[0]
        acc = sp.csr_matrix((n, n), dtype=np.float64)
    acc.sum_duplicates()
    acc.sort_indices()
    return PropagationOperator(matrix=acc, weights=w)


def build_propagation_operator(
    graph: HeteroGraph,
    weights: Mapping[RelationKind, float] | None = None,
) -> PropagationOperator:
    """Normalize every relation and mix them (uniform weights by default)."""
    if weights is None:
        weights = {rel: 1.0 / 3.0 for rel in RelationKind}
    mats = {rel: normalize_relation(graph, rel) for rel in RelationKind}
    return mix_relations(mats, weights)


# -- file ingestion ----------------------------------------------------------

GRAPH_FORMAT = "gdlink-graph/1"


def read_edge_tsv(
    path: str | Path, score_threshold: float | None = None
) -> list[tuple[str, str]]:
    """Read `src<TAB>dst[<TAB>score]` rows, filtering by score if requested."""
    path = Path(path)
    pairs: list[tuple[str, str]] = []
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        cols = header.split("\t")
        try:
            src_col = cols.index("src")
            dst_col = cols.index("dst")
        except ValueError:
            raise ValueError(f"{path}:1: header must name 'src' and 'dst' columns")
        score_col: int | None = cols.index("score") if "score" in cols else None
        if score_threshold is not None and score_col is None:
            raise MissingScoreColumn(
                f"{path}: threshold {score_threshold} given but no 'score' column"
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != len(cols):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(cols)} fields, got {len(fields)}"
                )
            if score_threshold is not None:
                try:
                    score = float(fields[score_col])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad score {fields[score_col]!r}")
                if score < score_threshold:
                    continue
            pairs.append((fields[src_col], fields[dst_col]))
    return pairs


def build_graph_from_edges(
    gg: Iterable[tuple[str, str]],
    dd: Iterable[tuple[str, str]],
    gd: Iterable[tuple[str, str]],
) -> HeteroGraph:
    """Assemble a graph from id pairs; kinds are implied by the relation.

    Gene-gene endpoints are genes, disease-disease endpoints diseases, and
    gene-disease pairs are (gene, disease).  An id used inconsistently
    raises :class:`TypeConstraintViolation`.  Nodes keep first-seen order.
    """
    graph = HeteroGraph()

    def intern(external_id: str, kind: NodeKind) -> int:
        idx = graph.index_of(external_id)
        if idx is None:
            return graph.add_node(external_id, kind)
        if graph.kind_of(idx) is not kind:
            raise TypeConstraintViolation(
                f"id {external_id!r} used both as {graph.kind_of(idx).value} and {kind.value}"
            )
        return idx

    for a, b in gg:
        graph.add_edge(RelationKind.GG, intern(a, NodeKind.GENE), intern(b, NodeKind.GENE))
    for a, b in dd:
        graph.add_edge(
            RelationKind.DD, intern(a, NodeKind.DISEASE), intern(b, NodeKind.DISEASE)
        )
    for a, b in gd:
        graph.add_edge(
            RelationKind.GD, intern(a, NodeKind.GENE), intern(b, NodeKind.DISEASE)
        )
    return graph.finalize()


def build_graph_from_files(
    gg_path: str | Path,
    dd_path: str | Path,
    gd_path: str | Path,
    gd_score_threshold: float | None = None,
) -> HeteroGraph:
    return build_graph_from_edges(
        read_edge_tsv(gg_path),
        read_edge_tsv(dd_path),
        read_edge_tsv(gd_path, score_threshold=gd_score_threshold),
    )


def graph_manifest(graph: HeteroGraph, name: str = "graph") -> dict[str, object]:
    """Node and edge counts, keyed in summary-table column order."""
    return {
        "graph": name,
        "genes": int(len(graph.indices_of_kind(NodeKind.GENE))),
        "diseases": int(len(graph.indices_of_kind(NodeKind.DISEASE))),
        "gga": graph.edge_count(RelationKind.GG),
        "dda": graph.edge_count(RelationKind.DD),
        "gda": graph.edge_count(RelationKind.GD),
    }


def manifest_tsv(manifest: dict[str, object]) -> str:
    keys = ["graph", "genes", "diseases", "gga", "dda", "gda"]
    head = "\t".join(keys)
    row = "\t".join(str(manifest[k]) for k in keys)
    return f"{head}\n{row}\n"


def save_graph(graph: HeteroGraph, path: str | Path) -> None:
    payload = {
        "format": GRAPH_FORMAT,
        "nodes": [[graph.id_of(i), graph.kind_of(i).value] for i in range(graph.node_count)],
        "edges": {
            rel.value: [[int(i), int(j)] for i, j in graph.edges(rel)]
            for rel in RelationKind
        },
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_graph(path: str | Path) -> HeteroGraph:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != GRAPH_FORMAT:
        raise ValueError(f"{path}: unsupported graph format {payload.get('format')!r}")
    graph = HeteroGraph()
    for external_id, kind in payload["nodes"]:
        graph.add_node(external_id, NodeKind(kind))
    for rel_name, pairs in payload["edges"].items():
        rel = RelationKind(rel_name)
        for i, j in pairs:
            graph.add_edge(rel, int(i), int(j))
    return graph.finalize()
