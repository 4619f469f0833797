"""Cluster-respecting edge splits and balanced negative sampling.

Gene-disease edges are the prediction targets.  Genes are grouped by
sequence-similarity cluster and every edge of a cluster lands in a single
split, so no near-duplicate gene can leak between train and evaluation.
Each split is balanced 1:1 with sampled non-edges.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientClusters, NegativeSpaceExhausted, UnknownEntity
from .graph import HeteroGraph, NodeKind, RelationKind
from .seeding import named_stream

logger = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "val", "test")

MODE_CONSTRAINED = "constrained"
MODE_UNCONSTRAINED = "unconstrained"

DEGREE_TOTAL = "total"
DEGREE_GD = "gd"


class ClusterMap:
    """Gene external id -> cluster id, with singleton fallback.

    Genes absent from the mapping get a private singleton cluster so they
    can never tie two splits together.
    """

    def __init__(self, mapping: dict[str, str] | None = None):
        self._map = dict(mapping or {})

    def of(self, gene_id: str) -> str:
        return self._map.get(gene_id, f"singleton:{gene_id}")

    def __len__(self) -> int:
        return len(self._map)

    @classmethod
    def from_tsv(cls, path: str | Path) -> "ClusterMap":
        mapping: dict[str, str] = {}
        with Path(path).open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 2:
                    raise ValueError(f"{path}:{lineno}: expected gene_id<TAB>cluster_id")
                mapping[fields[0]] = fields[1]
        return cls(mapping)

    def to_tsv(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for gene_id in sorted(self._map):
                fh.write(f"{gene_id}\t{self._map[gene_id]}\n")


@dataclass(frozen=True)
class LabeledPair:
    """One supervision instance.

    In constrained sampling ``gene``/``disease`` hold a gene and a disease
    node index.  The unconstrained ablation sampler reuses the same record
    for arbitrary endpoint kinds.
    """

    gene: int
    disease: int
    label: int


@dataclass
class EdgeSplit:
    train: list[LabeledPair]
    val: list[LabeledPair]
    test: list[LabeledPair]
    seed: int
    sampler_config: dict = field(default_factory=dict)

    def pairs(self, which: str) -> list[LabeledPair]:
        return getattr(self, which)

    def positives(self, which: str) -> list[LabeledPair]:
        return [p for p in self.pairs(which) if p.label == 1]

    def negatives(self, which: str) -> list[LabeledPair]:
        return [p for p in self.pairs(which) if p.label == 0]


def pairs_to_array(pairs: Sequence[LabeledPair]) -> np.ndarray:
    """(n, 3) int array of (endpoint, endpoint, label)."""
    if not pairs:
        return np.empty((0, 3), dtype=np.int64)
    return np.array([[p.gene, p.disease, p.label] for p in pairs], dtype=np.int64)


# -- positive split ----------------------------------------------------------


def split_edges(
    graph: HeteroGraph,
    clusters: ClusterMap,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[list[tuple[int, int]], list[tuple[int, int]], list[tuple[int, int]]]:
    """Partition the positive gene-disease edges by gene cluster.

    Clusters are shuffled with the seeded stream and assigned greedily to
    the bucket whose target deficit (ratio * total - current) is largest,
    so the realized ratios track the requested ones as closely as cluster
    granularity allows.  All edges of a cluster move together.
    """
    if abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise ValueError(f"ratios must be nonnegative and sum to 1, got {ratios}")

    by_cluster: dict[str, list[tuple[int, int]]] = {}
    for g, d in sorted(graph.gd_edge_set()):
        cid = clusters.of(graph.id_of(g))
        by_cluster.setdefault(cid, []).append((g, d))
    if len(by_cluster) < 3:
        raise InsufficientClusters(
            f"{len(by_cluster)} gene cluster(s) carry edges; need at least 3"
        )

    order = sorted(by_cluster)
    rng = named_stream(seed, "split")
    rng.shuffle(order)

    total = sum(len(v) for v in by_cluster.values())
    targets = [r * total for r in ratios]
    counts = [0, 0, 0]
    buckets: tuple[list, list, list] = ([], [], [])
    for cid in order:
        deficits = [targets[k] - counts[k] for k in range(3)]
        k = max(range(3), key=lambda idx: (deficits[idx], -idx))
        buckets[k].extend(by_cluster[cid])
        counts[k] += len(by_cluster[cid])
    return tuple(sorted(b) for b in buckets)  # type: ignore[return-value]


@dataclass
class LeakageReport:
    violations: list[tuple[str, tuple[str, ...]]]
    split_sizes: dict[str, int]
    fractions: dict[str, float]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_leakage(
    graph: HeteroGraph,
    split: EdgeSplit | tuple[list[tuple[int, int]], ...],
    clusters: ClusterMap,
) -> LeakageReport:
    """Audit a split: no gene cluster may contribute positives to two splits."""
    if isinstance(split, EdgeSplit):
        positive_lists = [
            [(p.gene, p.disease) for p in split.positives(name)] for name in SPLIT_NAMES
        ]
    else:
        positive_lists = [list(part) for part in split]

    placement: dict[str, set[str]] = {}
    sizes: dict[str, int] = {}
    for name, edges in zip(SPLIT_NAMES, positive_lists):
        sizes[name] = len(edges)
        for g, _ in edges:
            placement.setdefault(clusters.of(graph.id_of(g)), set()).add(name)

    violations = sorted(
        (cid, tuple(sorted(splits)))
        for cid, splits in placement.items()
        if len(splits) > 1
    )
    total = sum(sizes.values())
    fractions = {k: (sizes[k] / total if total else 0.0) for k in SPLIT_NAMES}
    return LeakageReport(violations=violations, split_sizes=sizes, fractions=fractions)


# -- negative sampling -------------------------------------------------------


def endpoint_weights(
    graph: HeteroGraph,
    kind: NodeKind | None,
    alpha: float,
    degree_source: str = DEGREE_TOTAL,
) -> tuple[np.ndarray, np.ndarray]:
    """Candidate endpoints and their draw probabilities (proportional to
    degree**alpha).  ``kind=None`` ranges over every node.  alpha = 0 is
    uniform, including isolated nodes."""
    if degree_source == DEGREE_TOTAL:
        deg = graph.degrees()
    elif degree_source == DEGREE_GD:
        deg = graph.degrees(RelationKind.GD)
    else:
        raise ValueError(f"unknown degree source {degree_source!r}")
    if kind is None:
        nodes = np.arange(graph.node_count, dtype=np.int64)
    else:
        nodes = graph.indices_of_kind(kind)
    raw = np.power(deg[nodes].astype(np.float64), alpha)
    total = raw.sum()
    if total <= 0:
        # All-zero weights (e.g. alpha > 0 on isolated candidates): uniform.
        probs = np.full(len(nodes), 1.0 / len(nodes))
    else:
        probs = raw / total
    return nodes, probs


def sample_negatives(
    graph: HeteroGraph,
    positives: Sequence[LabeledPair] | None = None,
    count: int | None = None,
    mode: str = MODE_CONSTRAINED,
    degree_aware: bool = True,
    alpha: float = 1.0,
    seed: int = 0,
    rng: np.random.Generator | None = None,
    exclude: Iterable[tuple[int, int]] = (),
    degree_source: str = DEGREE_TOTAL,
) -> list[LabeledPair]:
    """Draw label-0 pairs matching the positive count.

    Constrained mode pairs a uniformly drawn gene with a disease drawn with
    probability proportional to degree**alpha (uniform when degree_aware is
    off); candidates colliding with any known gene-disease edge, a prior
    draw, or ``exclude`` are rejected.  Unconstrained mode draws both
    endpoints from the whole node set and rejects collisions with *any*
    edge of the graph.
    """
    if count is None:
        if positives is None:
            raise ValueError("pass positives or count")
        count = len(positives)
    if count == 0:
        return []
    if mode not in (MODE_CONSTRAINED, MODE_UNCONSTRAINED):
        raise ValueError(f"unknown sampling mode {mode!r}")
    if rng is None:
        rng = named_stream(seed, "negatives")

    if mode == MODE_CONSTRAINED:
        first = graph.indices_of_kind(NodeKind.GENE)
        second, second_p = endpoint_weights(
            graph, NodeKind.DISEASE, alpha if degree_aware else 0.0, degree_source
        )
        known = set(graph.gd_edge_set())
        capacity = len(first) * len(second) - len(known)
    else:
        first = np.arange(graph.node_count, dtype=np.int64)
        second, second_p = endpoint_weights(
            graph, None, alpha if degree_aware else 0.0, degree_source
        )
        known = set()
        for rel in RelationKind:
            for i, j in graph.edges(rel):
                known.add((int(i), int(j)))
                known.add((int(j), int(i)))
        n = graph.node_count
        capacity = n * (n - 1) - len(known)
    if len(first) == 0 or len(second) == 0:
        raise NegativeSpaceExhausted("graph lacks candidate endpoints")

    taken: set[tuple[int, int]] = set()
    for a, b in exclude:
        taken.add((int(a), int(b)))
    if capacity - len(taken) < count:
        raise NegativeSpaceExhausted(
            f"only {max(capacity - len(taken), 0)} non-edges available, {count} requested"
        )

    out: list[LabeledPair] = []
    attempts = 0
    max_attempts = max(500, 50 * count)
    while len(out) < count and attempts < max_attempts:
        attempts += 1
        a = int(first[rng.integers(0, len(first))])
        b = int(second[rng.choice(len(second), p=second_p)])
        if a == b:
            continue
        pair = (a, b)
        if pair in known or pair in taken or (b, a) in taken:
            continue
        taken.add(pair)
        out.append(LabeledPair(a, b, 0))
    if len(out) < count:
        # Rejection sampling stalled (tight candidate space); enumerate the
        # remaining reachable pairs and draw without replacement with the
        # same per-pair weights, which matches the conditional rejection
        # distribution exactly.
        out.extend(
            _exhaustive_draw(first, second, second_p, known, taken, count - len(out), rng)
        )
    return out


def _exhaustive_draw(
    first: np.ndarray,
    second: np.ndarray,
    second_p: np.ndarray,
    known: set[tuple[int, int]],
    taken: set[tuple[int, int]],
    need: int,
    rng: np.random.Generator,
) -> list[LabeledPair]:
    cands: list[tuple[int, int]] = []
    weights: list[float] = []
    for b, p_b in zip(second.tolist(), second_p.tolist()):
        if p_b <= 0.0:
            continue
        for a in first.tolist():
            if a == b:
                continue
            pair = (a, b)
            if pair in known or pair in taken or (b, a) in taken:
                continue
            cands.append(pair)
            weights.append(p_b)
    if len(cands) < need:
        raise NegativeSpaceExhausted(
            f"only {len(cands)} reachable non-edges remain, {need} more requested"
        )
    w = np.array(weights, dtype=np.float64)
    out: list[LabeledPair] = []
    for _ in range(need):
        pick = int(rng.choice(len(cands), p=w / w.sum()))
        a, b = cands[pick]
        taken.add((a, b))
        out.append(LabeledPair(a, b, 0))
        w[pick] = 0.0
    return out


def build_edge_split(
    graph: HeteroGraph,
    clusters: ClusterMap,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    mode: str = MODE_CONSTRAINED,
    degree_aware: bool = True,
    alpha: float = 1.0,
    degree_source: str = DEGREE_TOTAL,
) -> EdgeSplit:
    """Split positives by cluster and attach one frozen negative per positive.

    Negatives are sampled per split from independent named streams with a
    shared exclusion set, so the three splits never share a negative pair.
    """
    parts = split_edges(graph, clusters, ratios=ratios, seed=seed)
    config = {
        "ratios": list(ratios),
        "mode": mode,
        "degree_aware": degree_aware,
        "alpha": alpha,
        "degree_source": degree_source,
    }
    split_lists: list[list[LabeledPair]] = []
    drawn: set[tuple[int, int]] = set()
    for name, edges in zip(SPLIT_NAMES, parts):
        pos = [LabeledPair(g, d, 1) for g, d in edges]
        neg = sample_negatives(
            graph,
            count=len(pos),
            mode=mode,
            degree_aware=degree_aware,
            alpha=alpha,
            rng=named_stream(seed, f"negatives/{name}"),
            exclude=drawn,
            degree_source=degree_source,
        )
        drawn.update((p.gene, p.disease) for p in neg)
        split_lists.append(pos + neg)
    return EdgeSplit(
        train=split_lists[0],
        val=split_lists[1],
        test=split_lists[2],
        seed=seed,
        sampler_config=config,
    )


def shuffle_labels(pairs: Sequence[LabeledPair], rng: np.random.Generator) -> list[LabeledPair]:
    """Permute labels across pairs (null-signal control)."""
    labels = np.array([p.label for p in pairs], dtype=np.int64)
    rng.shuffle(labels)
    return [LabeledPair(p.gene, p.disease, int(l)) for p, l in zip(pairs, labels)]


# -- manifests ----------------------------------------------------------------

SPLIT_META_NAME = "split.meta.json"


def write_split_manifests(
    directory: str | Path,
    graph: HeteroGraph,
    split: EdgeSplit,
    extra_meta: dict | None = None,
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in SPLIT_NAMES:
        with (directory / f"{name}.tsv").open("w", encoding="utf-8") as fh:
            fh.write("gene_id\tdisease_id\tlabel\n")
            for p in split.pairs(name):
                fh.write(f"{graph.id_of(p.gene)}\t{graph.id_of(p.disease)}\t{p.label}\n")
    meta = {
        "format": "gdlink-split/1",
        "seed": split.seed,
        "sampler": split.sampler_config,
        "counts": {name: len(split.pairs(name)) for name in SPLIT_NAMES},
    }
    meta.update(extra_meta or {})
    (directory / SPLIT_META_NAME).write_text(
        json.dumps(meta, sort_keys=True, indent=1), encoding="utf-8"
    )


def load_split_manifests(directory: str | Path, graph: HeteroGraph) -> EdgeSplit:
    directory = Path(directory)
    meta = json.loads((directory / SPLIT_META_NAME).read_text(encoding="utf-8"))
    lists: dict[str, list[LabeledPair]] = {}
    for name in SPLIT_NAMES:
        pairs: list[LabeledPair] = []
        with (directory / f"{name}.tsv").open("r", encoding="utf-8") as fh:
            header = fh.readline()
            if header.rstrip("\n").split("\t") != ["gene_id", "disease_id", "label"]:
                raise ValueError(f"{directory / (name + '.tsv')}: bad header")
            for lineno, line in enumerate(fh, start=2):
                line = line.rstrip("\n")
                if not line:
                    continue
                gid, did, label = line.split("\t")
                gi = graph.index_of(gid)
                di = graph.index_of(did)
                if gi is None:
                    raise UnknownEntity(gid)
                if di is None:
                    raise UnknownEntity(did)
                pairs.append(LabeledPair(gi, di, int(label)))
        lists[name] = pairs
    return EdgeSplit(
        train=lists["train"],
        val=lists["val"],
        test=lists["test"],
        seed=int(meta.get("seed", 0)),
        sampler_config=dict(meta.get("sampler", {})),
    )
