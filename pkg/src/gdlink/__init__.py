"""Gene-disease link prediction over a heterogeneous graph.

Pipeline stages: graph assembly, feature alignment, cluster-respecting
splits with balanced negatives, a two-layer graph-convolution encoder with
a dot-product decoder, AdamW training with best-validation checkpointing,
and ranking metrics.  See the README for the CLI walkthrough.
"""

from .dataset import (
    ClusterMap,
    EdgeSplit,
    LabeledPair,
    build_edge_split,
    check_leakage,
    sample_negatives,
    split_edges,
)
from .features import FeatureMatrix, RawEmbedding, align_features, load_embeddings, synth_embeddings
from .graph import (
    HeteroGraph,
    NodeKind,
    PropagationOperator,
    RelationKind,
    build_propagation_operator,
    mix_relations,
    normalize_relation,
)
from .metrics import MetricReport, full_report, pr_auc, roc_auc, threshold_metrics
from .model import (
    ModelParams,
    backward,
    decode_pairs,
    encode,
    init_params,
    load_checkpoint,
    save_checkpoint,
    score_pairs,
)
from .training import TrainConfig, TrainLog, adamw_step, induced_subgraph, loss, make_batches, train

__version__ = "0.1.0"

__all__ = [
    "ClusterMap",
    "EdgeSplit",
    "FeatureMatrix",
    "HeteroGraph",
    "LabeledPair",
    "MetricReport",
    "ModelParams",
    "NodeKind",
    "PropagationOperator",
    "RawEmbedding",
    "RelationKind",
    "TrainConfig",
    "TrainLog",
    "adamw_step",
    "align_features",
    "backward",
    "build_edge_split",
    "build_propagation_operator",
    "check_leakage",
    "decode_pairs",
    "encode",
    "full_report",
    "induced_subgraph",
    "init_params",
    "load_checkpoint",
    "load_embeddings",
    "loss",
    "make_batches",
    "mix_relations",
    "normalize_relation",
    "pr_auc",
    "roc_auc",
    "sample_negatives",
    "save_checkpoint",
    "score_pairs",
    "split_edges",
    "synth_embeddings",
    "threshold_metrics",
    "train",
]
