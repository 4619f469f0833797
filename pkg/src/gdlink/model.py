"""Two-layer graph-convolution encoder and dot-product pair decoder.

The encoder propagates features twice through the shared sparse operator:

    H1 = relu(A @ X  @ W0)        then inverted dropout while training
    Z  = relu(A @ H1 @ W1)        (final relu configurable)

A pair (i, j) is scored by the sum of the element-wise product of its two
embedding rows, mapped to a probability through the sigmoid.  The backward
pass replays the stored dropout masks and returns exact gradients for both
weight matrices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ShapeError, StaleTrace
from .graph import PropagationOperator

HIDDEN_DIM = 112
EMBED_DIM = 28

FINAL_RELU = "relu"
FINAL_NONE = "none"

CHECKPOINT_FORMAT = "gdlink-checkpoint/1"


@dataclass
class ModelParams:
    W0: np.ndarray
    W1: np.ndarray
    dropout_rate: float = 0.5
    final_activation: str = FINAL_RELU

    @property
    def in_dim(self) -> int:
        return self.W0.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W0.shape[1]

    @property
    def embed_dim(self) -> int:
        return self.W1.shape[1]

    def copy(self) -> "ModelParams":
        return ModelParams(
            W0=self.W0.copy(),
            W1=self.W1.copy(),
            dropout_rate=self.dropout_rate,
            final_activation=self.final_activation,
        )


def init_params(
    seed: int,
    in_dim: int,
    hidden_dim: int = HIDDEN_DIM,
    embed_dim: int = EMBED_DIM,
    dropout_rate: float = 0.5,
    final_activation: str = FINAL_RELU,
) -> ModelParams:
    """Glorot-uniform weights, bounded by sqrt(6 / (fan_in + fan_out))."""
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {dropout_rate}")
    if final_activation not in (FINAL_RELU, FINAL_NONE):
        raise ValueError(f"unknown final activation {final_activation!r}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    b0 = np.sqrt(6.0 / (in_dim + hidden_dim))
    b1 = np.sqrt(6.0 / (hidden_dim + embed_dim))
    return ModelParams(
        W0=rng.uniform(-b0, b0, size=(in_dim, hidden_dim)),
        W1=rng.uniform(-b1, b1, size=(hidden_dim, embed_dim)),
        dropout_rate=dropout_rate,
        final_activation=final_activation,
    )


@dataclass
class ForwardTrace:
    """Intermediates of one encoder pass, kept for the backward pass."""

    params: ModelParams
    op: PropagationOperator
    X: np.ndarray
    h1_pre: np.ndarray
    h1: np.ndarray  # post relu and dropout; input of layer 2
    z_pre: np.ndarray
    Z: np.ndarray  # post activation and dropout; decoded embedding matrix
    mask1: np.ndarray | None
    mask2: np.ndarray | None
    training: bool
    pairs: np.ndarray | None = None
    scores: np.ndarray | None = None
    probs: np.ndarray | None = None


def encode(
    params: ModelParams,
    op: PropagationOperator,
    X: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | int | None = None,
) -> ForwardTrace:
    """Run both layers; while training, apply inverted dropout after each."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.in_dim:
        raise ShapeError(
            f"feature width {X.shape[1] if X.ndim == 2 else X.shape} "
            f"does not match W0 input width {params.in_dim}"
        )
    if op.n != X.shape[0]:
        raise ShapeError(f"operator is {op.n}x{op.n} but features have {X.shape[0]} rows")

    p = params.dropout_rate
    use_dropout = training and p > 0.0
    if use_dropout:
        if isinstance(rng, (int, np.integer)):
            rng = np.random.default_rng(np.random.SeedSequence(int(rng)))
        if rng is None:
            raise ValueError("training with dropout needs an rng or seed")

    h1_pre = op.matrix @ (X @ params.W0)
    h1 = np.maximum(h1_pre, 0.0)
    mask1 = None
    if use_dropout:
        mask1 = (rng.random(h1.shape) >= p) / (1.0 - p)
        h1 = h1 * mask1

    z_pre = op.matrix @ (h1 @ params.W1)
    Z = np.maximum(z_pre, 0.0) if params.final_activation == FINAL_RELU else z_pre
    mask2 = None
    if use_dropout:
        mask2 = (rng.random(Z.shape) >= p) / (1.0 - p)
        Z = Z * mask2

    return ForwardTrace(
        params=params,
        op=op,
        X=X,
        h1_pre=h1_pre,
        h1=h1,
        z_pre=z_pre,
        Z=Z,
        mask1=mask1,
        mask2=mask2,
        training=training,
    )


def decode_pairs(Z: np.ndarray, pairs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Score pairs: s = sum_k Z[i,k] * Z[j,k], z = sigmoid(s).

    Symmetric in (i, j).  Out-of-range indices raise IndexError.
    """
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ShapeError(f"pairs must be (n, 2), got {pairs.shape}")
    if pairs.size and (pairs.min() < 0 or pairs.max() >= Z.shape[0]):
        raise IndexError(f"pair index out of range for {Z.shape[0]} embeddings")
    s = np.einsum("ij,ij->i", Z[pairs[:, 0]], Z[pairs[:, 1]])
    return s, sigmoid(s)


def sigmoid(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def score_pairs(trace: ForwardTrace, pairs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decode on a trace and retain the pair list for the backward pass."""
    s, z = decode_pairs(trace.Z, pairs)
    trace.pairs = np.asarray(pairs, dtype=np.int64)
    trace.scores = s
    trace.probs = z
    return s, z


@dataclass
class Gradients:
    W0: np.ndarray
    W1: np.ndarray

    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.W0)) and np.all(np.isfinite(self.W1)))


def backward(trace: ForwardTrace, grad_wrt_scores: np.ndarray) -> Gradients:
    """Exact gradients of L = sum_p grad_wrt_scores[p] * s_p w.r.t. W0, W1.

    Gradient flows to both endpoints of every pair; repeated pairs
    accumulate.  Dropout masks recorded in the trace are replayed.
    """
    if trace.pairs is None:
        raise StaleTrace("decode was not run on this trace")
    g = np.asarray(grad_wrt_scores, dtype=np.float64)
    if g.shape != (trace.pairs.shape[0],):
        raise ShapeError(f"expected {trace.pairs.shape[0]} upstream gradients, got {g.shape}")

    params = trace.params
    Z = trace.Z
    dZ = np.zeros_like(Z)
    gi = trace.pairs[:, 0]
    gj = trace.pairs[:, 1]
    np.add.at(dZ, gi, g[:, None] * Z[gj])
    np.add.at(dZ, gj, g[:, None] * Z[gi])

    if trace.mask2 is not None:
        dZ = dZ * trace.mask2
    if params.final_activation == FINAL_RELU:
        dZ = dZ * (trace.z_pre > 0.0)
    # The operator is symmetric, so A^T @ v == A @ v.
    d_p1 = trace.op.matrix @ dZ
    dW1 = trace.h1.T @ d_p1

    dh1 = d_p1 @ params.W1.T
    if trace.mask1 is not None:
        dh1 = dh1 * trace.mask1
    dh1 = dh1 * (trace.h1_pre > 0.0)
    d_p0 = trace.op.matrix @ dh1
    dW0 = trace.X.T @ d_p0
    return Gradients(W0=dW0, W1=dW1)


# -- checkpointing -------------------------------------------------------------


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    val_roc_auc: float,
    config: dict | None = None,
) -> None:
    """Write weights plus a JSON metadata record; round-trips bit-exactly."""
    meta = {
        "format": CHECKPOINT_FORMAT,
        "dropout_rate": params.dropout_rate,
        "final_activation": params.final_activation,
        "in_dim": params.in_dim,
        "hidden_dim": params.hidden_dim,
        "embed_dim": params.embed_dim,
        "val_roc_auc": val_roc_auc,
        "config": config or {},
    }
    np.savez(
        Path(path),
        W0=params.W0,
        W1=params.W1,
        meta=np.array(json.dumps(meta, sort_keys=True)),
    )


def load_checkpoint(path: str | Path) -> tuple[ModelParams, float, dict]:
    with np.load(Path(path), allow_pickle=False) as blob:
        meta = json.loads(str(blob["meta"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: unsupported checkpoint format {meta.get('format')!r}")
        params = ModelParams(
            W0=blob["W0"].astype(np.float64, copy=True),
            W1=blob["W1"].astype(np.float64, copy=True),
            dropout_rate=float(meta["dropout_rate"]),
            final_activation=str(meta["final_activation"]),
        )
    return params, float(meta["val_roc_auc"]), dict(meta.get("config", {}))
