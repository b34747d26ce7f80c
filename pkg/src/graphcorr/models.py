"""Lightweight graph classifiers (SAGE-lite and GCN-lite).

Both models run two graph-convolution layers with a ReLU between them and
dropout after each, pool node features globally, and map the pooled vector
through an affine head to class logits.

GCN layer:   H' = A_hat @ H @ W         A_hat = D~^{-1/2} (A + I) D~^{-1/2}
SAGE layer:  H' = [H , mean_{j in N(i)} H_j] @ W

Graph layers carry no bias; the head does.  Features may be rows of the
static connectivity matrix (vanilla variant) or the fused windowed features
(augmented variant) -- the classifier is agnostic, it only checks widths.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError
from .params import ParameterStore
from .signals import GraphTopology

MODEL_DEFAULTS = {
    # kind: (hidden_dim, learning_rate, epochs)
    "sage": (250, 3e-3, 20),
    "gcn": (100, 5e-3, 30),
}


@dataclass
class ClassifierConfig:
    kind: str = "gcn"
    hidden_dim: int = 100
    dropout: float = 0.5
    num_classes: int = 2
    pool: str = "mean"
    head_layers: int = 1

    def validate(self):
        if self.kind not in MODEL_DEFAULTS:
            raise ConfigurationError(f"model kind must be one of {sorted(MODEL_DEFAULTS)}, "
                                     f"got {self.kind!r}")
        if self.hidden_dim < 1:
            raise ConfigurationError(f"hidden_dim must be positive, got {self.hidden_dim}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.num_classes < 2:
            raise ConfigurationError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.pool not in ("mean", "max"):
            raise ConfigurationError(f"pool must be 'mean' or 'max', got {self.pool!r}")
        if self.head_layers < 1:
            raise ConfigurationError(f"head_layers must be >= 1, got {self.head_layers}")
        return self


class ClassifierParams:
    """Registers the two conv layers and the affine head."""

    def __init__(self, store: ParameterStore, cfg: ClassifierConfig, in_width: int,
                 rng: np.random.Generator, prefix: str = "classifier"):
        cfg.validate()
        self.cfg = cfg
        self.in_width = in_width
        mult = 2 if cfg.kind == "sage" else 1
        h = cfg.hidden_dim
        self.conv1 = store.glorot(f"{prefix}.conv1", (mult * in_width, h), rng)
        self.conv2 = store.glorot(f"{prefix}.conv2", (mult * h, h), rng)
        self.head = []
        width = h
        for layer in range(1, cfg.head_layers + 1):
            out = cfg.num_classes if layer == cfg.head_layers else h
            w = store.glorot(f"{prefix}.head{layer}_w", (width, out), rng)
            b = store.add(f"{prefix}.head{layer}_b", np.zeros(out))
            self.head.append((w, b))
            width = out


def gcn_norm_adjacency(topo: GraphTopology) -> np.ndarray:
    """Symmetric-normalized adjacency with self loops: D~^{-1/2}(A+I)D~^{-1/2}."""
    r = topo.node_count
    a = np.eye(r, dtype=np.float64)
    for i, j in topo.edges:
        a[i, j] = 1.0
    deg = a.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(deg)
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def neighbor_mean_matrix(topo: GraphTopology) -> np.ndarray:
    """Row-stochastic neighbor averaging; isolated nodes average to zero."""
    r = topo.node_count
    m = np.zeros((r, r), dtype=np.float64)
    for i, nb in enumerate(topo.neighbors):
        if nb:
            share = 1.0 / len(nb)
            for j in nb:
                m[i, j] = share
    return m


def classify(features: Tensor, topo: GraphTopology, cfg: ClassifierConfig,
             params: ClassifierParams, training: bool = False,
             dropout_rng: np.random.Generator | None = None,
             mix: np.ndarray | None = None):
    """Forward pass: node features (R, F) -> (logits (C,), predicted class).

    ``mix`` optionally supplies the precomputed propagation matrix (the
    normalized adjacency for GCN, the neighbor-mean matrix for SAGE) so
    per-subject constants can be cached by the caller.
    """
    if features.ndim != 2 or features.shape[0] != topo.node_count:
        raise ConfigurationError(
            f"features {features.shape} do not match {topo.node_count} graph nodes")
    if features.shape[1] != params.in_width:
        raise ConfigurationError(
            f"feature width {features.shape[1]} does not match the classifier's "
            f"expected width {params.in_width}")
    if mix is None:
        mix = gcn_norm_adjacency(topo) if cfg.kind == "gcn" else neighbor_mean_matrix(topo)
    mix_t = Tensor(mix)

    def conv(x: Tensor, weight: Tensor) -> Tensor:
        if cfg.kind == "gcn":
            return ad.matmul(ad.matmul(mix_t, x), weight)
        return ad.matmul(ad.concat([x, ad.matmul(mix_t, x)], axis=1), weight)

    h = ad.relu(conv(features, params.conv1))
    h = ad.dropout(h, cfg.dropout, dropout_rng, training)
    h = conv(h, params.conv2)
    h = ad.dropout(h, cfg.dropout, dropout_rng, training)
    pooled = ad.mean(h, axis=0) if cfg.pool == "mean" else ad.max_over(h, axis=0)
    z = ad.reshape(pooled, (1, -1))
    for k, (w, b) in enumerate(params.head):
        z = ad.matmul(z, w)
        z = ad.add(ad.reshape(z, (-1,)), b)
        if k + 1 < len(params.head):
            z = ad.reshape(ad.relu(z), (1, -1))
    logits = z
    pred = int(np.argmax(logits.values))
    return logits, pred


def cross_entropy(logits: Tensor, label: int) -> Tensor:
    """Multiclass cross-entropy of a logit vector against an integer label."""
    return ad.cross_entropy_with_logits(logits, label)
