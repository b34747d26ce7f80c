"""Per-window transformer node embedder.

For each window the connectivity matrix FC_w (R x R) is projected into
queries, keys and values; each of H heads attends with width d = R / H, the
head outputs are concatenated back to R columns, and a layer-normalized
two-matrix MLP with an exact-GELU nonlinearity compresses rows to D < R
features.  One layer, no positional encoding, and no residual path unless
the ``residual`` flag is set.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError
from .params import ParameterStore


class EmbedderParams:
    """Registers and holds the embedder's learnable tensors.

    Projections are stored as single R x R matrices whose column blocks
    [h*d, (h+1)*d) belong to head h; this is equivalent to H separate R x d
    per-head matrices.
    """

    def __init__(self, store: ParameterStore, node_count: int, embed_dim: int,
                 head_count: int, rng: np.random.Generator, prefix: str = "embedder"):
        if embed_dim >= node_count:
            raise ConfigurationError(
                f"embed_dim must be smaller than the node count ({embed_dim} >= {node_count})")
        if embed_dim < 1 or head_count < 1:
            raise ConfigurationError("embed_dim and head_count must be positive")
        if node_count % head_count != 0:
            raise ConfigurationError(
                f"head_count {head_count} does not divide node count {node_count}")
        self.node_count = node_count
        self.embed_dim = embed_dim
        self.head_count = head_count
        self.head_dim = node_count // head_count
        r, d = node_count, embed_dim
        self.query = store.glorot(f"{prefix}.query", (r, r), rng)
        self.key = store.glorot(f"{prefix}.key", (r, r), rng)
        self.value = store.glorot(f"{prefix}.value", (r, r), rng)
        self.ln_gain = store.add(f"{prefix}.ln_gain", np.ones(r))
        self.ln_shift = store.add(f"{prefix}.ln_shift", np.zeros(r))
        self.mlp_in = store.glorot(f"{prefix}.mlp_in", (r, d), rng)
        self.mlp_out = store.glorot(f"{prefix}.mlp_out", (d, d), rng)


def attend_window(fc: Tensor, params: EmbedderParams) -> Tensor:
    """Multi-head self-attention over one window (or a batch of windows).

    ``fc`` has shape (..., R, R); the result has the same shape: per head h,
    softmax(Q_h K_h^T / sqrt(d)) V_h, heads concatenated along columns.
    """
    d = params.head_dim
    q = ad.matmul(fc, params.query)
    k = ad.matmul(fc, params.key)
    v = ad.matmul(fc, params.value)
    heads = []
    for h in range(params.head_count):
        qh = ad.narrow(q, -1, h * d, d)
        kh = ad.narrow(k, -1, h * d, d)
        vh = ad.narrow(v, -1, h * d, d)
        logits = ad.scale(ad.matmul(qh, ad.transpose(kh, _swap_last(fc.ndim))),
                          1.0 / np.sqrt(d))
        heads.append(ad.matmul(ad.softmax(logits), vh))
    return heads[0] if len(heads) == 1 else ad.concat(heads, axis=-1)


def _swap_last(ndim: int) -> tuple:
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


def embed_window(attended: Tensor, params: EmbedderParams) -> Tensor:
    """LN -> MLP: GELU(LN(A) @ M1) @ M2, rows compressed to D features."""
    normed = ad.layer_norm(attended, params.ln_gain, params.ln_shift, eps=1e-5)
    hidden = ad.gelu(ad.matmul(normed, params.mlp_in))
    return ad.matmul(hidden, params.mlp_out)


def embed_all(fc_stack: Tensor, params: EmbedderParams, residual: bool = False) -> Tensor:
    """Embed every window of an (R, R, W) connectivity tensor.

    Returns node embeddings with shape (R, D, W).  With ``residual`` the
    attended matrix gets a skip connection from FC_w before normalization.
    """
    per_window = ad.transpose(fc_stack, (2, 0, 1))  # (W, R, R)
    attended = attend_window(per_window, params)
    if residual:
        attended = ad.add(attended, per_window)
    emb = embed_window(attended, params)  # (W, R, D)
    return ad.transpose(emb, (1, 2, 0))
