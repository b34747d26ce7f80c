"""Graph message passing: fuse node embeddings with edge lag activations.

Each directed edge (i, j) carries the outer product of the source node's
embedding with the edge's lag activations,

    MES[(i,j), :, w] = flatten(EMB[j, :, w] (x) LAG[(i,j), w, :])   (D*k,)

and node i aggregates the window-averaged messages of its neighborhood.
The fused output concatenates the window-averaged embedding with the
aggregate:

    OUT[i] = [ mean_w EMB[i, :, w] , sum_{j in N(i)} mean_w MES[(i,j), :, w] ]

giving shape (R, D*(k+1)): embedding first, then the row-major D x k
message block.  Isolated nodes aggregate to zeros.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeMismatchError
from .signals import GraphTopology


def _gather_matrix(index: np.ndarray, node_count: int) -> np.ndarray:
    g = np.zeros((index.size, node_count), dtype=np.float64)
    g[np.arange(index.size), index] = 1.0
    return g


def messages(emb: Tensor, lag: Tensor, topo: GraphTopology) -> Tensor:
    """Per-edge outer products, shape (E_n, D*k, W)."""
    r, d, w = emb.shape
    if topo.node_count != r:
        raise ShapeMismatchError(
            f"messages: embeddings for {r} nodes vs topology of {topo.node_count}")
    if lag.shape[0] != topo.edge_count or lag.shape[1] != w:
        raise ShapeMismatchError(
            f"messages: lag activations {lag.shape} do not match "
            f"{topo.edge_count} edges and {w} windows")
    emb_w = ad.transpose(emb, (2, 0, 1))                      # (W, R, D)
    src_emb = ad.matmul(Tensor(_gather_matrix(topo.sources(), r)), emb_w)  # (W, E_n, D)
    lag_w = ad.transpose(lag, (1, 0, 2))                      # (W, E_n, k)
    mes = ad.row_outer(src_emb, lag_w)                        # (W, E_n, D*k)
    return ad.transpose(mes, (1, 2, 0))


def aggregate_and_fuse(mes: Tensor, emb: Tensor, topo: GraphTopology) -> Tensor:
    """Window-average, sum messages into targets, concat with mean embedding.

    Neighbor sums accumulate in lexicographic edge order (ascending source
    per target), matching an explicit per-neighbor loop bit for bit.
    """
    r, d, w = emb.shape
    if mes.shape[0] != topo.edge_count or mes.shape[2] != w:
        raise ShapeMismatchError(
            f"aggregate: messages {mes.shape} do not match {topo.edge_count} edges, "
            f"{w} windows")
    mes_mean = ad.mean(mes, axis=2)                           # (E_n, D*k)
    agg = ad.scatter_add_rows(mes_mean, topo.targets(), r)    # (R, D*k)
    emb_mean = ad.mean(emb, axis=2)                           # (R, D)
    return ad.concat([emb_mean, agg], axis=1)                 # (R, D*(k+1))
