"""Lag-filtered cross-correlation features along graph edges.

For every directed edge (i, j) and window w the normalized cross-correlation
profile over integer lags tau in [-m, m] is

    rho[(i,j), w, tau] = sum_t X~_i[t, w] * X~_j[t + tau, w] / (||X~_i|| ||X~_j||)

where X~ are the zero-padded windowed signals after subtracting each
window's unpadded mean from its unpadded span (the padding stays zero).
Out-of-range products contribute zero and the norms are taken over the
padded signals, so the denominator does not depend on the lag and tau = 0
reproduces the windowed Pearson correlation.  The profile is then mixed
through k learnable filters and an exact GELU:

    LAG[(i,j), w, :] = GELU(rho[(i,j), w, :] @ P)      P: (2m+1, k)

The correlation is computed by direct summation over the overlap (no FFT);
vectorization batches edges and windows but keeps the per-lag inner sums
bitwise identical to a naive triple loop.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError, ContractError, DegenerateSignalError
from .params import ParameterStore
from .signals import GraphTopology, WindowedFeatureSet


class LagFilterParams:
    """Learnable lag filters P with shape (2m+1, k)."""

    def __init__(self, store: ParameterStore, max_lag: int, filter_count: int,
                 rng: np.random.Generator, prefix: str = "lag"):
        if max_lag < 0:
            raise ConfigurationError(f"max_lag must be >= 0, got {max_lag}")
        if filter_count < 1:
            raise ConfigurationError(f"filter_count must be >= 1, got {filter_count}")
        self.max_lag = max_lag
        self.filter_count = filter_count
        self.filters = store.glorot(f"{prefix}.filters", (2 * max_lag + 1, filter_count), rng)

    @classmethod
    def zero_lag_only(cls, store: ParameterStore, max_lag: int,
                      prefix: str = "lag") -> "LagFilterParams":
        """Frozen single filter selecting tau = 0 (the lag-filter ablation)."""
        obj = cls.__new__(cls)
        obj.max_lag = max_lag
        obj.filter_count = 1
        one_hot = np.zeros((2 * max_lag + 1, 1))
        one_hot[max_lag, 0] = 1.0
        obj.filters = store.add(f"{prefix}.filters", one_hot, trainable=False)
        return obj


def pad_signals(fs: WindowedFeatureSet, max_lag: int) -> np.ndarray:
    """Zero-pad windowed signals to (R, T_w + 2m, W)."""
    if max_lag < 0:
        raise ConfigurationError(f"max_lag must be >= 0, got {max_lag}")
    r, t_w, w = fs.signals.shape
    padded = np.zeros((r, t_w + 2 * max_lag, w), dtype=np.float64)
    padded[:, max_lag: max_lag + t_w, :] = fs.signals
    return padded


def lag_xcorr(padded: np.ndarray, topo: GraphTopology, max_lag: int) -> np.ndarray:
    """Normalized lagged cross-correlation per edge: shape (E_n, W, 2m+1).

    Lag index m + tau holds the correlation at lag tau.  Raises
    DegenerateSignalError when a node incident to an edge has a zero-norm
    centered span in some window.
    """
    padded = np.asarray(padded, dtype=np.float64)
    if padded.ndim != 3:
        raise ContractError(f"padded signals must be (R, T_w + 2m, W), got {padded.shape}")
    r, length, w = padded.shape
    t_w = length - 2 * max_lag
    if t_w < 2:
        raise ContractError(f"padded length {length} too short for max_lag {max_lag}")
    if topo.node_count != r:
        raise ContractError(f"topology has {topo.node_count} nodes, signals have {r}")

    # All reductions run along the contiguous time axis of an (R, W, L)
    # layout; this keeps every sum bitwise equal to a per-pair loop over
    # materialized window rows (strided-axis reductions accumulate in a
    # different order).
    span = np.ascontiguousarray(padded.transpose(0, 2, 1))[:, :, max_lag: max_lag + t_w]
    by_window = np.zeros((r, w, length), dtype=np.float64)
    by_window[:, :, max_lag: max_lag + t_w] = span - span.mean(axis=-1, keepdims=True)
    norms = np.sqrt((by_window ** 2).sum(axis=-1))  # (R, W); pads are zero

    used = sorted({n for e in topo.edges for n in e})
    if used:
        bad = np.argwhere(norms[used] == 0.0)
        if bad.size:
            i, win = (int(v) for v in bad[0])
            raise DegenerateSignalError(
                f"zero-variance windowed span at node {used[i]}, window {win}")
    e_n = topo.edge_count
    rho = np.zeros((e_n, w, 2 * max_lag + 1), dtype=np.float64)
    if e_n == 0:
        return rho
    tgt = topo.targets()
    src = topo.sources()
    xi = by_window[tgt]  # (E_n, W, L)
    xj = by_window[src]
    for tau in range(-max_lag, max_lag + 1):
        if tau >= 0:
            prod = xi[:, :, : length - tau] * xj[:, :, tau:]
        else:
            prod = xi[:, :, -tau:] * xj[:, :, : length + tau]
        rho[:, :, max_lag + tau] = np.ascontiguousarray(prod).sum(axis=-1)
    rho /= (norms[tgt] * norms[src])[:, :, None]
    return rho


def lag_activations(rho: np.ndarray, params: LagFilterParams) -> Tensor:
    """Mix lag profiles through the filters: GELU(rho @ P), shape (E_n, W, k)."""
    rho = np.asarray(rho, dtype=np.float64)
    expected = 2 * params.max_lag + 1
    if rho.ndim != 3 or rho.shape[-1] != expected:
        raise ContractError(
            f"rho must be (E_n, W, {expected}), got {rho.shape}")
    return ad.gelu(ad.matmul(Tensor(rho), params.filters))
