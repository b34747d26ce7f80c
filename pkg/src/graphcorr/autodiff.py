"""Dense float64 tensors with reverse-mode automatic differentiation.

Forward calls build an implicit tape: every tensor produced by a primitive
remembers its parents and a closure that maps the output adjoint to parent
adjoints.  ``backward`` walks the recorded subgraph once, in reverse creation
order (a valid topological order, since parents are always created before
their children), and accumulates gradients into leaves that were built with
``requires_grad=True``.  Repeated backward calls on the same graph are
bitwise deterministic.

All primitives work on float64 numpy arrays and most of them accept leading
batch axes following numpy broadcasting rules for ``matmul``.
"""

import itertools

import numpy as np
from scipy.special import erf

from .errors import ConfigurationError, ContractError, ShapeMismatchError

_GRAD_ENABLED = True

_SQRT2 = float(np.sqrt(2.0))
_INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


class no_grad:
    """Context manager that disables tape recording (evaluation mode)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    """A float64 ndarray plus the bookkeeping needed for backprop."""

    __slots__ = ("values", "requires_grad", "grad", "_parents", "_backprop", "_id")
    _counter = itertools.count()

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backprop = None
        self._id = next(Tensor._counter)

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    def item(self) -> float:
        return float(self.values)

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other), -1.0))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return multiply(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return scale(self, 1.0 / float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _live(t: Tensor) -> bool:
    return t.requires_grad or t._backprop is not None


def _record(out: Tensor, parents, backprop):
    """Attach the backward closure when recording is on and any parent is live."""
    if _GRAD_ENABLED and any(_live(p) for p in parents):
        out._parents = tuple(parents)
        out._backprop = backprop
    return out


def backward(output: Tensor, grad=None):
    """Run reverse-mode accumulation from a scalar ``output``.

    ``grad`` optionally seeds the output adjoint (useful for averaging a
    batch: seed each subject's loss with 1/B and let leaf gradients add up).
    Leaf gradients accumulate into ``.grad``; call ``zero_grad`` between
    optimization steps.
    """
    if output.values.ndim != 0:
        raise ContractError(
            f"backward requires a scalar output, got shape {output.values.shape}")
    if output._backprop is None and not output.requires_grad:
        raise ContractError("backward called on a tensor with no recorded operations")

    # Reachable recorded subgraph; reverse creation order is topological.
    nodes = []
    seen = {id(output)}
    stack = [output]
    while stack:
        t = stack.pop()
        nodes.append(t)
        for p in t._parents:
            if id(p) not in seen and _live(p):
                seen.add(id(p))
                stack.append(p)
    nodes.sort(key=lambda t: -t._id)

    seed = np.ones((), dtype=np.float64) if grad is None else np.asarray(grad, dtype=np.float64)
    adjoint = {id(output): seed}
    for t in nodes:
        g = adjoint.pop(id(t), None)
        if g is None:
            continue
        if t.requires_grad:
            if t.grad is None:
                t.grad = np.zeros_like(t.values)
            t.grad += g
        if t._backprop is None:
            continue
        for parent, pg in t._backprop(g):
            if pg is None:
                continue
            prev = adjoint.get(id(parent))
            adjoint[id(parent)] = pg if prev is None else prev + pg


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, (gd, sd) in enumerate(zip(g.shape, shape)):
        if sd == 1 and gd != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeMismatchError(f"add: shapes {a.shape} and {b.shape} do not match")
    out = Tensor(a.values + b.values)

    def backprop(g):
        return ((a, _unbroadcast(g, a.shape) if _live(a) else None),
                (b, _unbroadcast(g, b.shape) if _live(b) else None))

    return _record(out, (a, b), backprop)


def multiply(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of same-shape tensors."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"multiply: shapes {a.shape} and {b.shape} do not match")
    out = Tensor(a.values * b.values)

    def backprop(g):
        return ((a, g * b.values if _live(a) else None),
                (b, g * a.values if _live(b) else None))

    return _record(out, (a, b), backprop)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = Tensor(a.values * c)

    def backprop(g):
        return ((a, g * c),)

    return _record(out, (a,), backprop)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy broadcasting over leading batch axes."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatchError(
            f"matmul requires 2-D or higher operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatchError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    out = Tensor(a.values @ b.values)

    def backprop(g):
        ga = gb = None
        if _live(a):
            ga = _unbroadcast(g @ np.swapaxes(b.values, -1, -2), a.shape)
        if _live(b):
            gb = _unbroadcast(np.swapaxes(a.values, -1, -2) @ g, b.shape)
        return ((a, ga), (b, gb))

    return _record(out, (a, b), backprop)


def transpose(a: Tensor, axes) -> Tensor:
    """Permute axes.  The result is materialized contiguously so later
    reductions see a predictable memory layout."""
    axes = tuple(axes)
    out = Tensor(np.ascontiguousarray(np.transpose(a.values, axes)))
    inverse = tuple(np.argsort(axes))

    def backprop(g):
        return ((a, np.ascontiguousarray(np.transpose(g, inverse))),)

    return _record(out, (a,), backprop)


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.values.reshape(shape))

    def backprop(g):
        return ((a, g.reshape(a.shape)),)

    return _record(out, (a,), backprop)


def concat(tensors, axis: int) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.values for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backprop(g):
        grads = []
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if _live(t):
                index = [slice(None)] * g.ndim
                index[axis] = slice(int(lo), int(hi))
                grads.append((t, np.ascontiguousarray(g[tuple(index)])))
            else:
                grads.append((t, None))
        return grads

    return _record(out, tuple(tensors), backprop)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Slice ``length`` entries along ``axis`` starting at ``start``."""
    if start < 0 or start + length > a.shape[axis]:
        raise ShapeMismatchError(
            f"narrow: span [{start}, {start + length}) exceeds axis {axis} of {a.shape}")
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    out = Tensor(np.ascontiguousarray(a.values[index]))

    def backprop(g):
        full = np.zeros_like(a.values)
        full[index] = g
        return ((a, full),)

    return _record(out, (a,), backprop)


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.values.sum(axis=axis, keepdims=keepdims))

    def backprop(g):
        if axis is None:
            return ((a, np.broadcast_to(g, a.shape).astype(np.float64)),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return ((a, np.broadcast_to(g, a.shape).astype(np.float64)),)

    return _record(out, (a,), backprop)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.values.mean(axis=axis, keepdims=keepdims))
    n = a.values.size if axis is None else a.shape[axis]

    def backprop(g):
        if axis is None:
            return ((a, np.broadcast_to(g / n, a.shape).astype(np.float64)),)
        gx = g if keepdims else np.expand_dims(g, axis)
        return ((a, np.broadcast_to(gx / n, a.shape).astype(np.float64)),)

    return _record(out, (a,), backprop)


def max_over(a: Tensor, axis: int) -> Tensor:
    """Maximum over one axis; the gradient routes to the first argmax."""
    out = Tensor(a.values.max(axis=axis))
    arg = a.values.argmax(axis=axis)

    def backprop(g):
        full = np.zeros_like(a.values)
        expanded = np.expand_dims(arg, axis)
        np.put_along_axis(full, expanded, np.expand_dims(g, axis), axis=axis)
        return ((a, full),)

    return _record(out, (a,), backprop)


def softmax(a: Tensor) -> Tensor:
    """Row softmax over the last axis (numerically stabilized)."""
    shifted = a.values - a.values.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(p)

    def backprop(g):
        inner = (g * p).sum(axis=-1, keepdims=True)
        return ((a, p * (g - inner)),)

    return _record(out, (a,), backprop)


def gelu(a: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x), with the erf form (no tanh approximation)."""
    x = a.values
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    out = Tensor(x * cdf)

    def backprop(g):
        pdf = np.exp(-0.5 * x * x) * _INV_SQRT_2PI
        return ((a, g * (cdf + x * pdf)),)

    return _record(out, (a,), backprop)


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.values, 0.0))

    def backprop(g):
        return ((a, g * (a.values > 0.0)),)

    return _record(out, (a,), backprop)


def layer_norm(a: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply a learnable gain and shift.

    ``gain`` and ``shift`` are per-feature vectors broadcast over all
    leading axes.
    """
    feat = a.shape[-1]
    if gain.shape != (feat,) or shift.shape != (feat,):
        raise ShapeMismatchError(
            f"layer_norm: gain {gain.shape} / shift {shift.shape} do not match features ({feat},)")
    x = a.values
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    out = Tensor(xhat * gain.values + shift.values)

    def backprop(g):
        ga = ggain = gshift = None
        lead = tuple(range(g.ndim - 1))
        if _live(gain):
            ggain = (g * xhat).sum(axis=lead)
        if _live(shift):
            gshift = g.sum(axis=lead)
        if _live(a):
            dxhat = g * gain.values
            ga = inv * (dxhat
                        - dxhat.mean(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        return ((a, ga), (gain, ggain), (shift, gshift))

    return _record(out, (a, gain, shift), backprop)


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None,
            training: bool) -> Tensor:
    """Inverted dropout.  Identity (the same tensor) when evaluating or rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return a
    if rng is None:
        raise ContractError("training-mode dropout needs a random stream")
    keep = (rng.random(a.shape) >= rate)
    factor = keep / (1.0 - rate)
    out = Tensor(a.values * factor)

    def backprop(g):
        return ((a, g * factor),)

    return _record(out, (a,), backprop)


def row_outer(a: Tensor, b: Tensor) -> Tensor:
    """Rowwise outer product, flattened.

    ``a`` has shape (..., N, D) and ``b`` shape (..., N, K); the result has
    shape (..., N, D*K) where entry [n, d*K + k] = a[n, d] * b[n, k].
    """
    if a.shape[:-1] != b.shape[:-1]:
        raise ShapeMismatchError(
            f"row_outer: leading shapes {a.shape} and {b.shape} do not match")
    d, k = a.shape[-1], b.shape[-1]
    prod = np.einsum("...i,...j->...ij", a.values, b.values)
    out = Tensor(prod.reshape(a.shape[:-1] + (d * k,)))

    def backprop(g):
        g3 = g.reshape(a.shape[:-1] + (d, k))
        ga = np.einsum("...ij,...j->...i", g3, b.values) if _live(a) else None
        gb = np.einsum("...ij,...i->...j", g3, a.values) if _live(b) else None
        return ((a, ga), (b, gb))

    return _record(out, (a, b), backprop)


def scatter_add_rows(values: Tensor, index, size: int) -> Tensor:
    """Sum rows of ``values`` into ``size`` output rows by target index.

    Accumulation follows the order of ``index`` (sequential, like an
    explicit loop), so results are reproducible and match a per-neighbor
    summation oracle bit for bit.
    """
    index = np.asarray(index, dtype=np.intp)
    if values.ndim != 2 or index.shape != (values.shape[0],):
        raise ShapeMismatchError(
            f"scatter_add_rows: values {values.shape} vs index {index.shape}")
    if index.size and (index.min() < 0 or index.max() >= size):
        raise ContractError("scatter_add_rows: target index out of range")
    acc = np.zeros((size, values.shape[1]), dtype=np.float64)
    np.add.at(acc, index, values.values)
    out = Tensor(acc)

    def backprop(g):
        return ((values, np.ascontiguousarray(g[index])),)

    return _record(out, (values,), backprop)


def cross_entropy_with_logits(logits: Tensor, label: int) -> Tensor:
    """Scalar cross-entropy of a 1-D logit vector against an integer label.

    The gradient with respect to the logits is softmax(logits) - onehot.
    """
    if logits.ndim != 1:
        raise ShapeMismatchError(f"cross_entropy expects a 1-D logit vector, got {logits.shape}")
    label = int(label)
    if not 0 <= label < logits.shape[0]:
        raise ContractError(f"label {label} outside [0, {logits.shape[0]})")
    z = logits.values - logits.values.max()
    lse = np.log(np.exp(z).sum())
    out = Tensor(np.asarray(lse - z[label]))

    def backprop(g):
        p = np.exp(z)
        p = p / p.sum()
        p[label] -= 1.0
        return ((logits, g * p),)

    return _record(out, (logits,), backprop)
