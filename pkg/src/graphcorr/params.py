"""Named parameter store, Adam updates, and text checkpoints."""

import numpy as np

from .autodiff import Tensor
from .errors import CompatibilityError, ContractError

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class ParameterStore:
    """Flat mapping from dotted names to parameter tensors.

    Parameters registered with ``trainable=False`` (e.g. a frozen zero-lag
    filter) are saved in checkpoints but skipped by the optimizer and never
    receive gradients.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._adam_m: dict[str, np.ndarray] = {}
        self._adam_v: dict[str, np.ndarray] = {}
        self._step = 0

    def add(self, name: str, values, trainable: bool = True) -> Tensor:
        if name in self._params:
            raise ContractError(f"parameter {name!r} registered twice")
        t = Tensor(np.array(values, dtype=np.float64), requires_grad=trainable)
        self._params[name] = t
        return t

    def glorot(self, name: str, shape, rng: np.random.Generator,
               trainable: bool = True) -> Tensor:
        """Uniform init in +-sqrt(6 / (fan_in + fan_out))."""
        fan_in, fan_out = shape[0], shape[-1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return self.add(name, rng.uniform(-limit, limit, size=shape), trainable)

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self):
        for name in self.names():
            yield name, self._params[name]

    def trainable(self):
        for name in self.names():
            t = self._params[name]
            if t.requires_grad:
                yield name, t

    def zero_grad(self):
        for _, t in self.items():
            t.grad = None

    def state_values(self) -> dict[str, np.ndarray]:
        return {name: t.values.copy() for name, t in self.items()}

    def load_values(self, values: dict[str, np.ndarray]):
        """Overwrite parameter arrays; names and shapes must match exactly."""
        mine = {name: t.values.shape for name, t in self.items()}
        theirs = {name: np.asarray(v).shape for name, v in values.items()}
        problems = []
        for name in sorted(set(mine) - set(theirs)):
            problems.append(f"missing {name} {mine[name]}")
        for name in sorted(set(theirs) - set(mine)):
            problems.append(f"unexpected {name} {theirs[name]}")
        for name in sorted(set(mine) & set(theirs)):
            if mine[name] != theirs[name]:
                problems.append(f"shape of {name}: {theirs[name]} != expected {mine[name]}")
        if problems:
            raise CompatibilityError("checkpoint does not match model: " + "; ".join(problems))
        for name, v in values.items():
            self._params[name].values = np.array(v, dtype=np.float64)

    def adam_step(self, lr: float, betas=ADAM_BETAS, eps: float = ADAM_EPS):
        """One Adam update over all trainable parameters.

        Every trainable parameter must carry a gradient; a missing gradient
        is a contract violation (the forward/backward pass was incomplete).
        """
        b1, b2 = betas
        self._step += 1
        t = self._step
        for name, p in self.trainable():
            if p.grad is None:
                raise ContractError(f"adam_step: parameter {name!r} has no gradient")
            g = p.grad
            m = self._adam_m.get(name)
            v = self._adam_v.get(name)
            if m is None:
                m = np.zeros_like(p.values)
                v = np.zeros_like(p.values)
            m = b1 * m + (1.0 - b1) * g
            v = b2 * v + (1.0 - b2) * g * g
            self._adam_m[name] = m
            self._adam_v[name] = v
            mhat = m / (1.0 - b1 ** t)
            vhat = v / (1.0 - b2 ** t)
            p.values = p.values - lr * mhat / (np.sqrt(vhat) + eps)


def save_checkpoint(state, path):
    """Write one whitespace-delimited record per parameter.

    Record layout: ``name rank dim1 .. dimN v1 v2 ...`` with float64 values
    printed to 17 significant digits (lossless round trip).  Records are
    sorted by name.  Accepts a ParameterStore or a name -> array mapping.
    """
    if isinstance(state, ParameterStore):
        state = state.state_values()
    lines = []
    for name in sorted(state):
        arr = np.asarray(state[name], dtype=np.float64)
        dims = " ".join(str(d) for d in arr.shape)
        vals = " ".join(f"{v:.17g}" for v in arr.reshape(-1))
        lines.append(f"{name} {arr.ndim} {dims} {vals}".rstrip())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read a checkpoint back into a name -> array mapping."""
    out: dict[str, np.ndarray] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                name = tokens[0]
                rank = int(tokens[1])
                dims = tuple(int(d) for d in tokens[2:2 + rank])
                values = np.array([float(v) for v in tokens[2 + rank:]], dtype=np.float64)
                expected = int(np.prod(dims)) if dims else 1
                if values.size != expected:
                    raise ValueError(f"{values.size} values for shape {dims}")
                out[name] = values.reshape(dims)
            except (ValueError, IndexError) as exc:
                raise CompatibilityError(f"{path}: bad checkpoint record on line {lineno}: {exc}") from exc
    return out
