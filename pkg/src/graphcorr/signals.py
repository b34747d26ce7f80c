"""Subject time series, correlation features, sliding windows, graph formation.

Conventions
-----------
A subject is an R x T float64 matrix: one row per node (region), one column
per frame.  Windowed quantities carry the window index as the trailing axis:
windowed signals are (R, T_w, W), windowed connectivity is (R, R, W).

Directed edges are stored lexicographically sorted (target, source) pairs;
an edge (i, j) carries information flowing from node j into node i.
"""

import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (ConfigurationError, ContractError, DataError,
                     DegenerateSignalError, InsufficientFramesError)


@dataclass
class TimeSeriesMatrix:
    """BOLD-like signals for one subject: values (R, T), id, binary label."""

    values: np.ndarray
    subject_id: str = ""
    label: int = 0
    roi_names: list[str] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError(f"subject {self.subject_id!r}: expected a 2-D matrix, "
                            f"got shape {self.values.shape}")
        if self.values.shape[1] < 2:
            raise DataError(f"subject {self.subject_id!r}: needs at least 2 frames, "
                            f"got {self.values.shape[1]}")
        if not np.isfinite(self.values).all():
            raise DataError(f"subject {self.subject_id!r}: non-finite values in time series")
        if self.roi_names is not None and len(self.roi_names) != self.values.shape[0]:
            raise DataError(f"subject {self.subject_id!r}: {len(self.roi_names)} roi names "
                            f"for {self.values.shape[0]} rows")

    @property
    def node_count(self) -> int:
        return self.values.shape[0]

    @property
    def frame_count(self) -> int:
        return self.values.shape[1]


def load_subject_csv(path, subject_id: str = "", label: int = 0) -> TimeSeriesMatrix:
    """Read one subject: one CSV row per node, optional '# roi_names: ...' header."""
    roi_names = None
    rows = []
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line.lstrip("#").strip()
                    if body.lower().startswith("roi_names:"):
                        roi_names = [n.strip() for n in body.split(":", 1)[1].split(",")]
                    continue
                try:
                    rows.append([float(v) for v in line.split(",")])
                except ValueError as exc:
                    raise DataError(f"{path}: line {lineno}: {exc}") from exc
    except OSError as exc:
        raise DataError(f"cannot read subject file {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no signal rows")
    lengths = {len(r) for r in rows}
    if len(lengths) != 1:
        raise DataError(f"{path}: ragged rows, lengths {sorted(lengths)}")
    return TimeSeriesMatrix(np.array(rows, dtype=np.float64), subject_id=subject_id,
                            label=label, roi_names=roi_names)


def load_manifest(path) -> list[dict]:
    """Parse a manifest: JSON array of {"id", "path", "label"} records.

    Relative subject paths are resolved against the manifest's directory.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    try:
        entries = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON at byte offset {exc.pos}: {exc.msg}") from exc
    if not isinstance(entries, list):
        raise DataError(f"{path}: manifest must be a JSON array")
    base = os.path.dirname(os.path.abspath(path))
    out = []
    seen = set()
    for k, entry in enumerate(entries):
        if not isinstance(entry, dict) or not {"id", "path", "label"} <= set(entry):
            raise DataError(f"{path}: entry {k} must be an object with id/path/label")
        label = entry["label"]
        if label not in (0, 1):
            raise DataError(f"{path}: entry {k}: label must be 0 or 1, got {label!r}")
        sid = str(entry["id"])
        if sid in seen:
            raise DataError(f"{path}: duplicate subject id {sid!r}")
        seen.add(sid)
        p = entry["path"]
        if not os.path.isabs(p):
            p = os.path.join(base, p)
        out.append({"id": sid, "path": p, "label": int(label)})
    return out


def load_dataset(manifest_path) -> list[TimeSeriesMatrix]:
    return [load_subject_csv(e["path"], subject_id=e["id"], label=e["label"])
            for e in load_manifest(manifest_path)]


# ---------------------------------------------------------------------------
# correlation features
# ---------------------------------------------------------------------------

def _center_and_norm(block: np.ndarray, what: str):
    """Center rows over the time axis and return (centered, norms)."""
    centered = block - block.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered ** 2).sum(axis=1))
    bad = np.argwhere(norms == 0.0)
    if bad.size:
        idx = " ".join(str(int(v)) for v in bad[0])
        raise DegenerateSignalError(f"zero variance in {what} at index {idx}")
    return centered, norms


def static_fc(ts: TimeSeriesMatrix) -> np.ndarray:
    """Pearson correlation matrix over the full scan.

    Exactly symmetric with a unit diagonal; raises DegenerateSignalError
    naming the row when any node has zero variance.
    """
    centered, norms = _center_and_norm(ts.values, f"subject {ts.subject_id!r} row")
    unit = centered / norms[:, None]
    c = unit @ unit.T
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return np.clip(c, -1.0, 1.0)


@dataclass
class WindowedFeatureSet:
    """Windowed signals F (R, T_w, W) and, once computed, windowed FC (R, R, W)."""

    signals: np.ndarray
    window_size: int
    stride: int
    subject_id: str = ""
    label: int = 0
    fc: np.ndarray | None = None

    @property
    def node_count(self) -> int:
        return self.signals.shape[0]

    @property
    def window_count(self) -> int:
        return self.signals.shape[2]


def window_signals(ts: TimeSeriesMatrix, window_size: int, stride: int) -> WindowedFeatureSet:
    """Slice the scan into W = floor((T - T_w) / s) windows of T_w frames.

    Window w covers frames [w*s, w*s + T_w); trailing frames that do not
    fill a window are dropped.  W <= 0 raises InsufficientFramesError.
    """
    if window_size < 2:
        raise ConfigurationError(f"window_size must be >= 2, got {window_size}")
    if stride < 1:
        raise ConfigurationError(f"stride must be >= 1, got {stride}")
    t = ts.frame_count
    w = (t - window_size) // stride
    if w <= 0:
        raise InsufficientFramesError(
            f"no complete windows: T={t}, window_size={window_size}, stride={stride}")
    frames = np.empty((ts.node_count, window_size, w), dtype=np.float64)
    for k in range(w):
        frames[:, :, k] = ts.values[:, k * stride: k * stride + window_size]
    return WindowedFeatureSet(frames, window_size, stride,
                              subject_id=ts.subject_id, label=ts.label)


def single_window(ts: TimeSeriesMatrix) -> WindowedFeatureSet:
    """One window spanning the whole scan (the windowing-off ablation path)."""
    frames = np.ascontiguousarray(ts.values[:, :, None])
    return WindowedFeatureSet(frames, ts.frame_count, ts.frame_count,
                              subject_id=ts.subject_id, label=ts.label)


def windowed_fc(fs: WindowedFeatureSet) -> np.ndarray:
    """Per-window Pearson matrices, stacked as (R, R, W).

    Stores the result on ``fs.fc`` as well.  A zero-variance windowed span
    raises DegenerateSignalError naming (row, window).
    """
    f = fs.signals
    centered = f - f.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered ** 2).sum(axis=1))  # (R, W)
    bad = np.argwhere(norms == 0.0)
    if bad.size:
        i, w = (int(v) for v in bad[0])
        raise DegenerateSignalError(
            f"zero variance for subject {fs.subject_id!r} node {i} in window {w}")
    unit = centered / norms[:, None, :]
    fc = np.einsum("itw,jtw->ijw", unit, unit, optimize=True)
    fc = 0.5 * (fc + fc.transpose(1, 0, 2))
    rng = np.arange(f.shape[0])
    fc[rng, rng, :] = 1.0
    fs.fc = np.clip(fc, -1.0, 1.0)
    return fs.fc


# ---------------------------------------------------------------------------
# graph formation
# ---------------------------------------------------------------------------

@dataclass
class GraphTopology:
    """Directed edge list (lexicographically sorted) plus neighbor lists.

    ``edges[k] == (i, j)`` denotes a message from source j to target i; the
    edge set is symmetric (both directions present) with no self loops.
    """

    node_count: int
    edges: list[tuple[int, int]]
    neighbors: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        self.validate()
        if not self.neighbors:
            nb: list[list[int]] = [[] for _ in range(self.node_count)]
            for i, j in self.edges:
                nb[i].append(j)
            self.neighbors = [sorted(v) for v in nb]

    def validate(self):
        pairs = set()
        for i, j in self.edges:
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ContractError(f"edge ({i}, {j}) out of range for {self.node_count} nodes")
            if i == j:
                raise ContractError(f"self loop ({i}, {j}) not allowed")
            pairs.add((i, j))
        for i, j in pairs:
            if (j, i) not in pairs:
                raise ContractError(f"edge ({i}, {j}) missing its reverse")
        if len(pairs) != len(self.edges):
            raise ContractError("duplicate edges in topology")
        if self.edges != sorted(self.edges):
            raise ContractError("edges must be sorted lexicographically")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def targets(self) -> np.ndarray:
        return np.array([i for i, _ in self.edges], dtype=np.intp).reshape(-1)

    def sources(self) -> np.ndarray:
        return np.array([j for _, j in self.edges], dtype=np.intp).reshape(-1)


def retained_pair_count(node_count: int, percent) -> int:
    """ceil(percent/100 * R(R-1)/2), evaluated in exact rational arithmetic.

    Exactness matters: 2% of 79800 pairs must be 1596, not the 1597 that a
    binary-float ceiling would produce.
    """
    total = node_count * (node_count - 1) // 2
    frac = Fraction(str(float(percent)))
    return int(math.ceil(frac * total / 100))


def form_graph(sfc: np.ndarray, percent, rank: str = "signed") -> GraphTopology:
    """Threshold a connectivity matrix into a symmetric directed graph.

    The top ceil(percent/100 * R(R-1)/2) unordered off-diagonal pairs by
    ``rank`` order ("signed": largest values first, "absolute": largest
    magnitudes first) are retained; ties break toward ascending (i, j).
    Each retained pair contributes both directed edges.
    """
    sfc = np.asarray(sfc, dtype=np.float64)
    if sfc.ndim != 2 or sfc.shape[0] != sfc.shape[1]:
        raise ContractError(f"form_graph expects a square matrix, got {sfc.shape}")
    if not np.allclose(sfc, sfc.T, atol=1e-12, rtol=0.0):
        raise ContractError("form_graph expects a symmetric matrix")
    if rank not in ("signed", "absolute"):
        raise ConfigurationError(f"edge_rank must be 'signed' or 'absolute', got {rank!r}")
    if not 0.0 < float(percent) <= 100.0:
        raise ConfigurationError(f"edge percent must be in (0, 100], got {percent}")
    r = sfc.shape[0]
    if r < 2:
        raise ContractError("form_graph needs at least 2 nodes")
    iu, ju = np.triu_indices(r, k=1)
    vals = sfc[iu, ju]
    if rank == "absolute":
        vals = np.abs(vals)
    # lexsort: last key is primary -> order by (-value, i, j)
    order = np.lexsort((ju, iu, -vals))
    keep = order[: retained_pair_count(r, percent)]
    edges = []
    for p in keep:
        i, j = int(iu[p]), int(ju[p])
        edges.append((i, j))
        edges.append((j, i))
    edges.sort()
    return GraphTopology(r, edges)
