"""Gradient saliency maps, group scores, and the post-hoc logistic probe.

Saliency is the absolute gradient of the predicted-class logit (pre-softmax)
with respect to the model's connectivity input: the static FC matrix for the
vanilla variant (R x R), the windowed FC tensor for the augmented variant
(R x R x W).  Node scores sum the (window-averaged) saliency over the
interacting axis, diagonal included; window scores sum over both node axes,
and the window with the largest score is w*.

The logistic probe collects, per subject, the ``frames_per_subject`` frames
of window w* with the largest mean absolute signal across nodes, treats each
frame's R-vector as one sample labeled with the subject's class, and fits an
L2-regularized logistic regression by full-batch gradient descent.  A
positive weight means elevated signal at the selected frames is associated
with class 1.
"""

import csv
import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError, ContractError, DataError
from .pipeline import AugmentedModel, SubjectFeatures, VanillaModel

logger = logging.getLogger(__name__)


@dataclass
class SaliencyReport:
    subject_id: str
    variant: str                       # "vanilla" | "augmented"
    predicted_class: int
    saliency: np.ndarray               # (R, R) or (R, R, W)
    node_scores: np.ndarray            # (R,)
    _window_scores: np.ndarray | None = None

    @property
    def window_scores(self) -> np.ndarray:
        if self._window_scores is None:
            raise ContractError("window saliency is undefined for the vanilla variant")
        return self._window_scores

    @property
    def top_window(self) -> int:
        return int(np.argmax(self.window_scores))


def saliency(model, feat: SubjectFeatures) -> SaliencyReport:
    """Differentiate the predicted-class logit back to the connectivity input."""
    if isinstance(model, AugmentedModel):
        leaf = Tensor(feat.fc, requires_grad=True)
        logits, pred = model.forward(feat, training=False, fc_override=leaf)
    elif isinstance(model, VanillaModel):
        leaf = Tensor(feat.sfc, requires_grad=True)
        logits, pred = model.forward(feat, training=False, features_override=leaf)
    else:
        raise ContractError(f"unsupported model type {type(model).__name__}")
    y = ad.tensor_sum(ad.narrow(logits, 0, pred, 1))
    ad.backward(y)
    sal = np.abs(leaf.grad)
    if sal.ndim == 3:
        node_scores = sal.mean(axis=2).sum(axis=1)
        window_scores = sal.sum(axis=(0, 1))
    else:
        node_scores = sal.sum(axis=1)
        window_scores = None
    return SaliencyReport(subject_id=feat.subject_id,
                          variant=model.variant,
                          predicted_class=pred,
                          saliency=sal,
                          node_scores=node_scores,
                          _window_scores=window_scores)


# ---------------------------------------------------------------------------
# group scores
# ---------------------------------------------------------------------------

def load_group_map(path, node_count: int) -> list[tuple[int, str, str]]:
    """CSV rows node_index,group_name,hemisphere; must partition the nodes."""
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for lineno, row in enumerate(reader, start=1):
                if not row or row[0].strip().startswith("#"):
                    continue
                if lineno == 1 and row[0].strip().lower() == "node_index":
                    continue
                if len(row) != 3:
                    raise DataError(f"{path}: line {lineno}: expected 3 columns, got {len(row)}")
                try:
                    idx = int(row[0])
                except ValueError as exc:
                    raise DataError(f"{path}: line {lineno}: bad node index {row[0]!r}") from exc
                rows.append((idx, row[1].strip(), row[2].strip()))
    except OSError as exc:
        raise DataError(f"cannot read group map {path}: {exc}") from exc
    seen = [idx for idx, _, _ in rows]
    if sorted(seen) != list(range(node_count)):
        raise DataError(f"{path}: group map must list every node index 0..{node_count - 1} "
                        f"exactly once")
    return rows


def group_saliency(node_scores: np.ndarray, groups) -> dict[tuple[str, str], float]:
    """Mean node score per (group, hemisphere) cell.

    ``groups`` is a list of (node_index, group_name, hemisphere) triples;
    empty cells are skipped with a warning.
    """
    node_scores = np.asarray(node_scores, dtype=np.float64)
    cells: dict[tuple[str, str], list[float]] = {}
    for idx, name, hemi in groups:
        if not 0 <= idx < node_scores.size:
            raise DataError(f"group map node index {idx} out of range")
        cells.setdefault((name, hemi), []).append(float(node_scores[idx]))
    out = {}
    for key in sorted(cells):
        members = cells[key]
        if not members:
            logger.warning("group cell %s has no members; skipped", key)
            continue
        out[key] = float(np.mean(members))
    return out


# ---------------------------------------------------------------------------
# post-hoc logistic probe
# ---------------------------------------------------------------------------

@dataclass
class LogisticFit:
    weights: np.ndarray                # (R,)
    bias: float
    selected_frames: dict              # subject_id -> list of window-local frames
    sample_count: int


def select_frames(window_frames: np.ndarray, count: int) -> list[int]:
    """Indices of the ``count`` frames with the largest mean |signal| across
    nodes; ties resolve toward the earlier frame."""
    intensity = np.abs(window_frames).mean(axis=0)
    order = np.argsort(-intensity, kind="mergesort")
    return [int(v) for v in order[: min(count, intensity.size)]]


def fit_logistic(feats: list[SubjectFeatures], top_windows: list[int],
                 frames_per_subject: int = 5, l2: float = 1e-2,
                 steps: int = 500, learning_rate: float = 0.1) -> LogisticFit:
    """Fit the frame-level logistic probe.

    Objective: mean cross-entropy + (l2/2) * ||w||^2 (bias unregularized),
    minimized by ``steps`` full-batch gradient descent updates from zero
    initialization.
    """
    if not feats or len(feats) != len(top_windows):
        raise ContractError("fit_logistic needs one top window per subject")
    samples, targets = [], []
    selected: dict[str, list[int]] = {}
    for feat, w_star in zip(feats, top_windows):
        if feat.window_signals is None:
            raise ConfigurationError(
                f"subject {feat.subject_id!r} has no windowed signals")
        if not 0 <= w_star < feat.window_signals.shape[2]:
            raise ContractError(f"window index {w_star} out of range")
        frames = feat.window_signals[:, :, w_star]
        picks = select_frames(frames, frames_per_subject)
        selected[feat.subject_id] = picks
        for t in picks:
            samples.append(frames[:, t])
            targets.append(feat.label)
    x = np.array(samples, dtype=np.float64)
    y = np.array(targets, dtype=np.float64)
    if len(set(targets)) < 2:
        raise DataError("logistic probe needs samples from both classes")
    n, r = x.shape
    w = np.zeros(r)
    b = 0.0
    for _ in range(steps):
        z = x @ w + b
        p = 1.0 / (1.0 + np.exp(-z))
        err = p - y
        gw = x.T @ err / n + l2 * w
        gb = float(err.mean())
        w = w - learning_rate * gw
        b = b - learning_rate * gb
    return LogisticFit(weights=w, bias=float(b), selected_frames=selected,
                       sample_count=n)


# ---------------------------------------------------------------------------
# report output
# ---------------------------------------------------------------------------

def write_node_scores_csv(path, node_scores):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "score"])
        for i, v in enumerate(np.asarray(node_scores)):
            writer.writerow([i, repr(float(v))])


def write_window_scores_csv(path, window_scores, top_window: int):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window", "score", "is_top"])
        for k, v in enumerate(np.asarray(window_scores)):
            writer.writerow([k, repr(float(v)), int(k == top_window)])


def write_group_scores_csv(path, scores: dict):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "hemisphere", "mean_score"])
        for (name, hemi), v in sorted(scores.items()):
            writer.writerow([name, hemi, repr(float(v))])


def write_logistic_csv(path, fit: LogisticFit):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "weight"])
        for i, v in enumerate(fit.weights):
            writer.writerow([i, repr(float(v))])
        writer.writerow(["bias", repr(fit.bias)])


def bar_chart_svg(values, path, title: str = "", labels=None,
                  width: int = 800, height: int = 300):
    """Write a minimal deterministic SVG bar chart."""
    values = [float(v) for v in values]
    if not values:
        raise ContractError("bar_chart_svg needs at least one value")
    vmax = max(max(values), 0.0)
    vmin = min(min(values), 0.0)
    span = (vmax - vmin) or 1.0
    margin, label_h = 40, 20
    plot_w, plot_h = width - 2 * margin, height - 2 * margin - label_h
    bar_w = plot_w / len(values)
    zero_y = margin + plot_h * (vmax / span)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        parts.append(f'<text x="{width / 2:.1f}" y="{margin / 2:.1f}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="14">{title}</text>')
    for k, v in enumerate(values):
        h = abs(v) / span * plot_h
        x = margin + k * bar_w
        y = zero_y - h if v >= 0 else zero_y
        parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{max(bar_w - 2, 1):.2f}" '
                     f'height="{h:.2f}" fill="#4878a8"/>')
        if labels is not None:
            parts.append(f'<text x="{x + bar_w / 2:.2f}" y="{height - margin / 2:.2f}" '
                         f'text-anchor="middle" font-family="sans-serif" '
                         f'font-size="9">{labels[k]}</text>')
    parts.append(f'<line x1="{margin}" y1="{zero_y:.2f}" x2="{width - margin}" '
                 f'y2="{zero_y:.2f}" stroke="black" stroke-width="1"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
