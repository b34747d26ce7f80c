"""Nested cross-validation, the training loop, and evaluation metrics.

Splitting follows a 5-outer-fold / single-inner-validation design: the
dataset is partitioned into stratified test folds; within each fold the
remainder is split once more into train and validation sets (70/10/20 of
the whole by default).  Model selection keeps the epoch checkpoint with the
highest validation accuracy (earliest epoch on ties); batch gradients are
the mean over the subjects in the batch.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import (ConfigurationError, ContractError, DataError,
                     DegenerateTestError, StratificationError,
                     UndefinedMetricError)
from .models import ClassifierConfig, cross_entropy
from .pipeline import GraphCorrSettings, SubjectFeatures, build_model, prepare_subject
from .rng import substream


@dataclass
class CVPlan:
    outer_folds: int = 5
    inner_folds: int = 1
    train_frac: float = 0.70
    val_frac: float = 0.10
    test_frac: float = 0.20

    def validate(self):
        if self.outer_folds < 2:
            raise ConfigurationError(f"outer_folds must be >= 2, got {self.outer_folds}")
        if self.inner_folds != 1:
            raise ConfigurationError(
                "only a single inner validation split is supported (inner_folds=1)")
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(f"split fractions must sum to 1, got {total}")
        if min(self.train_frac, self.val_frac, self.test_frac) <= 0:
            raise ConfigurationError("split fractions must all be positive")
        return self


@dataclass
class OptimizerSettings:
    learning_rate: float = 5e-3
    epochs: int = 30
    batch_size: int = 12
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8

    def validate(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("optimizer settings must be positive")
        return self


@dataclass
class FoldResult:
    fold: int
    accuracy: float
    roc_auc: float
    best_epoch: int
    predictions: list = field(default_factory=list)  # (id, label, pred, logit0, logit1)
    state: dict = field(default_factory=dict)


def _share(counts: dict, total_target: int) -> dict:
    """Apportion ``total_target`` items across classes by largest remainder."""
    total = sum(counts.values())
    exact = {c: counts[c] * total_target / total for c in counts}
    base = {c: int(np.floor(exact[c])) for c in counts}
    left = total_target - sum(base.values())
    order = sorted(counts, key=lambda c: (-(exact[c] - base[c]), c))
    for c in order[:left]:
        base[c] += 1
    return base


def make_folds(labels, plan: CVPlan, seed: int) -> list[tuple[list, list, list]]:
    """Stratified (train, val, test) index splits, one per outer fold."""
    plan.validate()
    labels = np.asarray(labels)
    n = labels.size
    if n < plan.outer_folds * 5:
        raise DataError(f"need at least {plan.outer_folds * 5} subjects for "
                        f"{plan.outer_folds}-fold cross-validation, got {n}")
    classes = sorted(set(int(v) for v in labels))
    if len(classes) < 2:
        raise StratificationError("dataset contains a single class")
    rng = substream(seed, "splits")
    by_class = {}
    for c in classes:
        idx = np.flatnonzero(labels == c)
        by_class[c] = idx[rng.permutation(idx.size)]

    # Stratified test partition: class c contributes floor/ceil(n_c / folds).
    test_folds = [[] for _ in range(plan.outer_folds)]
    for c in classes:
        idx = by_class[c]
        base, extra = divmod(idx.size, plan.outer_folds)
        pos = 0
        for f in range(plan.outer_folds):
            take = base + (1 if f < extra else 0)
            test_folds[f].extend(int(v) for v in idx[pos: pos + take])
            pos += take

    folds = []
    for f in range(plan.outer_folds):
        test = sorted(test_folds[f])
        rest = [int(v) for c in classes for v in by_class[c] if int(v) not in set(test)]
        rest_by_class = {c: [i for i in rest if labels[i] == c] for c in classes}
        val_target = int(round(n * plan.val_frac))
        val_counts = _share({c: len(v) for c, v in rest_by_class.items()}, val_target)
        val, train = [], []
        for c in classes:
            members = rest_by_class[c]
            order = rng.permutation(len(members))
            chosen = {members[k] for k in order[: val_counts[c]]}
            val.extend(sorted(chosen))
            train.extend(sorted(set(members) - chosen))
        val, train = sorted(val), sorted(train)
        for name, split in (("train", train), ("validation", val), ("test", test)):
            if not split:
                raise StratificationError(f"fold {f}: empty {name} split")
            present = {int(labels[i]) for i in split}
            if len(present) < 2:
                raise StratificationError(
                    f"fold {f}: {name} split contains a single class")
        folds.append((train, val, test))
    return folds


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def accuracy(predictions, labels) -> float:
    """Percent of exact matches."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.size == 0:
        raise ContractError("accuracy needs equal-length, nonempty inputs")
    return float(100.0 * np.mean(predictions == labels))


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    k = 0
    while k < values.size:
        m = k
        while m + 1 < values.size and sorted_vals[m + 1] == sorted_vals[k]:
            m += 1
        ranks[order[k: m + 1]] = 0.5 * (k + m) + 1.0
        k = m + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve, in percent; ties count one half.

    Equals the probability that a random positive outscores a random
    negative, computed through midranks (exactly the pairwise count).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ContractError("roc_auc needs equal-length scores and labels")
    pos = labels == 1
    neg = labels == 0
    n_pos, n_neg = int(pos.sum()), int(neg.sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC-AUC undefined: only one class present")
    ranks = _midranks(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(100.0 * u / (n_pos * n_neg))


def wilcoxon_signed_rank(a, b, alternative: str = "two-sided") -> float:
    """Exact signed-rank p-value by enumerating all sign assignments.

    Zero differences are dropped; ties among |differences| take midranks.
    The null distribution of W+ is built by dynamic programming over the
    doubled (integer) ranks, which is exactly the full 2^n enumeration.
    Supports up to 20 nonzero differences.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError("wilcoxon_signed_rank needs two equal-length vectors")
    if a.size < 5:
        raise ContractError(f"wilcoxon_signed_rank needs length >= 5, got {a.size}")
    if alternative not in ("two-sided", "greater", "less"):
        raise ConfigurationError(f"unknown alternative {alternative!r}")
    d = a - b
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        raise DegenerateTestError("all differences are zero")
    if n > 20:
        raise ContractError(f"exact enumeration supports at most 20 nonzero "
                            f"differences, got {n}")
    ranks = _midranks(np.abs(d))
    doubled = np.rint(2.0 * ranks).astype(np.int64)  # midranks are half-integers
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())

    # counts[s] = number of sign assignments with doubled W+ equal to s
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.size - r]
        counts = counts + shifted
    denom = 2.0 ** n

    def tail_ge(w: float) -> float:
        threshold = int(np.ceil(round(2.0 * w, 6)))
        return float(counts[threshold:].sum()) / denom

    def tail_le(w: float) -> float:
        threshold = int(np.floor(round(2.0 * w, 6)))
        return float(counts[: threshold + 1].sum()) / denom

    if alternative == "greater":
        return min(1.0, tail_ge(w_plus))
    if alternative == "less":
        return min(1.0, tail_le(w_plus))
    return min(1.0, 2.0 * tail_ge(max(w_plus, w_minus)))


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _evaluate(model, feats: list[SubjectFeatures]):
    """Eval-mode predictions: (ids, labels, preds, scores, logits)."""
    ids, labels, preds, scores, logits = [], [], [], [], []
    with ad.no_grad():
        for feat in feats:
            lg, pred = model.forward(feat, training=False)
            z = lg.values - lg.values.max()
            p = np.exp(z)
            p /= p.sum()
            ids.append(feat.subject_id)
            labels.append(feat.label)
            preds.append(pred)
            scores.append(float(p[1]))
            logits.append(lg.values.copy())
    return ids, np.array(labels), np.array(preds), np.array(scores), logits


def train_fold(model, feats: list[SubjectFeatures], train_idx, val_idx,
               opt: OptimizerSettings, seed: int, fold: int):
    """Adam training with best-validation-accuracy checkpointing.

    Returns (best_state, best_epoch, best_val_accuracy); the model is left
    with the best state loaded.
    """
    opt.validate()
    shuffle_rng = substream(seed, "shuffle", fold)
    dropout_rng = substream(seed, "dropout", fold, model.variant)
    best_state, best_acc, best_epoch = None, -1.0, -1
    train_idx = list(train_idx)
    for epoch in range(opt.epochs):
        order = shuffle_rng.permutation(len(train_idx))
        for start in range(0, len(train_idx), opt.batch_size):
            batch = [train_idx[k] for k in order[start: start + opt.batch_size]]
            model.store.zero_grad()
            for i in batch:
                logits, _ = model.forward(feats[i], training=True,
                                          dropout_rng=dropout_rng)
                loss = cross_entropy(logits, feats[i].label)
                ad.backward(loss, grad=1.0 / len(batch))
            model.store.adam_step(opt.learning_rate, opt.betas, opt.eps)
        _, val_labels, val_preds, _, _ = _evaluate(model, [feats[i] for i in val_idx])
        val_acc = accuracy(val_preds, val_labels)
        if val_acc > best_acc:
            best_acc, best_epoch = val_acc, epoch
            best_state = model.store.state_values()
    model.store.load_values(best_state)
    return best_state, best_epoch, best_acc


def run_cv(subjects, clf_cfg: ClassifierConfig, settings: GraphCorrSettings | None,
           plan: CVPlan, opt: OptimizerSettings, seed: int,
           features: list[SubjectFeatures] | None = None) -> list[FoldResult]:
    """Train and evaluate one variant across all outer folds.

    Two calls with the same subjects, plan, and seed (e.g. the vanilla and
    augmented variants) share identical splits, so per-fold metrics are
    paired by construction.  Pass precomputed ``features`` to reuse cached
    constants.
    """
    if features is None:
        features = [prepare_subject(ts, settings) for ts in subjects]
    labels = [f.label for f in features]
    folds = make_folds(labels, plan, seed)
    node_count = features[0].node_count
    results = []
    for fold, (train_idx, val_idx, test_idx) in enumerate(folds):
        model = build_model(settings, clf_cfg, node_count,
                            substream(seed, "init", fold))
        state, best_epoch, _ = train_fold(model, features, train_idx, val_idx,
                                          opt, seed, fold)
        ids, te_labels, te_preds, te_scores, te_logits = _evaluate(
            model, [features[i] for i in test_idx])
        rows = [(sid, int(lab), int(pred), float(lg[0]), float(lg[1]))
                for sid, lab, pred, lg in zip(ids, te_labels, te_preds, te_logits)]
        results.append(FoldResult(fold=fold,
                                  accuracy=accuracy(te_preds, te_labels),
                                  roc_auc=roc_auc(te_scores, te_labels),
                                  best_epoch=best_epoch,
                                  predictions=rows,
                                  state=state))
    return results


def summarize(results: list[FoldResult]) -> dict:
    acc = np.array([r.accuracy for r in results])
    roc = np.array([r.roc_auc for r in results])
    return {
        "accuracy_mean": float(acc.mean()),
        "accuracy_std": float(acc.std(ddof=1)) if acc.size > 1 else 0.0,
        "roc_auc_mean": float(roc.mean()),
        "roc_auc_std": float(roc.std(ddof=1)) if roc.size > 1 else 0.0,
    }


# ---------------------------------------------------------------------------
# result files
# ---------------------------------------------------------------------------

def write_results_csv(path, rows):
    """rows: iterable of (model, variant, fold, accuracy, roc_auc)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "variant", "fold", "accuracy", "roc_auc"])
        for model, variant, fold, acc, roc in rows:
            writer.writerow([model, variant, fold, repr(float(acc)), repr(float(roc))])


def write_predictions_csv(path, rows):
    """rows: iterable of (subject_id, label, pred, logit0, logit1)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "label", "pred", "logit0", "logit1"])
        for sid, label, pred, l0, l1 in rows:
            writer.writerow([sid, label, pred, repr(float(l0)), repr(float(l1))])


def write_summary_csv(path, entries):
    """entries: (model, variant, summary dict, p_two_sided, p_greater) tuples.

    The p-value columns hold the exact signed-rank comparison against the
    reference variant of the run (empty when there is no pairing).
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "variant", "accuracy_mean", "accuracy_std",
                         "roc_auc_mean", "roc_auc_std",
                         "wilcoxon_p_two_sided", "wilcoxon_p_greater"])
        for model, variant, s, p_two, p_gt in entries:
            writer.writerow([model, variant,
                             repr(s["accuracy_mean"]), repr(s["accuracy_std"]),
                             repr(s["roc_auc_mean"]), repr(s["roc_auc_std"]),
                             "" if p_two is None else repr(p_two),
                             "" if p_gt is None else repr(p_gt)])
