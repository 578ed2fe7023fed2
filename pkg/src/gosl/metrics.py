"""Evaluation: ID accuracy plus ranking metrics for the OOD score.

OOD nodes are the positive class everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import MetricError
from .graph import Graph, NormalizedAdjacency, OpenSetSplit
from .models import ClassifierModel, predict_probs
from .nn import row_entropy


@dataclass(frozen=True)
class EvalResult:
    id_acc: float
    auroc: float
    aupr: float
    fpr_at_80: float
    n_id_test: int
    n_ood_test: int

    def as_dict(self) -> dict:
        return {
            "id_acc": self.id_acc,
            "auroc": self.auroc,
            "aupr": self.aupr,
            "fpr_at_80": self.fpr_at_80,
            "n_id_test": self.n_id_test,
            "n_ood_test": self.n_ood_test,
        }


def id_accuracy(predictions: np.ndarray, labels: np.ndarray, id_test_nodes) -> float:
    """Exact-match fraction over the ID test nodes only."""
    idx = np.asarray(list(id_test_nodes), dtype=int)
    if idx.size == 0:
        raise MetricError("no ID test nodes")
    return float((predictions[idx] == labels[idx]).mean())


def _check_two_class(is_ood: np.ndarray) -> None:
    if is_ood.all() or not is_ood.any():
        raise MetricError("metric undefined: test scores contain a single class")


def auroc(scores, is_ood) -> float:
    """P(random OOD node outscores a random ID node), ties counted half."""
    scores = np.asarray(scores, dtype=float)
    is_ood = np.asarray(is_ood, dtype=bool)
    _check_two_class(is_ood)
    ranks = rankdata(scores)  # average ranks handle ties
    n_pos = int(is_ood.sum())
    n_neg = is_ood.size - n_pos
    u = ranks[is_ood].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def aupr(scores, is_ood) -> float:
    """Average precision with thresholds at distinct score levels."""
    scores = np.asarray(scores, dtype=float)
    is_ood = np.asarray(is_ood, dtype=bool)
    if not is_ood.any():
        raise MetricError("metric undefined: no positive (OOD) examples")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = is_ood[order].astype(float)
    tp = np.cumsum(y)
    fp = np.cumsum(1.0 - y)
    # Keep only the last row of each tied-score block.
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp, fp = tp[last], fp[last]
    recall = tp / is_ood.sum()
    precision = tp / (tp + fp)
    prev_recall = np.r_[0.0, recall[:-1]]
    return float(((recall - prev_recall) * precision).sum())


def fpr_at_tpr(scores, is_ood, target: float = 0.8) -> float:
    """Minimum FPR over thresholds (at observed scores) reaching TPR >= target."""
    scores = np.asarray(scores, dtype=float)
    is_ood = np.asarray(is_ood, dtype=bool)
    _check_two_class(is_ood)
    best = 1.0
    n_pos = is_ood.sum()
    n_neg = (~is_ood).sum()
    for t in np.unique(scores):
        pred_pos = scores >= t
        tpr = (pred_pos & is_ood).sum() / n_pos
        if tpr >= target:
            best = min(best, (pred_pos & ~is_ood).sum() / n_neg)
    return float(best)


def evaluate(model: ClassifierModel, graph: Graph, a_hat: NormalizedAdjacency,
             split: OpenSetSplit) -> EvalResult:
    """All four metrics on the test set, using entropy as the OOD score."""
    probs = predict_probs(model, graph, a_hat)
    test = split.test_nodes
    is_ood = np.array([split.remap_label(int(graph.labels[n])) < 0 for n in test])
    _check_two_class(is_ood)
    id_test = test[~is_ood]
    remapped = np.array([split.remap_label(int(graph.labels[n])) for n in id_test])
    pred = probs[id_test].argmax(axis=1)
    acc = float((pred == remapped).mean())
    scores = row_entropy(probs[test])
    return EvalResult(
        id_acc=acc,
        auroc=auroc(scores, is_ood),
        aupr=aupr(scores, is_ood),
        fpr_at_80=fpr_at_tpr(scores, is_ood, 0.8),
        n_id_test=int((~is_ood).sum()),
        n_ood_test=int(is_ood.sum()),
    )
