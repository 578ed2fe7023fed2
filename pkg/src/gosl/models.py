"""The two trained models: the C+1 OOD filter and the C-class ID classifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, StateError
from .graph import Graph, LabelState, NormalizedAdjacency
from .nn import (
    GcnParams,
    OptimizerState,
    adam_step,
    ce_loss_and_grad,
    gcn_backward,
    gcn_forward,
    init_params,
    row_entropy,
    softmax_rows,
    weighted_ce_loss_and_grad,
)


@dataclass
class TrainConfig:
    """Shared GCN training hyperparameters."""

    hidden: int = 32
    epochs: int = 300
    lr: float = 0.01
    dropout: float = 0.5
    weight_decay: float = 5e-4


@dataclass
class FilterModel:
    """C+1-headed screening model; the last head predicts 'unknown'."""

    params: GcnParams
    n_id_classes: int
    w_unknown: float


@dataclass
class ClassifierModel:
    """C-class ID classifier whose entropy doubles as the OOD score."""

    params: GcnParams
    n_id_classes: int


@dataclass(frozen=True)
class PotentialIdSet:
    """Pool nodes the filter predicts to be in-distribution (sorted indices)."""

    indices: np.ndarray


def _eval_forward(a: sp.csr_matrix, prop_x, params: GcnParams):
    """Dropout-free forward using a precomputed Â·X; returns (hidden, probs)."""
    pre0 = prop_x @ params.w0
    if sp.issparse(pre0):
        pre0 = pre0.toarray()
    hidden = np.maximum(pre0, 0.0)
    logits = (a @ hidden) @ params.w1
    return hidden, softmax_rows(logits)


def _train(a_hat: NormalizedAdjacency, x, n_out: int, loss_fn, val_fn,
           cfg: TrainConfig, seed: int) -> GcnParams:
    """Full-graph training loop returning the best-validation parameters.

    ``loss_fn(cache) -> (loss, grad_logits)``; ``val_fn(probs) -> score`` or
    None to skip model selection (last-epoch parameters are returned then).
    """
    rng = np.random.default_rng(seed)
    n_features = x.shape[1]
    params = init_params(n_features, cfg.hidden, n_out, rng)
    opt = OptimizerState.for_params(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    prop_x = a_hat.matrix @ x  # fixed across epochs in eval mode
    best_score = -np.inf
    best_params = params.copy()
    for _ in range(cfg.epochs):
        cache = gcn_forward(a_hat, x, params, training=True, dropout_p=cfg.dropout, rng=rng)
        _, grad_logits = loss_fn(cache)
        grads = gcn_backward(a_hat, params, cache, grad_logits, weight_decay=cfg.weight_decay)
        adam_step(params, grads, opt)
        if val_fn is not None:
            _, probs = _eval_forward(a_hat.matrix, prop_x, params)
            score = val_fn(probs)
            if score > best_score:
                best_score = score
                best_params = params.copy()
    return best_params if val_fn is not None else params


def _val_accuracy(probs: np.ndarray, nodes: np.ndarray, targets: np.ndarray) -> float:
    pred = probs[nodes].argmax(axis=1)
    return float((pred == targets).mean())


def train_filter(graph: Graph, a_hat: NormalizedAdjacency, state: LabelState,
                 n_id_classes: int, *, w_unknown: float, cfg: TrainConfig, seed: int,
                 val_nodes: np.ndarray | None = None,
                 val_targets: np.ndarray | None = None) -> FilterModel:
    """Train the C+1 filter on labeled ID nodes plus annotated unknowns.

    ``val_targets`` are C+1-way targets (OOD validation nodes count as class
    C); when absent the last-epoch parameters are kept.
    """
    if not state.labeled:
        raise ConfigError("filter training needs at least one labeled node")
    if w_unknown <= 0:
        raise ConfigError(f"w_unknown must be positive, got {w_unknown}")
    labeled = dict(state.labeled)
    unknown = frozenset(state.unknown)

    def loss_fn(cache):
        return weighted_ce_loss_and_grad(cache, labeled, unknown, w_unknown)

    val_fn = None
    if val_nodes is not None and val_targets is not None:
        val_fn = lambda probs: _val_accuracy(probs, val_nodes, val_targets)
    params = _train(a_hat, graph.features, n_id_classes + 1, loss_fn, val_fn, cfg, seed)
    return FilterModel(params=params, n_id_classes=n_id_classes, w_unknown=w_unknown)


def train_filter_for_split(graph, a_hat, state, split, *, w_unknown, cfg, seed,
                           use_validation: bool = True) -> FilterModel:
    """train_filter with the split's C+1 validation targets wired in."""
    val_nodes = val_targets = None
    if use_validation:
        val_nodes = split.val_nodes
        val_targets = np.array([
            split.remap_label(int(graph.labels[n])) for n in split.val_nodes
        ])
        val_targets = np.where(val_targets < 0, split.n_id_classes, val_targets)
    return train_filter(graph, a_hat, state, split.n_id_classes, w_unknown=w_unknown,
                        cfg=cfg, seed=seed, val_nodes=val_nodes, val_targets=val_targets)


def potential_id_nodes(model: FilterModel, graph: Graph, a_hat: NormalizedAdjacency,
                       pool) -> PotentialIdSet:
    """Pool nodes whose filter argmax lands in the first C heads.

    Argmax ties break toward the lowest class index, so a uniform filter
    keeps everything.
    """
    pool = np.sort(np.fromiter((int(p) for p in pool), dtype=int))
    _, probs = _eval_forward(a_hat.matrix, a_hat.matrix @ graph.features, model.params)
    pred = probs[pool].argmax(axis=1)
    keep = pool[pred < model.n_id_classes]
    return PotentialIdSet(indices=keep)


def train_classifier(graph: Graph, a_hat: NormalizedAdjacency, labeled: dict[int, int],
                     n_id_classes: int, *, cfg: TrainConfig, seed: int,
                     val_nodes: np.ndarray | None = None,
                     val_targets: np.ndarray | None = None) -> ClassifierModel:
    """Train the C-class classifier on labeled ID nodes with plain CE."""
    if not labeled:
        raise ConfigError("classifier training needs at least one labeled node")
    labeled = {int(k): int(v) for k, v in labeled.items()}

    def loss_fn(cache):
        return ce_loss_and_grad(cache, labeled)

    val_fn = None
    if val_nodes is not None and val_targets is not None:
        val_fn = lambda probs: _val_accuracy(probs, val_nodes, val_targets)
    params = _train(a_hat, graph.features, n_id_classes, loss_fn, val_fn, cfg, seed)
    return ClassifierModel(params=params, n_id_classes=n_id_classes)


def train_classifier_for_split(graph, a_hat, labeled, split, *, cfg, seed,
                               use_validation: bool = True) -> ClassifierModel:
    """train_classifier selecting on ID accuracy over the ID validation nodes."""
    val_nodes = val_targets = None
    if use_validation:
        remapped = np.array([split.remap_label(int(graph.labels[n])) for n in split.val_nodes])
        id_mask = remapped >= 0
        val_nodes = split.val_nodes[id_mask]
        val_targets = remapped[id_mask]
    return train_classifier(graph, a_hat, labeled, split.n_id_classes, cfg=cfg, seed=seed,
                            val_nodes=val_nodes, val_targets=val_targets)


def hidden_features(model: ClassifierModel, graph: Graph, a_hat: NormalizedAdjacency) -> np.ndarray:
    """Eval-mode first-layer representation (the clustering features)."""
    hidden, _ = _eval_forward(a_hat.matrix, a_hat.matrix @ graph.features, model.params)
    return hidden


def predict_probs(model, graph: Graph, a_hat: NormalizedAdjacency) -> np.ndarray:
    """Eval-mode class probabilities for every node."""
    _, probs = _eval_forward(a_hat.matrix, a_hat.matrix @ graph.features, model.params)
    return probs


def ood_scores(model: ClassifierModel, graph: Graph, a_hat: NormalizedAdjacency) -> np.ndarray:
    """Per-node prediction entropy; higher means more likely OOD."""
    return row_entropy(predict_probs(model, graph, a_hat))


# --- checkpoint format: text, one shape header line then row-major values ---

def save_params(params: GcnParams, path) -> None:
    """Write weights as text: 'gcn-params 2' then per matrix 'rows cols' + values."""
    with open(path, "w") as f:
        f.write("gcn-params 2\n")
        for w in (params.w0, params.w1):
            f.write(f"{w.shape[0]} {w.shape[1]}\n")
            w.ravel().tofile(f, sep=" ")
            f.write("\n")


def load_params(path) -> GcnParams:
    with open(path) as f:
        header = f.readline().split()
        if header[:1] != ["gcn-params"]:
            raise StateError(f"{path} is not a gcn-params checkpoint")
        mats = []
        for _ in range(int(header[1])):
            rows, cols = (int(t) for t in f.readline().split())
            vals = np.array(f.readline().split(), dtype=np.float64)
            if vals.size != rows * cols:
                raise StateError("checkpoint value count does not match its shape header")
            mats.append(vals.reshape(rows, cols))
    return GcnParams(*mats)
