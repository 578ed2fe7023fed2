"""Two-layer graph convolution with hand-derived gradients, losses, and Adam.

Everything here is a pure function over explicit arrays; sparse feature
matrices are supported throughout because the citation datasets are highly
sparse and the first-layer matmul dominates the cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, NumericError
from .graph import NormalizedAdjacency

LOG_FLOOR = 1e-12  # clamp for log(probs) on saturated softmax rows


@dataclass
class GcnParams:
    """Weights of a two-layer GCN: (F×h) then (h×K)."""

    w0: np.ndarray
    w1: np.ndarray

    @property
    def hidden_dim(self) -> int:
        return self.w0.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w1.shape[1]

    def copy(self) -> "GcnParams":
        return GcnParams(self.w0.copy(), self.w1.copy())


def glorot(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def init_params(n_features: int, hidden: int, n_out: int, rng: np.random.Generator) -> GcnParams:
    return GcnParams(glorot((n_features, hidden), rng), glorot((hidden, n_out), rng))


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, kept for the backward pass.

    ``hidden`` is the post-ReLU first-layer output (the representation later
    used for clustering); ``prop0``/``prop1`` are the propagated layer inputs
    Â·drop(X) and Â·drop(H) that the weight gradients contract against.
    """

    hidden: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    prop0: np.ndarray | sp.csr_matrix
    prop1: np.ndarray
    mask_x: np.ndarray | None
    mask_h: np.ndarray | None
    dropout_p: float


def _apply_dropout(x, mask, p):
    scale = 1.0 / (1.0 - p)
    if sp.issparse(x):
        out = x.copy()
        out.data = out.data * mask * scale
        return out
    return x * mask * scale


def _make_mask(x, p, rng):
    shape = x.data.shape if sp.issparse(x) else x.shape
    return (rng.random(shape) >= p).astype(np.float64)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def gcn_forward(a_hat: NormalizedAdjacency, x, params: GcnParams, *,
                training: bool = False, dropout_p: float = 0.5,
                rng: np.random.Generator | None = None,
                masks: tuple[np.ndarray, np.ndarray] | None = None) -> ForwardCache:
    """Run H = ReLU(Â·drop(X)·W0), logits = Â·drop(H)·W1, probs = softmax.

    Eval mode applies no dropout. Train mode uses inverted dropout (kept
    entries divided by 1-p); ``masks`` replays fixed masks instead of sampling.
    """
    if not 0.0 <= dropout_p < 1.0:
        raise ConfigError(f"dropout_p must be in [0,1), got {dropout_p}")
    a = a_hat.matrix
    use_dropout = training and dropout_p > 0.0
    mask_x = mask_h = None
    if use_dropout and masks is None:
        if rng is None:
            raise ConfigError("train-mode forward needs an rng (or explicit masks)")
        mask_x = _make_mask(x, dropout_p, rng)
    elif masks is not None:
        mask_x, mask_h = masks
        use_dropout = True

    xd = _apply_dropout(x, mask_x, dropout_p) if use_dropout else x
    prop0 = a @ xd
    pre0 = prop0 @ params.w0
    if sp.issparse(pre0):
        pre0 = pre0.toarray()
    hidden = np.maximum(pre0, 0.0)
    if not np.isfinite(hidden).all():
        raise NumericError("non-finite value in first layer")

    if use_dropout and mask_h is None:
        mask_h = _make_mask(hidden, dropout_p, rng)
    hd = _apply_dropout(hidden, mask_h, dropout_p) if use_dropout else hidden
    prop1 = a @ hd
    logits = prop1 @ params.w1
    if not np.isfinite(logits).all():
        raise NumericError("non-finite value in second layer")
    probs = softmax_rows(logits)
    return ForwardCache(hidden=hidden, logits=logits, probs=probs, prop0=prop0,
                        prop1=prop1, mask_x=mask_x, mask_h=mask_h,
                        dropout_p=dropout_p if use_dropout else 0.0)


def ce_loss_and_grad(cache: ForwardCache, labeled: dict[int, int]) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood over labeled rows and its logits gradient."""
    if not labeled:
        raise ConfigError("cross-entropy needs at least one labeled node")
    nodes = np.fromiter(labeled.keys(), dtype=int)
    classes = np.fromiter(labeled.values(), dtype=int)
    if classes.min() < 0 or classes.max() >= cache.probs.shape[1]:
        raise ConfigError("labeled class index out of range")
    p = cache.probs[nodes, classes]
    loss = float(-np.log(np.clip(p, LOG_FLOOR, None)).mean())
    grad = np.zeros_like(cache.probs)
    grad[nodes] = cache.probs[nodes]
    grad[nodes, classes] -= 1.0
    grad[nodes] /= len(nodes)
    return loss, grad


def weighted_ce_loss_and_grad(cache: ForwardCache, labeled: dict[int, int],
                              unknown, w_unknown: float) -> tuple[float, np.ndarray]:
    """C+1-way loss: plain CE on ID rows, w-weighted CE on unknown rows.

    The unknown class is the last output column; the total is the mean over
    all |labeled|+|unknown| rows with the unknown rows' terms (and gradients)
    scaled by ``w_unknown``.
    """
    if w_unknown <= 0:
        raise ConfigError(f"w_unknown must be positive, got {w_unknown}")
    unknown = sorted(int(u) for u in unknown)
    if set(unknown) & set(labeled):
        raise ConfigError("unknown nodes overlap labeled nodes")
    k = cache.probs.shape[1]
    n_total = len(labeled) + len(unknown)
    if n_total == 0:
        raise ConfigError("weighted cross-entropy needs at least one training row")

    grad = np.zeros_like(cache.probs)
    loss = 0.0
    if labeled:
        nodes = np.fromiter(labeled.keys(), dtype=int)
        classes = np.fromiter(labeled.values(), dtype=int)
        if classes.max() >= k - 1:
            raise ConfigError("labeled class index collides with the unknown head")
        loss += float(-np.log(np.clip(cache.probs[nodes, classes], LOG_FLOOR, None)).sum())
        grad[nodes] = cache.probs[nodes]
        grad[nodes, classes] -= 1.0
    if unknown:
        u = np.asarray(unknown, dtype=int)
        loss += float(-w_unknown * np.log(np.clip(cache.probs[u, k - 1], LOG_FLOOR, None)).sum())
        grad[u] = w_unknown * cache.probs[u]
        grad[u, k - 1] -= w_unknown
    loss /= n_total
    grad /= n_total
    return loss, grad


@dataclass
class GcnGrads:
    w0: np.ndarray
    w1: np.ndarray


def gcn_backward(a_hat: NormalizedAdjacency, params: GcnParams, cache: ForwardCache,
                 grad_logits: np.ndarray, weight_decay: float = 0.0) -> GcnGrads:
    """Exact gradients w.r.t. W0 and W1, replaying the cached ReLU/dropout masks.

    The decay term weight_decay·½‖W0‖² is differentiated here (on W0 only).
    """
    if grad_logits.shape != cache.logits.shape:
        raise ConfigError("grad_logits shape does not match cache")
    if params.w0.shape[1] != cache.hidden.shape[1]:
        raise ConfigError("params do not match cache")
    a = a_hat.matrix
    gw1 = cache.prop1.T @ grad_logits
    dhd = a @ (grad_logits @ params.w1.T)
    if cache.mask_h is not None:
        dhd = dhd * cache.mask_h / (1.0 - cache.dropout_p)
    dpre0 = dhd * (cache.hidden > 0)
    gw0 = cache.prop0.T @ dpre0
    if sp.issparse(gw0):
        gw0 = gw0.toarray()
    gw0 = np.asarray(gw0)
    if weight_decay:
        gw0 = gw0 + weight_decay * params.w0
    return GcnGrads(w0=gw0, w1=gw1)


@dataclass
class OptimizerState:
    """Adam moments for both weight matrices plus the step counter."""

    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params: GcnParams, lr: float, weight_decay: float = 0.0) -> "OptimizerState":
        mats = [params.w0, params.w1]
        return cls(lr=lr, weight_decay=weight_decay,
                   m=[np.zeros_like(w) for w in mats],
                   v=[np.zeros_like(w) for w in mats])


def adam_step(params: GcnParams, grads: GcnGrads, state: OptimizerState) -> None:
    """In-place Adam update with bias correction."""
    state.step += 1
    t = state.step
    for i, (w, g) in enumerate(((params.w0, grads.w0), (params.w1, grads.w1))):
        state.m[i] = state.beta1 * state.m[i] + (1 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1 - state.beta2) * g * g
        m_hat = state.m[i] / (1 - state.beta1 ** t)
        v_hat = state.v[i] / (1 - state.beta2 ** t)
        w -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def row_entropy(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy per row, with 0·ln 0 := 0."""
    p = np.asarray(probs, dtype=np.float64)
    terms = np.where(p > 0, p * np.log(np.clip(p, LOG_FLOOR, None)), 0.0)
    return -terms.sum(axis=1)
