"""Skip-gram with negative sampling, trained by plain SGD on a walk corpus."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .walks import WalkCorpus, _uniform


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def pair_loss(h: np.ndarray, pos: np.ndarray, negs: np.ndarray) -> float:
    """``-log s(h.pos) - sum_n log s(-h.neg_n)`` for one (center, context) pair."""
    return float(_softplus(-h @ pos) + np.sum(_softplus(negs @ h)))


def pair_loss_grad(h: np.ndarray, pos: np.ndarray, negs: np.ndarray):
    """Gradient of :func:`pair_loss` w.r.t. ``(h, pos, negs)``."""
    sp = _sigmoid(h @ pos)
    sn = _sigmoid(negs @ h)
    g_h = -(1.0 - sp) * pos + sn @ negs
    g_pos = -(1.0 - sp) * h
    g_negs = sn[:, None] * h[None, :]
    return g_h, g_pos, g_negs


@njit(inline="always")
def _log_sigmoid(x):
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


def alias_table(weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Walker/Vose alias table for O(1) sampling proportional to ``weights``."""
    w = np.asarray(weights, dtype=float)
    n = len(w)
    scaled = w * (n / w.sum())
    prob = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s], alias[s] = scaled[s], l
        scaled[l] -= 1.0 - scaled[s]
        (small if scaled[l] < 1.0 else large).append(l)
    return prob, alias


@njit(inline="always")
def _alias_draw(state, prob, alias):
    u = _uniform(state) * len(prob)
    k = min(int(u), len(prob) - 1)
    return k if u - k < prob[k] else alias[k]


# reassociation lets the d-length reductions vectorize; inf/nan semantics are kept
_FAST = {"reassoc", "contract", "nsz", "arcp"}


@njit(inline="always", fastmath=_FAST)
def _pair_step(w_in, w_out, center, targets, labels, m, lr, grad_h, track):
    d = w_in.shape[1]
    for k in range(d):
        grad_h[k] = 0.0
    loss = 0.0
    for t in range(m):
        tgt = targets[t]
        dot = 0.0
        for k in range(d):
            dot += w_in[center, k] * w_out[tgt, k]
        if track:
            loss -= _log_sigmoid(dot) if labels[t] == 1 else _log_sigmoid(-dot)
        sig = 1.0 / (1.0 + math.exp(-dot)) if dot > -30.0 else 0.0
        g = (labels[t] - sig) * lr
        for k in range(d):
            grad_h[k] += g * w_out[tgt, k]
            w_out[tgt, k] += g * w_in[center, k]
    for k in range(d):
        w_in[center, k] += grad_h[k]
    return loss


@njit(cache=True)
def sgd_pair_update(w_in, w_out, center, targets, labels, lr, grad_h):
    """One SGD step on a (center, context) pair plus its negatives.

    ``targets[0]`` is the context with ``labels[0] = 1``, the rest are negatives.
    Returns the pair loss before the update. The training kernel runs the same
    step inline.
    """
    return _pair_step(w_in, w_out, center, targets, labels, len(targets), lr, grad_h, True)


@njit(cache=True, fastmath=_FAST)
def _train_kernel(walks, lengths, w_in, w_out, prob, alias, window, negatives, epochs, lr0, seed, losses, track):
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    d = w_in.shape[1]
    grad_h = np.empty(d)
    targets = np.empty(negatives + 1, dtype=np.int64)
    labels = np.zeros(negatives + 1, dtype=np.int64)
    labels[0] = 1
    total = float(lengths.sum()) * epochs + 1.0
    done = 0.0
    floor = lr0 * 1e-4
    for ep in range(epochs):
        loss_sum = 0.0
        pairs = 0
        for w in range(len(lengths)):
            n = lengths[w]
            for pos in range(n):
                lr = max(lr0 * (1.0 - done / total), floor)
                done += 1.0
                center = walks[w, pos]
                lo = max(0, pos - window)
                hi = min(n, pos + window + 1)
                for cpos in range(lo, hi):
                    if cpos == pos:
                        continue
                    ctx = walks[w, cpos]
                    targets[0] = ctx
                    m = 1
                    for _ in range(negatives):
                        neg = _alias_draw(state, prob, alias)
                        if neg != ctx:
                            targets[m] = neg
                            m += 1
                    loss_sum += _pair_step(w_in, w_out, center, targets, labels, m, lr, grad_h, track)
                    pairs += 1
        losses[ep] = loss_sum / pairs if pairs > 0 else 0.0


def skipgram_train(
    corpus: WalkCorpus,
    d: int = 128,
    window: int = 10,
    negatives: int = 5,
    epochs: int = 5,
    lr: float = 0.025,
    rng: np.random.Generator | None = None,
    return_losses: bool = False,
):
    """Train center vectors with SGNS; negatives are drawn from unigram counts ** 0.75.

    The learning rate decays linearly from ``lr`` to ``1e-4 * lr`` over all
    epochs. Nodes that never occur in a context pair keep their small random
    initialization. With ``return_losses`` the mean pair loss of every epoch
    is returned alongside the matrix.
    """
    if d <= 0:
        raise ValueError("embedding dimension must be positive")
    if len(corpus) == 0 or corpus.num_tokens == 0:
        raise ValueError("cannot train on an empty corpus")
    if window < 1 or negatives < 0 or epochs < 1:
        raise ValueError("window >= 1, negatives >= 0 and epochs >= 1 are required")
    rng = np.random.default_rng() if rng is None else rng
    n = corpus.num_nodes
    w_in = (rng.random((n, d)) - 0.5) / d
    w_out = np.zeros((n, d))
    prob, alias = alias_table(corpus.counts().astype(float) ** 0.75)
    losses = np.zeros(epochs)
    seed = int(rng.integers(0, 2**63 - 1))
    _train_kernel(
        corpus.walks, corpus.lengths, w_in, w_out, prob, alias, window, negatives, epochs, lr, seed, losses,
        return_losses,
    )
    if return_losses:
        return w_in, losses
    return w_in
