"""First/second-order random walks (DeepWalk for p = q = 1, node2vec otherwise)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..graph import Graph

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(inline="always")
def _next_u64(state):
    # splitmix64
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(inline="always")
def _uniform(state):
    return float(_next_u64(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(inline="always")
def _randint(state, n):
    k = int(_uniform(state) * n)
    return k if k < n else n - 1


@njit(cache=True)
def _has_edge(indptr, indices, u, v):
    lo, hi = indptr[u], indptr[u + 1]
    k = np.searchsorted(indices[lo:hi], v)
    return k < hi - lo and indices[lo + k] == v


@njit(cache=True)
def _walk_kernel(indptr, indices, starts, walk_length, inv_p, inv_q, seed, out, lengths):
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    max_deg = 0
    for v in range(len(indptr) - 1):
        max_deg = max(max_deg, indptr[v + 1] - indptr[v])
    weights = np.empty(max(max_deg, 1))
    first_order = inv_p == 1.0 and inv_q == 1.0
    for w in range(len(starts)):
        cur = starts[w]
        prev = -1
        out[w, 0] = cur
        n = 1
        while n < walk_length:
            lo = indptr[cur]
            deg = indptr[cur + 1] - lo
            if deg == 0:
                break
            if prev < 0 or first_order:
                nxt = indices[lo + _randint(state, deg)]
            else:
                total = 0.0
                for t in range(deg):
                    x = indices[lo + t]
                    if x == prev:
                        wt = inv_p
                    elif _has_edge(indptr, indices, prev, x):
                        wt = 1.0
                    else:
                        wt = inv_q
                    weights[t] = wt
                    total += wt
                if total > 0.0:
                    r = _uniform(state) * total
                    acc = 0.0
                    pick = deg - 1
                    for t in range(deg):
                        acc += weights[t]
                        if r < acc:
                            pick = t
                            break
                    nxt = indices[lo + pick]
                else:
                    # every weight vanished (p, q -> inf): uniform over non-return moves
                    if deg == 1:
                        nxt = indices[lo]
                    else:
                        k = _randint(state, deg - 1)
                        nxt = indices[lo + k]
                        if nxt == prev:
                            nxt = indices[lo + deg - 1]
            out[w, n] = nxt
            n += 1
            prev = cur
            cur = nxt
        lengths[w] = n


@dataclass
class WalkCorpus:
    """Walks padded with -1 to ``walk_length``; ``lengths`` gives each walk's true length."""

    walks: np.ndarray
    lengths: np.ndarray
    num_nodes: int

    def __len__(self):
        return len(self.lengths)

    def __iter__(self):
        for row, n in zip(self.walks, self.lengths):
            yield row[:n]

    @property
    def num_tokens(self) -> int:
        return int(self.lengths.sum())

    def counts(self) -> np.ndarray:
        valid = self.walks[self.walks >= 0]
        return np.bincount(valid, minlength=self.num_nodes)


def _inverse(x: float) -> float:
    if x <= 0:
        raise ValueError("p and q must be positive")
    return 0.0 if math.isinf(x) else 1.0 / x


def generate_walks(
    g: Graph,
    num_walks: int = 10,
    walk_length: int = 80,
    p: float = 1.0,
    q: float = 1.0,
    rng: np.random.Generator | None = None,
) -> WalkCorpus:
    """``num_walks`` rounds of one walk per node, nodes shuffled each round.

    Second-order weights from previous node ``t`` at current node ``v``:
    ``1/p`` to return to ``t``, 1 for neighbors of ``t``, ``1/q`` otherwise.
    The first step of every walk is uniform. Isolated nodes give walks of length 1.
    """
    if walk_length < 1:
        raise ValueError("walk_length must be >= 1")
    if num_walks < 0:
        raise ValueError("num_walks must be >= 0")
    rng = np.random.default_rng() if rng is None else rng
    inv_p, inv_q = _inverse(p), _inverse(q)
    n = g.num_nodes
    starts = np.concatenate([rng.permutation(n) for _ in range(num_walks)]) if num_walks and n else np.empty(0, np.int64)
    starts = starts.astype(np.int64)
    out = np.full((len(starts), walk_length), -1, dtype=np.int64)
    lengths = np.zeros(len(starts), dtype=np.int64)
    indptr, indices = g.csr_arrays()
    seed = int(rng.integers(0, 2**63 - 1))
    _walk_kernel(indptr, indices, starts, walk_length, inv_p, inv_q, seed, out, lengths)
    return WalkCorpus(out, lengths, n)
