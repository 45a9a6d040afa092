"""Matrix-factorization embeddings (HOPE, NetMF, GraRep) on dense proximity matrices."""

from __future__ import annotations

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import svds

from ..graph import Graph

# graphs in scope have a few thousand nodes; dense N x N matrices are fine up to this size
MAX_DENSE_NODES = 20_000
_DENSE_SVD_LIMIT = 3_000


def _check_size(g: Graph) -> None:
    if g.num_nodes > MAX_DENSE_NODES:
        raise ValueError(
            f"factorization methods materialize dense N x N matrices; N={g.num_nodes} exceeds {MAX_DENSE_NODES}"
        )


def truncated_svd(matrix, rank: int):
    """Top-``rank`` singular triplets ``(U, s, V)`` with ``matrix ~ U diag(s) V.T``.

    Singular values are returned in non-increasing order. Signs are fixed so
    that the largest-magnitude entry of every column of U is positive, which
    makes the factors reproducible.
    """
    rows, cols = matrix.shape
    if not 1 <= rank <= min(rows, cols):
        raise ValueError(f"rank must be in [1, {min(rows, cols)}], got {rank}")
    if sp.issparse(matrix) and min(rows, cols) > _DENSE_SVD_LIMIT and rank < min(rows, cols) - 1:
        v0 = np.random.default_rng(0).standard_normal(min(rows, cols))
        u, s, vt = svds(matrix.astype(float), k=rank, v0=v0)
        order = np.argsort(-s, kind="stable")
        u, s, vt = u[:, order], s[order], vt[order]
    else:
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
        try:
            u, s, vt = la.svd(dense, full_matrices=False, lapack_driver="gesdd")
        except la.LinAlgError:
            u, s, vt = la.svd(dense, full_matrices=False, lapack_driver="gesvd")
        u, s, vt = u[:, :rank], s[:rank], vt[:rank]
    v = vt.T
    flip = np.sign(u[np.argmax(np.abs(u), axis=0), np.arange(u.shape[1])])
    flip[flip == 0] = 1.0
    return u * flip, s, v * flip


def _pad(block: np.ndarray, width: int) -> np.ndarray:
    if block.shape[1] >= width:
        return block[:, :width]
    return np.hstack([block, np.zeros((block.shape[0], width - block.shape[1]))])


def _scaled_factor(matrix: np.ndarray, rank: int) -> tuple[np.ndarray, np.ndarray]:
    """(U sqrt(S), V sqrt(S)) of a rank-``rank`` SVD, rank clipped to the matrix size."""
    rank = min(rank, min(matrix.shape))
    u, s, v = truncated_svd(matrix, rank)
    root = np.sqrt(s)
    return u * root, v * root


def spectral_radius(g: Graph, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Largest adjacency eigenvalue by power iteration on ``A + I``.

    The shift makes the Perron eigenvalue dominant in magnitude even for
    bipartite graphs, where ``-rho`` is also an eigenvalue of A.
    """
    if g.num_edges == 0:
        return 0.0
    a = g.to_scipy("csr")
    x = np.ones(g.num_nodes) / np.sqrt(g.num_nodes)
    lam = 0.0
    for _ in range(max_iter):
        y = a @ x + x
        new = float(x @ y)
        y /= np.linalg.norm(y)
        if abs(new - lam) <= tol * max(1.0, abs(new)):
            lam = new
            break
        x, lam = y, new
    return lam - 1.0


def katz_matrix(g: Graph, beta: float) -> np.ndarray:
    a = g.to_dense()
    eye = np.eye(g.num_nodes)
    return la.solve(eye - beta * a, beta * a, assume_a="sym")


def hope_embed(g: Graph, d: int = 128, katz_beta=None) -> np.ndarray:
    """HOPE on the Katz proximity ``S = (I - beta A)^-1 beta A``.

    The embedding is ``[U sqrt(S) | V sqrt(S)]`` from a rank-d/2 SVD of S.
    ``katz_beta`` defaults to half the inverse spectral radius.
    """
    if d < 2 or d % 2:
        raise ValueError(f"HOPE needs an even dimension >= 2, got {d}")
    _check_size(g)
    half = d // 2
    if g.num_edges == 0:
        return np.zeros((g.num_nodes, d))
    rho = spectral_radius(g)
    beta = 0.5 / rho if katz_beta is None else float(katz_beta)
    if not 0 < beta < 1.0 / rho:
        raise ValueError(f"katz_beta={beta} must lie in (0, 1/rho) = (0, {1.0 / rho:.6g}) for a convergent Katz series")
    left, right = _scaled_factor(katz_matrix(g, beta), half)
    return np.hstack([_pad(left, half), _pad(right, half)])


def _transition(g: Graph) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-stochastic P = D^-1 A with zero rows for isolated nodes; also returns degrees and D^-1."""
    a = g.to_dense()
    deg = a.sum(axis=1)
    dinv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return dinv[:, None] * a, deg, dinv


def netmf_matrix(g: Graph, window: int = 10, negatives: float = 1.0) -> np.ndarray:
    """``log max(vol/(b T) * (sum_{r<=T} P^r) D^-1, 1)``."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if negatives <= 0:
        raise ValueError("negatives must be positive")
    p, deg, dinv = _transition(g)
    vol = deg.sum()
    acc = np.zeros_like(p)
    power = np.eye(g.num_nodes)
    for _ in range(window):
        power = power @ p
        acc += power
    m = (vol / (negatives * window)) * acc * dinv[None, :]
    return np.log(np.maximum(m, 1.0))


def netmf_embed(g: Graph, d: int = 128, window: int = 10, negatives: float = 1.0) -> np.ndarray:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    _check_size(g)
    left, _ = _scaled_factor(netmf_matrix(g, window, negatives), d)
    return _pad(left, d)


def grarep_matrices(g: Graph, K: int = 4) -> list[np.ndarray]:
    """Positive log-probability matrices of the 1..K step transitions.

    ``Y_k[i, j] = max(log(P^k[i, j] / sum_i' P^k[i', j]) - log(1/N), 0)``, zero
    where ``P^k[i, j] = 0``.
    """
    p, _, _ = _transition(g)
    n = g.num_nodes
    power = np.eye(n)
    out = []
    for _ in range(K):
        power = power @ p
        col = power.sum(axis=0)
        ratio = np.divide(power, col[None, :], out=np.zeros_like(power), where=(power > 0) & (col[None, :] > 0))
        y = np.zeros_like(power)
        pos = ratio > 0
        y[pos] = np.log(ratio[pos]) + np.log(n)
        np.maximum(y, 0.0, out=y)
        out.append(y)
    return out


def grarep_embed(g: Graph, d: int = 128, K: int = 4) -> np.ndarray:
    if K < 1 or d % K:
        raise ValueError(f"GraRep needs K >= 1 dividing d; got d={d}, K={K}")
    _check_size(g)
    width = d // K
    blocks = [_pad(_scaled_factor(y, width)[0], width) for y in grarep_matrices(g, K)]
    return np.hstack(blocks)
