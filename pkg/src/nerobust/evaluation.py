"""Node classification and network reconstruction robustness pipelines."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .embed import Embedding, MethodConfig, embed
from .graph import Graph, LabelMap
from .logreg import DEFAULT_REG_GRID, train_logreg_binary, train_logreg_ovr
from .metrics import auc, average_precision, f1_scores

CORRECT, INCORRECT, TRAIN = "correct", "incorrect", "train"


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _standardize(train: np.ndarray, *others: np.ndarray):
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd[sd == 0] = 1.0
    return [(a - mu) / sd for a in (train, *others)]


@dataclass
class NCResult:
    f1_micro: float
    f1_macro: float
    status: dict  # node id -> correct | incorrect | train
    metadata: dict = field(default_factory=dict)

    @property
    def mr(self) -> float:
        """Misclassification rate over the evaluated (non-train) nodes."""
        wrong = sum(s == INCORRECT for s in self.status.values())
        right = sum(s == CORRECT for s in self.status.values())
        return wrong / (wrong + right) if wrong + right else 0.0


@dataclass
class NRResult:
    auc: float
    average_precision: float
    metadata: dict = field(default_factory=dict)


def node_classification_eval(
    g_attacked: Graph,
    labels: Mapping[int, int],
    cfg: MethodConfig,
    n_tr: float,
    shuffles: int = 3,
    rng: Optional[np.random.Generator] = None,
    *,
    embedding: Optional[Embedding] = None,
    folds: int = 5,
    reg_grid: Sequence[float] = DEFAULT_REG_GRID,
    standardize: bool = False,
    metadata: Optional[dict] = None,
) -> list[NCResult]:
    """Embed the attacked graph once, then train/evaluate an OvR classifier per shuffle.

    Each shuffle draws ``round(n_tr * N)`` training nodes uniformly from the
    labeled nodes; all other labeled nodes are evaluated.
    """
    if not 0 < n_tr < 1:
        raise ValueError(f"n_tr must lie in (0, 1), got {n_tr}")
    rng = np.random.default_rng() if rng is None else rng
    emb = embedding if embedding is not None else embed(g_attacked, cfg)
    nodes = np.array(sorted(labels), dtype=np.int64)
    y_all = np.array([labels[v] for v in nodes])
    n_train = _round_half_up(n_tr * len(nodes))
    results = []
    for shuffle in range(shuffles):
        perm = rng.permutation(len(nodes))
        tr, te = np.sort(perm[:n_train]), np.sort(perm[n_train:])
        X_tr, X_te = emb.matrix[nodes[tr]], emb.matrix[nodes[te]]
        if standardize:
            X_tr, X_te = _standardize(X_tr, X_te)
        clf = train_logreg_ovr(X_tr, y_all[tr], folds, reg_grid, rng)
        pred = clf.predict(X_te)
        micro, macro = f1_scores(y_all[te], pred)
        status = {int(v): TRAIN for v in nodes[tr]}
        for v, yt, yp in zip(nodes[te], y_all[te], pred):
            status[int(v)] = CORRECT if yt == yp else INCORRECT
        meta = dict(metadata or {})
        meta.update(method=cfg.method, n_tr=n_tr, shuffle=shuffle, seed=cfg.seed, reg=clf.reg)
        results.append(NCResult(micro, macro, status, meta))
    return results


def hadamard_pair_features(emb, pairs) -> np.ndarray:
    """Row per pair: the entrywise product of the two node vectors."""
    mat = emb.matrix if isinstance(emb, Embedding) else np.asarray(emb)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) and (pairs.min() < 0 or pairs.max() >= mat.shape[0]):
        raise ValueError("pair endpoint out of range")
    return mat[pairs[:, 0]] * mat[pairs[:, 1]]


def _decode_pairs(index: np.ndarray, n: int) -> np.ndarray:
    """Map linear indices of the strict upper triangle (row-major) to (i, j)."""
    i = np.arange(n)
    offsets = i * (2 * n - i - 1) // 2
    rows = np.searchsorted(offsets, index, side="right") - 1
    cols = index - offsets[rows] + rows + 1
    return np.stack([rows, cols], axis=1)


def sample_node_pairs(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` distinct unordered pairs drawn uniformly without replacement."""
    total = n * (n - 1) // 2
    if not 0 <= k <= total:
        raise ValueError(f"cannot draw {k} pairs out of {total}")
    return _decode_pairs(np.sort(rng.choice(total, size=k, replace=False)), n)


def sample_non_edges(g: Graph, k: int, rng: np.random.Generator) -> np.ndarray:
    total = g.num_nodes * (g.num_nodes - 1) // 2
    k = min(k, total - g.num_edges)
    picked: set = set()
    while len(picked) < k:
        need = k - len(picked)
        cand = rng.integers(g.num_nodes, size=(2 * need + 16, 2))
        for u, v in cand.tolist():
            if u == v:
                continue
            e = (u, v) if u < v else (v, u)
            if e not in g.edges and e not in picked:
                picked.add(e)
                if len(picked) == k:
                    break
    return np.array(sorted(picked), dtype=np.int64).reshape(-1, 2)


def network_reconstruction_eval(
    g_original: Graph,
    g_attacked: Graph,
    cfg: MethodConfig,
    pair_fraction: float = 0.05,
    rng: Optional[np.random.Generator] = None,
    *,
    embedding: Optional[Embedding] = None,
    folds: int = 5,
    reg_grid: Sequence[float] = DEFAULT_REG_GRID,
    exclude_train_pairs: bool = False,
    standardize: bool = False,
    metadata: Optional[dict] = None,
) -> NRResult:
    """Train an edge classifier on the attacked graph, score it on pairs of the original.

    Training: Hadamard features of every edge of the attacked graph plus as
    many uniformly sampled non-edges. Test: ``round(pair_fraction * N(N-1)/2)``
    uniform node pairs of the original graph, labeled by edge membership.
    """
    if not 0 < pair_fraction <= 1:
        raise ValueError("pair_fraction must lie in (0, 1]")
    if g_original.num_nodes != g_attacked.num_nodes:
        raise ValueError("original and attacked graphs must share the node set")
    if g_attacked.num_edges == 0:
        raise ValueError("attacked graph has no edges; nothing to train on")
    rng = np.random.default_rng() if rng is None else rng
    emb = embedding if embedding is not None else embed(g_attacked, cfg)

    pos = np.array(g_attacked.sorted_edges(), dtype=np.int64)
    neg = sample_non_edges(g_attacked, len(pos), rng)
    train_pairs = np.vstack([pos, neg])
    y_train = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))]).astype(np.int64)

    n = g_original.num_nodes
    total = n * (n - 1) // 2
    k = _round_half_up(pair_fraction * total)
    if exclude_train_pairs:
        seen = {tuple(p) for p in train_pairs.tolist()}
        idx = rng.permutation(total)
        chosen = []
        for block in np.array_split(idx, max(1, total // 100_000)):
            for i, j in _decode_pairs(block, n).tolist():
                if (i, j) not in seen:
                    chosen.append((i, j))
            if len(chosen) >= k:
                break
        test_pairs = np.array(sorted(chosen[:k]), dtype=np.int64).reshape(-1, 2)
    else:
        test_pairs = sample_node_pairs(n, k, rng)
    y_test = np.array([g_original.has_edge(i, j) for i, j in test_pairs.tolist()], dtype=np.int64)

    X_tr = hadamard_pair_features(emb, train_pairs)
    X_te = hadamard_pair_features(emb, test_pairs)
    if standardize:
        X_tr, X_te = _standardize(X_tr, X_te)
    clf = train_logreg_binary(X_tr, y_train, folds, reg_grid, rng)
    scores = clf.decision_function(X_te)
    meta = dict(metadata or {})
    meta.update(method=cfg.method, seed=cfg.seed, pair_fraction=pair_fraction, test_pairs=len(test_pairs), reg=clf.reg)
    return NRResult(auc(scores, y_test), average_precision(scores, y_test), meta)


# -- prediction status export ---------------------------------------------


def export_prediction_status(result: NCResult, g: Graph, labels: Mapping[int, int]) -> dict:
    """JSON-ready document: nodes with label and status, edges, mr and metadata."""
    return {
        "nodes": [
            {"id": v, "label": int(labels[v]) if v in labels else None, "status": result.status.get(v)}
            for v in range(g.num_nodes)
        ],
        "edges": [list(e) for e in g.sorted_edges()],
        "mr": result.mr,
        "f1_micro": result.f1_micro,
        "f1_macro": result.f1_macro,
        "metadata": _jsonable(result.metadata),
    }


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=lambda o: o.item() if hasattr(o, "item") else str(o)))


def prediction_status_from_document(doc: dict) -> tuple[NCResult, Graph, LabelMap]:
    nodes = doc["nodes"]
    g = Graph(len(nodes), (tuple(e) for e in doc["edges"]))
    labels = LabelMap({n["id"]: n["label"] for n in nodes if n["label"] is not None})
    status = {n["id"]: n["status"] for n in nodes if n["status"] is not None}
    return NCResult(doc["f1_micro"], doc["f1_macro"], status, doc["metadata"]), g, labels


def write_prediction_status(result: NCResult, g: Graph, labels: Mapping[int, int], path) -> dict:
    doc = export_prediction_status(result, g, labels)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    return doc


__all__ = [
    "NCResult",
    "NRResult",
    "export_prediction_status",
    "hadamard_pair_features",
    "network_reconstruction_eval",
    "node_classification_eval",
    "prediction_status_from_document",
    "sample_node_pairs",
    "write_prediction_status",
]
