"""Undirected simple graphs, node labels and structural statistics."""

from __future__ import annotations

import gzip
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class UndefinedStatisticError(ValueError):
    """Raised when a statistic is undefined on the given graph (e.g. zero variance)."""


def canonical_edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class Graph:
    """Undirected simple graph on dense integer node ids ``0..N-1``.

    The edge set and the per-node neighbor sets are kept consistent by the
    mutation methods. Read-only use is safe to share; attacks always work on a
    :meth:`copy`.
    """

    def __init__(self, num_nodes: int, edges: Iterable[tuple[int, int]] = ()):
        if num_nodes < 0:
            raise ValueError("num_nodes must be non-negative")
        self.num_nodes = int(num_nodes)
        self.adj: list[set[int]] = [set() for _ in range(self.num_nodes)]
        self.edges: set[tuple[int, int]] = set()
        for u, v in edges:
            self.add_edge(int(u), int(v))

    # -- construction -----------------------------------------------------

    @classmethod
    def from_scipy(cls, matrix) -> "Graph":
        """Build from a (possibly directed, weighted) sparse adjacency matrix.

        The matrix is symmetrized and binarized; the diagonal is dropped.
        """
        coo = sp.triu(sp.coo_matrix(matrix) + sp.coo_matrix(matrix).T, k=1).tocoo()
        g = cls(matrix.shape[0])
        for u, v in zip(coo.row.tolist(), coo.col.tolist()):
            g.adj[u].add(v)
            g.adj[v].add(u)
            g.edges.add((u, v))
        return g

    def copy(self) -> "Graph":
        g = Graph.__new__(Graph)
        g.num_nodes = self.num_nodes
        g.adj = [set(a) for a in self.adj]
        g.edges = set(self.edges)
        return g

    # -- mutation ---------------------------------------------------------

    def _check_node(self, v: int) -> None:
        if not 0 <= v < self.num_nodes:
            raise ValueError(f"node id {v} out of range [0, {self.num_nodes})")

    def add_edge(self, u: int, v: int) -> bool:
        """Insert ``{u, v}``; returns False for self-loops and existing edges."""
        self._check_node(u)
        self._check_node(v)
        if u == v or v in self.adj[u]:
            return False
        self.adj[u].add(v)
        self.adj[v].add(u)
        self.edges.add(canonical_edge(u, v))
        return True

    def remove_edge(self, u: int, v: int) -> None:
        if v not in self.adj[u]:
            raise ValueError(f"edge ({u}, {v}) not in graph")
        self.adj[u].discard(v)
        self.adj[v].discard(u)
        self.edges.discard(canonical_edge(u, v))

    # -- queries ----------------------------------------------------------

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def has_edge(self, u: int, v: int) -> bool:
        return 0 <= u < self.num_nodes and v in self.adj[u]

    def degrees(self) -> np.ndarray:
        return np.fromiter((len(a) for a in self.adj), dtype=np.int64, count=self.num_nodes)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def to_scipy(self, fmt: str = "csr") -> sp.spmatrix:
        if not self.edges:
            return sp.csr_matrix((self.num_nodes, self.num_nodes)).asformat(fmt)
        e = np.array(self.sorted_edges(), dtype=np.int64)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(len(rows))
        m = sp.coo_matrix((data, (rows, cols)), shape=(self.num_nodes, self.num_nodes))
        return m.asformat(fmt)

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a

    def csr_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) with each node's neighbors sorted ascending."""
        deg = self.degrees()
        indptr = np.zeros(self.num_nodes + 1, dtype=np.int64)
        np.cumsum(deg, out=indptr[1:])
        indices = np.empty(int(indptr[-1]), dtype=np.int64)
        for v, nbrs in enumerate(self.adj):
            indices[indptr[v]:indptr[v + 1]] = sorted(nbrs)
        return indptr, indices

    def subgraph(self, nodes: Iterable[int]) -> tuple["Graph", np.ndarray]:
        """Induced subgraph relabeled to ``0..k-1``; returns it with the old ids."""
        keep = np.array(sorted(set(nodes)), dtype=np.int64)
        remap = {int(old): new for new, old in enumerate(keep)}
        sub = Graph(len(keep))
        for u, v in self.edges:
            if u in remap and v in remap:
                sub.add_edge(remap[u], remap[v])
        return sub, keep

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Graph)
            and self.num_nodes == other.num_nodes
            and self.edges == other.edges
        )

    def __repr__(self) -> str:
        return f"Graph(num_nodes={self.num_nodes}, num_edges={self.num_edges})"

    def check_invariants(self) -> None:
        """Raise AssertionError if the edge set and adjacency disagree."""
        rebuilt = [set() for _ in range(self.num_nodes)]
        for u, v in self.edges:
            assert u < v, f"non-canonical or self-loop edge {(u, v)}"
            rebuilt[u].add(v)
            rebuilt[v].add(u)
        assert rebuilt == self.adj, "adjacency does not match edge set"


class LabelMap(dict):
    """Mapping node id -> integer class label (single label per node)."""

    def __init__(self, labels: Mapping[int, int] | Iterable[tuple[int, int]] = (), num_nodes=None):
        super().__init__()
        items = labels.items() if isinstance(labels, Mapping) else labels
        for node, lab in items:
            node, lab = int(node), int(lab)
            if node < 0 or (num_nodes is not None and node >= num_nodes):
                raise ValueError(f"labeled node {node} out of range")
            self[node] = lab

    @classmethod
    def from_array(cls, labels) -> "LabelMap":
        return cls(enumerate(np.asarray(labels).tolist()))

    @property
    def num_classes(self) -> int:
        return len(set(self.values()))

    @property
    def classes(self) -> list[int]:
        return sorted(set(self.values()))

    def to_array(self, num_nodes: int, fill: int = -1) -> np.ndarray:
        out = np.full(num_nodes, fill, dtype=np.int64)
        for node, lab in self.items():
            out[node] = lab
        return out


@dataclass
class GraphStats:
    num_nodes: int
    num_edges: int
    avg_degree: float
    assortativity: Optional[float]
    num_labels: Optional[int] = None
    homophily_ratio: Optional[float] = None

    @property
    def assortativity_defined(self) -> bool:
        return self.assortativity is not None


# -- statistics ------------------------------------------------------------


def degree(g: Graph, v: int) -> int:
    g._check_node(v)
    return len(g.adj[v])


def _edge_end_degrees(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    deg = g.degrees()
    if not g.edges:
        return np.empty(0), np.empty(0)
    e = np.array(list(g.edges), dtype=np.int64)
    di, dj = deg[e[:, 0]], deg[e[:, 1]]
    # both orientations of every edge
    return np.concatenate([di, dj]).astype(float), np.concatenate([dj, di]).astype(float)


def graph_assortativity(g: Graph) -> float:
    """Degree assortativity: Pearson correlation of degrees at the two ends of edges."""
    if g.num_edges == 0:
        raise UndefinedStatisticError("assortativity undefined for a graph without edges")
    x, y = _edge_end_degrees(g)
    xc = x - x.mean()
    yc = y - y.mean()
    var = float(np.dot(xc, xc))
    if var <= 0.0:
        raise UndefinedStatisticError("assortativity undefined: all edge-end degrees are equal")
    r = float(np.dot(xc, yc) / var)
    return min(1.0, max(-1.0, r))


def edge_degree_moments(g: Graph, mode: str = "literal") -> tuple[float, float]:
    """Degree moments (mu, sigma) used to standardize per-edge assortativity scores.

    ``literal``
        ``mu = sum_v d_v**2 / M`` and ``sigma = sqrt(sum_v d_v (d_v - mu)**2 / M)``,
        the sums running over nodes and normalized by the edge count M.
    ``edge_end``
        Mean and standard deviation of the degree over the 2M edge ends,
        i.e. the same sums normalized by 2M.

    Both modes return sigma = 0 rather than raising; callers that need a
    positive sigma must check.
    """
    if g.num_edges == 0:
        raise ValueError("edge_degree_moments requires at least one edge")
    if mode not in ("literal", "edge_end"):
        raise ValueError(f"unknown moment mode {mode!r}")
    d = g.degrees().astype(float)
    norm = g.num_edges if mode == "literal" else 2 * g.num_edges
    mu = float(np.sum(d * d) / norm)
    var = float(np.sum(d * (d - mu) ** 2) / norm)
    return mu, math.sqrt(max(var, 0.0))


def edge_assortativity_score(g: Graph, e: tuple[int, int], mu: float, sigma: float) -> float:
    if sigma <= 0:
        raise UndefinedStatisticError("sigma must be positive to standardize degrees")
    u, v = e
    if not g.has_edge(u, v):
        raise ValueError(f"edge {e} not in graph")
    return (len(g.adj[u]) - mu) / sigma * ((len(g.adj[v]) - mu) / sigma)


def homophily_ratio(g: Graph, labels: Mapping[int, int]) -> float:
    """Fraction of edges whose endpoints carry the same label."""
    if g.num_edges == 0:
        raise UndefinedStatisticError("homophily undefined for a graph without edges")
    same = 0
    for u, v in g.edges:
        try:
            same += labels[u] == labels[v]
        except KeyError as exc:
            raise ValueError(f"edge endpoint {exc.args[0]} has no label") from None
    return same / g.num_edges


def connected_components(g: Graph) -> list[list[int]]:
    seen = np.zeros(g.num_nodes, dtype=bool)
    comps = []
    for s in range(g.num_nodes):
        if seen[s]:
            continue
        seen[s] = True
        comp = [s]
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in g.adj[u]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    queue.append(w)
        comps.append(sorted(comp))
    return comps


def num_components(g: Graph) -> int:
    return len(connected_components(g))


def largest_component(g: Graph) -> tuple[Graph, np.ndarray]:
    comps = connected_components(g)
    biggest = max(comps, key=len) if comps else []
    return g.subgraph(biggest)


def _reachable_without(g: Graph, u: int, v: int) -> bool:
    """Is v reachable from u when the edge {u, v} is ignored? Bidirectional BFS."""
    if len(g.adj[u]) == 1 or len(g.adj[v]) == 1:
        return False
    front_a, front_b = {u}, {v}
    seen_a, seen_b = {u}, {v}
    while front_a and front_b:
        if len(front_a) > len(front_b):
            front_a, front_b = front_b, front_a
            seen_a, seen_b = seen_b, seen_a
        nxt = set()
        for x in front_a:
            for w in g.adj[x]:
                if (x == u and w == v) or (x == v and w == u):
                    continue
                if w in seen_b:
                    return True
                if w not in seen_a:
                    seen_a.add(w)
                    nxt.add(w)
        front_a = nxt
    return False


def is_disconnecting(g: Graph, e: tuple[int, int]) -> bool:
    """True iff removing ``e`` increases the number of connected components."""
    u, v = e
    if not g.has_edge(u, v):
        raise ValueError(f"edge {e} not in graph")
    return not _reachable_without(g, u, v)


def graph_stats(g: Graph, labels: Optional[Mapping[int, int]] = None) -> GraphStats:
    try:
        r = graph_assortativity(g)
    except UndefinedStatisticError:
        r = None
    stats = GraphStats(
        num_nodes=g.num_nodes,
        num_edges=g.num_edges,
        avg_degree=2 * g.num_edges / g.num_nodes if g.num_nodes else 0.0,
        assortativity=r,
    )
    if labels is not None:
        stats.num_labels = len(set(labels.values()))
        if g.num_edges and all(u in labels and v in labels for u, v in g.edges):
            stats.homophily_ratio = homophily_ratio(g, labels)
    return stats


# -- file formats ----------------------------------------------------------


def _tokens(path) -> Iterable[list[str]]:
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8", newline=None) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            yield line.split()


def read_edgelist(path, node_ids: Optional[dict] = None) -> tuple[Graph, dict]:
    """Read a whitespace-separated edge list.

    Tokens are remapped to dense ids in order of first appearance (or via the
    given ``node_ids`` mapping, which is extended). Directed duplicates are
    symmetrized; self-loops and repeated edges are dropped with a warning.
    Returns the graph and the token -> id mapping.
    """
    ids = dict(node_ids) if node_ids else {}
    pairs = []
    for tok in _tokens(path):
        if len(tok) < 2:
            raise ValueError(f"{path}: malformed edge line {' '.join(tok)!r}")
        a, b = tok[0], tok[1]
        for t in (a, b):
            if t not in ids:
                ids[t] = len(ids)
        pairs.append((ids[a], ids[b]))
    g = Graph(len(ids))
    dropped = sum(not g.add_edge(u, v) for u, v in pairs)
    if dropped:
        logger.warning("%s: dropped %d self-loop/duplicate edge lines", path, dropped)
    return g, ids


def read_labels(path, node_ids: dict) -> LabelMap:
    """Read ``node_token label_token`` lines; label tokens are mapped to ints in sorted order."""
    raw: dict[int, str] = {}
    for tok in _tokens(path):
        if len(tok) < 2:
            raise ValueError(f"{path}: malformed label line {' '.join(tok)!r}")
        if len(tok) > 2:
            raise ValueError(f"{path}: node {tok[0]} has multiple labels; only single-label data is supported")
        if tok[0] not in node_ids:
            continue
        node = node_ids[tok[0]]
        if node in raw and raw[node] != tok[1]:
            raise ValueError(f"{path}: node {tok[0]} has multiple labels; only single-label data is supported")
        raw[node] = tok[1]

    def key(t):
        return (0, int(t), t) if t.lstrip("-").isdigit() else (1, 0, t)

    codes = {t: i for i, t in enumerate(sorted(set(raw.values()), key=key))}
    return LabelMap({n: codes[t] for n, t in raw.items()})


def write_edgelist(g: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in g.sorted_edges():
            fh.write(f"{u} {v}\n")


def write_labels(labels: Mapping[int, int], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node in sorted(labels):
            fh.write(f"{node} {labels[node]}\n")
