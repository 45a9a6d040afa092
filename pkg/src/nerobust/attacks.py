"""Heuristic edge poisoning attacks: addition, deletion, rewiring and DICE.

Every attack works on a private copy of the input graph. The public
per-strategy functions (``add_random``, ``delete_ranked``, ...) mutate the
working graph they are handed and return the :class:`Changes` they made;
:func:`apply_attack` is the pure entry point that copies, dispatches and logs.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .graph import (
    Graph,
    UndefinedStatisticError,
    canonical_edge,
    edge_degree_moments,
    is_disconnecting,
)

ADDITION = ("add_rand", "add_deg", "add_pa", "add_da", "add_dd", "add_ce")
DELETION = ("del_rand", "del_deg", "del_pa", "del_da", "del_dd", "del_di")
REWIRING = ("rew_rand", "dice")
STRATEGIES = ADDITION + DELETION + REWIRING

# deletions ranked on a structural score; the output does not depend on the seed
DETERMINISTIC = frozenset({"del_deg", "del_pa", "del_da", "del_dd"})
LABEL_BASED = frozenset({"add_ce", "del_di", "dice"})
ASSORTATIVITY_BASED = frozenset({"add_da", "add_dd", "del_da", "del_dd"})

ATTEMPTS_PER_CHANGE = 100


class AttackError(ValueError):
    pass


def requested_changes(budget: float, num_edges: int) -> int:
    """round-half-up(budget * M)."""
    return int(math.floor(budget * num_edges + 0.5))


@dataclass
class AttackSpec:
    strategy: str
    budget: float
    allow_disconnect: bool = False
    seed: int = 0
    moment_mode: str = "literal"
    # del_rand / rew_rand: evaluate the d >= 2 rule on the original graph
    degree_on_original: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise AttackError(f"unknown attack strategy {self.strategy!r}")
        if self.moment_mode not in ("literal", "edge_end"):
            raise AttackError(f"unknown moment mode {self.moment_mode!r}")
        b = self.budget
        if not (isinstance(b, (int, float)) and math.isfinite(b) and b >= 0):
            raise AttackError(f"budget must be a finite non-negative number, got {b!r}")
        if self.strategy not in ADDITION and b >= 1:
            raise AttackError(f"budget for {self.strategy} must be < 1, got {b}")

    @property
    def deterministic(self) -> bool:
        return self.strategy in DETERMINISTIC

    @property
    def needs_labels(self) -> bool:
        return self.strategy in LABEL_BASED


@dataclass
class Changes:
    added: list = field(default_factory=list)
    removed: list = field(default_factory=list)
    achieved: int = 0
    shortfall_reason: Optional[str] = None


@dataclass
class AttackLog:
    strategy: str
    seed: int
    budget: float
    requested: int
    achieved: int
    added: list = field(default_factory=list)
    removed: list = field(default_factory=list)
    shortfall_reason: Optional[str] = None

    @property
    def exhausted(self) -> bool:
        return self.achieved < self.requested

    def to_dict(self) -> dict:
        d = asdict(self)
        d["added"] = [list(e) for e in self.added]
        d["removed"] = [list(e) for e in self.removed]
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "AttackLog":
        d = dict(d)
        d["added"] = [tuple(e) for e in d.get("added", [])]
        d["removed"] = [tuple(e) for e in d.get("removed", [])]
        return cls(**d)


class _EdgePool:
    """Edge list with O(1) removal and uniform sampling."""

    def __init__(self, edges):
        self.items = list(edges)
        self.pos = {e: i for i, e in enumerate(self.items)}

    def __len__(self):
        return len(self.items)

    def add(self, e):
        if e not in self.pos:
            self.pos[e] = len(self.items)
            self.items.append(e)

    def remove(self, e):
        i = self.pos.pop(e)
        last = self.items.pop()
        if i < len(self.items):
            self.items[i] = last
            self.pos[last] = i

    def draw(self, rng, eligible: Callable[[tuple], bool], tries: int = 32):
        """Uniform draw among eligible edges, or None if there are none."""
        n = len(self.items)
        if n == 0:
            return None
        for _ in range(min(tries, n)):
            e = self.items[int(rng.integers(n))]
            if eligible(e):
                return e
        for i in rng.permutation(n):
            e = self.items[int(i)]
            if eligible(e):
                return e
        return None


class _Attempts:
    def __init__(self, n_changes: int):
        self.left = ATTEMPTS_PER_CHANGE * n_changes

    def take(self) -> bool:
        if self.left <= 0:
            return False
        self.left -= 1
        return True


def _shortfall(ch: Changes, n: int, reason: str) -> Changes:
    if ch.achieved < n:
        ch.shortfall_reason = reason
    return ch


def _removable(g: Graph, allow_disconnect: bool, min_degree: Optional[np.ndarray] = None):
    """Eligibility predicate for random deletions (d >= 2 and, optionally, not a bridge)."""

    def check(e):
        u, v = e
        if min_degree is not None:
            du, dv = min_degree[u], min_degree[v]
        else:
            du, dv = len(g.adj[u]), len(g.adj[v])
        if du < 2 or dv < 2:
            return False
        return allow_disconnect or not is_disconnecting(g, e)

    return check


# -- additions -------------------------------------------------------------


def add_random(g: Graph, n: int, rng: np.random.Generator) -> Changes:
    """Add ``n`` node pairs drawn uniformly among non-edges (rejection sampling)."""
    ch = Changes()
    attempts = _Attempts(n)
    N = g.num_nodes
    while ch.achieved < n and N >= 2 and attempts.take():
        u, v = (int(x) for x in rng.integers(N, size=2))
        if g.add_edge(u, v):
            ch.added.append(canonical_edge(u, v))
            ch.achieved += 1
    return _shortfall(ch, n, "no free node pair found within the attempt cap")


def _draw_weighted(rng, weights: np.ndarray) -> Optional[int]:
    total = weights.sum()
    if not total > 0:
        return None
    cum = np.cumsum(weights)
    return int(min(np.searchsorted(cum, rng.random() * cum[-1], side="right"), len(weights) - 1))


def add_degree_based(g: Graph, n: int, variant: str, rng: np.random.Generator) -> Changes:
    """Degree-driven additions.

    ``deg``: source uniform, destination proportional to degree.
    ``pa``: both endpoints proportional to degree (preferential attachment).
    Degrees are refreshed after every accepted edge.
    """
    if variant not in ("deg", "pa"):
        raise AttackError(f"unknown degree variant {variant!r}")
    ch = Changes()
    attempts = _Attempts(n)
    N = g.num_nodes
    deg = g.degrees().astype(float)
    while ch.achieved < n and N >= 2 and attempts.take():
        u = int(rng.integers(N)) if variant == "deg" else _draw_weighted(rng, deg)
        v = _draw_weighted(rng, deg)
        if u is None or v is None:
            break
        if g.add_edge(u, v):
            ch.added.append(canonical_edge(u, v))
            ch.achieved += 1
            deg[u] += 1
            deg[v] += 1
    return _shortfall(ch, n, "no admissible degree-weighted pair found within the attempt cap")


def assortative_destination_weights(deg: np.ndarray, source: int, sign: str) -> np.ndarray:
    """Destination weights given the source node.

    assortative: ``1/|d_i - d_j|``; equal degrees get twice the largest finite weight.
    disassortative: ``|d_i - d_j|``.
    The source itself always has weight 0.
    """
    diff = np.abs(deg - deg[source]).astype(float)
    if sign == "disassortative":
        w = diff
    elif sign == "assortative":
        w = np.zeros_like(diff)
        finite = diff > 0
        w[finite] = 1.0 / diff[finite]
        cand = np.ones(len(deg), dtype=bool)
        cand[source] = False
        peak = w[cand & finite].max() if np.any(cand & finite) else 0.5
        w[~finite] = 2.0 * peak
    else:
        raise AttackError(f"unknown assortativity sign {sign!r}")
    w[source] = 0.0
    return w


def add_assortative(
    g: Graph, n: int, sign: str, rng: np.random.Generator, mu: float, sigma: float
) -> Changes:
    """Add edges that raise (``assortative``) or lower (``disassortative``) degree assortativity.

    Sources are drawn with probability proportional to ``|d_i - mu|``;
    ``mu``/``sigma`` come from :func:`edge_degree_moments` on the input graph.
    """
    if sigma <= 0:
        raise UndefinedStatisticError("degree moments give sigma = 0; assortativity attacks are undefined")
    ch = Changes()
    attempts = _Attempts(n)
    deg = g.degrees().astype(float)
    while ch.achieved < n and g.num_nodes >= 2 and attempts.take():
        u = _draw_weighted(rng, np.abs(deg - mu))
        if u is None:
            break
        v = _draw_weighted(rng, assortative_destination_weights(deg, u, sign))
        if v is None:
            continue
        if g.add_edge(u, v):
            ch.added.append(canonical_edge(u, v))
            ch.achieved += 1
            deg[u] += 1
            deg[v] += 1
    return _shortfall(ch, n, "no admissible pair found within the attempt cap")


def _labeled_nodes(labels: Mapping[int, int], num_nodes: int) -> np.ndarray:
    return np.array(sorted(v for v in labels if v < num_nodes), dtype=np.int64)


def _check_two_classes(labels: Mapping[int, int]) -> None:
    if len(set(labels.values())) < 2:
        raise AttackError("label-based attack needs at least two distinct labels")


def _try_add_cross_label(g, labels, nodes, rng, attempts) -> Optional[tuple]:
    while len(nodes) >= 2 and attempts.take():
        u, v = (int(nodes[i]) for i in rng.integers(len(nodes), size=2))
        if labels[u] != labels[v] and g.add_edge(u, v):
            return canonical_edge(u, v)
    return None


def add_cross_label(g: Graph, labels: Mapping[int, int], n: int, rng: np.random.Generator) -> Changes:
    """Add random non-edges between nodes of different labels only."""
    _check_two_classes(labels)
    ch = Changes()
    attempts = _Attempts(n)
    nodes = _labeled_nodes(labels, g.num_nodes)
    while ch.achieved < n:
        e = _try_add_cross_label(g, labels, nodes, rng, attempts)
        if e is None:
            break
        ch.added.append(e)
        ch.achieved += 1
    return _shortfall(ch, n, "no cross-label non-edge found within the attempt cap")


# -- deletions -------------------------------------------------------------


def delete_random(
    g: Graph,
    n: int,
    allow_disconnect: bool,
    rng: np.random.Generator,
    degree_on_original: bool = False,
) -> Changes:
    """Remove ``n`` random edges whose endpoints both have degree >= 2.

    Edges are scanned in a random order. Eligibility can only be lost while
    edges are being removed, so the first eligible edge in the order is a
    uniform draw among the currently eligible ones.
    """
    ch = Changes()
    edges = g.sorted_edges()
    ok = _removable(g, allow_disconnect, g.degrees() if degree_on_original else None)
    for i in rng.permutation(len(edges)):
        if ch.achieved >= n:
            break
        e = edges[int(i)]
        if ok(e):
            g.remove_edge(*e)
            ch.removed.append(e)
            ch.achieved += 1
    return _shortfall(ch, n, "no remaining edge satisfies the degree/connectivity constraints")


def ranked_edge_scores(g: Graph, metric: str, moment_mode: str = "literal") -> dict:
    deg = g.degrees().astype(float)
    if metric in ("da", "dd"):
        mu, sigma = edge_degree_moments(g, moment_mode)
        if sigma <= 0:
            raise UndefinedStatisticError("degree moments give sigma = 0; assortativity attacks are undefined")
        sign = 1.0 if metric == "da" else -1.0
        return {e: sign * ((deg[e[0]] - mu) / sigma) * ((deg[e[1]] - mu) / sigma) for e in g.edges}
    if metric == "deg":
        return {e: deg[e[0]] + deg[e[1]] for e in g.edges}
    if metric == "pa":
        return {e: deg[e[0]] * deg[e[1]] for e in g.edges}
    raise AttackError(f"unknown ranking metric {metric!r}")


def delete_ranked(
    g: Graph, n: int, metric: str, allow_disconnect: bool, moment_mode: str = "literal"
) -> Changes:
    """Delete the top-``n`` edges by a structural score, computed once on the input.

    Ties are broken by canonical edge order. With ``allow_disconnect=False``
    bridges are skipped, not treated as a stop condition.
    """
    ch = Changes()
    if g.num_edges == 0:
        return _shortfall(ch, n, "graph has no edges")
    scores = ranked_edge_scores(g, metric, moment_mode)
    ranking = sorted(scores, key=lambda e: (-scores[e], e))
    for e in ranking:
        if ch.achieved >= n:
            break
        if allow_disconnect or not is_disconnecting(g, e):
            g.remove_edge(*e)
            ch.removed.append(e)
            ch.achieved += 1
    return _shortfall(ch, n, "every remaining ranked edge is a bridge")


def _intra_label_edges(g: Graph, labels: Mapping[int, int]) -> list:
    return [e for e in g.sorted_edges() if e[0] in labels and e[1] in labels and labels[e[0]] == labels[e[1]]]


def delete_intra_label(
    g: Graph, labels: Mapping[int, int], n: int, allow_disconnect: bool, rng: np.random.Generator
) -> Changes:
    """Remove random edges whose endpoints share a label."""
    ch = Changes()
    edges = _intra_label_edges(g, labels)
    for i in rng.permutation(len(edges)):
        if ch.achieved >= n:
            break
        e = edges[int(i)]
        if allow_disconnect or not is_disconnecting(g, e):
            g.remove_edge(*e)
            ch.removed.append(e)
            ch.achieved += 1
    return _shortfall(ch, n, "no removable same-label edge left")


# -- rewiring and mixed ----------------------------------------------------


def rewire_random(
    g: Graph,
    n: int,
    allow_disconnect: bool,
    rng: np.random.Generator,
    degree_on_original: bool = False,
) -> Changes:
    """Rewire ``n`` edges: drop {i, j} as in ``del_rand``, then link i to a new k.

    k is uniform over nodes with k != i, k != j and {i, k} not an edge. If no
    such k exists the removal is undone and the operation counts as a shortfall.
    """
    ch = Changes()
    pool = _EdgePool(g.sorted_edges())
    ok = _removable(g, allow_disconnect, g.degrees() if degree_on_original else None)
    N = g.num_nodes
    failed = 0
    for _ in range(n):
        e = pool.draw(rng, ok)
        if e is None:
            break
        i, j = e if rng.random() < 0.5 else (e[1], e[0])
        g.remove_edge(i, j)
        k = None
        for _ in range(ATTEMPTS_PER_CHANGE):
            c = int(rng.integers(N))
            if c != i and c != j and c not in g.adj[i]:
                k = c
                break
        if k is None:
            free = [c for c in range(N) if c != i and c != j and c not in g.adj[i]]
            if free:
                k = free[int(rng.integers(len(free)))]
        if k is None:
            g.add_edge(i, j)
            failed += 1
            continue
        g.add_edge(i, k)
        pool.remove(e)
        new = canonical_edge(i, k)
        pool.add(new)
        ch.removed.append(e)
        ch.added.append(new)
        ch.achieved += 1
    reason = "no eligible edge to rewire"
    if failed:
        reason = f"{failed} rewire(s) rolled back for lack of a free target node"
    return _shortfall(ch, n, reason)


def dice(
    g: Graph,
    labels: Mapping[int, int],
    n: int,
    rng: np.random.Generator,
    allow_disconnect: bool = False,
) -> Changes:
    """DICE: each of ``n`` operations is a fair coin flip between removing a
    same-label edge and adding a cross-label edge. An operation whose side has
    no candidate falls through to the other side.
    """
    _check_two_classes(labels)
    ch = Changes()
    pool = _EdgePool(_intra_label_edges(g, labels))
    nodes = _labeled_nodes(labels, g.num_nodes)
    attempts = _Attempts(n)

    def ok(e):
        return allow_disconnect or not is_disconnecting(g, e)

    def delete():
        e = pool.draw(rng, ok)
        if e is None:
            return False
        g.remove_edge(*e)
        pool.remove(e)
        ch.removed.append(e)
        return True

    def add():
        e = _try_add_cross_label(g, labels, nodes, rng, attempts)
        if e is None:
            return False
        ch.added.append(e)
        return True

    for _ in range(n):
        first, second = (delete, add) if rng.random() < 0.5 else (add, delete)
        if first() or second():
            ch.achieved += 1
    return _shortfall(ch, n, "neither a same-label edge to remove nor a cross-label pair to add")


# -- entry point -----------------------------------------------------------


def apply_attack(
    g: Graph, labels: Optional[Mapping[int, int]], spec: AttackSpec
) -> tuple[Graph, AttackLog]:
    """Attack a copy of ``g`` according to ``spec``; ``g`` itself is left untouched."""
    if spec.needs_labels and not labels:
        raise AttackError(f"strategy {spec.strategy} requires node labels")
    work = g.copy()
    n = requested_changes(spec.budget, g.num_edges)
    log = AttackLog(spec.strategy, spec.seed, spec.budget, requested=n, achieved=0)
    if spec.strategy in ASSORTATIVITY_BASED:
        if g.num_edges == 0:
            raise UndefinedStatisticError("assortativity attacks need at least one edge")
        mu, sigma = edge_degree_moments(g, spec.moment_mode)
        if sigma <= 0:
            raise UndefinedStatisticError("degree moments give sigma = 0; assortativity attacks are undefined")
    if n == 0:
        return work, log
    if spec.strategy in ("add_ce", "dice"):
        _check_two_classes(labels)

    rng = np.random.default_rng(spec.seed)
    s = spec.strategy
    if s == "add_rand":
        ch = add_random(work, n, rng)
    elif s in ("add_deg", "add_pa"):
        ch = add_degree_based(work, n, s[4:], rng)
    elif s in ("add_da", "add_dd"):
        sign = "assortative" if s == "add_da" else "disassortative"
        ch = add_assortative(work, n, sign, rng, mu, sigma)
    elif s == "add_ce":
        ch = add_cross_label(work, labels, n, rng)
    elif s == "del_rand":
        ch = delete_random(work, n, spec.allow_disconnect, rng, spec.degree_on_original)
    elif s in ("del_deg", "del_pa", "del_da", "del_dd"):
        ch = delete_ranked(work, n, s[4:], spec.allow_disconnect, spec.moment_mode)
    elif s == "del_di":
        ch = delete_intra_label(work, labels, n, spec.allow_disconnect, rng)
    elif s == "rew_rand":
        ch = rewire_random(work, n, spec.allow_disconnect, rng, spec.degree_on_original)
    else:
        ch = dice(work, labels, n, rng, spec.allow_disconnect)

    log.added, log.removed = ch.added, ch.removed
    log.achieved = ch.achieved
    log.shortfall_reason = ch.shortfall_reason
    return work, log
