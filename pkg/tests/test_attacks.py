import json
import math

import numpy as np
import pytest
from scipy import stats

from conftest import complete, path, random_graph, real_dataset, sbm, star
from nerobust.attacks import (
    DETERMINISTIC,
    LABEL_BASED,
    STRATEGIES,
    AttackError,
    AttackLog,
    AttackSpec,
    add_cross_label,
    add_degree_based,
    add_random,
    apply_attack,
    assortative_destination_weights,
    delete_intra_label,
    delete_random,
    delete_ranked,
    dice,
    requested_changes,
    rewire_random,
)
from nerobust.graph import Graph, LabelMap, UndefinedStatisticError, num_components


def labels_for(g, k=3, seed=0):
    rng = np.random.default_rng(seed)
    return LabelMap({v: int(rng.integers(k)) for v in range(g.num_nodes)})


def test_rounding_is_half_up():
    assert requested_changes(0.2, 5069) == 1014
    assert requested_changes(0.5, 3) == 2
    assert requested_changes(0.1, 5) == 1
    assert requested_changes(0.3, 0) == 0


def test_spec_validation():
    with pytest.raises(AttackError):
        AttackSpec("del_rand", 1.5)
    with pytest.raises(AttackError):
        AttackSpec("dice", 1.0)
    with pytest.raises(AttackError):
        AttackSpec("nope", 0.1)
    AttackSpec("add_rand", 1.5)  # additions may exceed 1


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_zero_budget_is_identity(strategy):
    g, lab = sbm([15, 15], 0.3, 0.05, seed=1)
    h, log = apply_attack(g, lab, AttackSpec(strategy, 0.0, seed=3))
    assert h == g and h is not g
    assert log.requested == log.achieved == 0 and not log.added and not log.removed


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_input_not_mutated_and_log_consistent(strategy):
    g, lab = sbm([20, 20], 0.3, 0.05, seed=2)
    before = g.copy()
    h, log = apply_attack(g, lab, AttackSpec(strategy, 0.3, seed=5))
    assert g == before
    h.check_invariants()
    assert log.achieved <= log.requested == requested_changes(0.3, g.num_edges)
    expected = (set(g.edges) - set(log.removed)) | set(log.added)
    if strategy != "rew_rand":
        assert not set(log.added) & set(log.removed)
        assert h.edges == expected
    assert h.num_edges == g.num_edges + len(log.added) - len(log.removed)
    assert h.num_nodes == g.num_nodes
    if log.achieved < log.requested:
        assert log.shortfall_reason
    again = AttackLog.from_dict(json.loads(log.to_json()))
    assert again == log


def test_log_json_schema():
    g = complete(5)
    _, log = apply_attack(g, None, AttackSpec("del_deg", 0.2, allow_disconnect=True))
    d = json.loads(log.to_json())
    assert {"strategy", "seed", "budget", "requested", "achieved", "added", "removed"} <= set(d)
    assert all(isinstance(e, list) and len(e) == 2 for e in d["removed"])


def test_missing_labels_and_sigma_zero():
    g = random_graph(20, 0.3, np.random.default_rng(0))
    for s in LABEL_BASED:
        with pytest.raises(AttackError):
            apply_attack(g, None, AttackSpec(s, 0.1))
    cycle = Graph(8, [(i, (i + 1) % 8) for i in range(8)])
    for s in ("add_da", "add_dd", "del_da", "del_dd"):
        with pytest.raises(UndefinedStatisticError):
            apply_attack(cycle, None, AttackSpec(s, 0.2, moment_mode="edge_end"))


# -- additions -------------------------------------------------------------


def test_add_random_complete_graph():
    g = complete(4)
    ch = add_random(g, 3, np.random.default_rng(0))
    assert ch.achieved == 0 and ch.shortfall_reason and g == complete(4)


def test_add_random_on_empty_edge_set():
    h, log = apply_attack(Graph(3), None, AttackSpec("add_rand", 1.0))
    assert log.requested == 0 and h.num_edges == 0


def test_add_random_exact_count():
    g = random_graph(50, 0.1, np.random.default_rng(7))
    h, log = apply_attack(g, None, AttackSpec("add_rand", 0.1, seed=1))
    assert log.achieved == requested_changes(0.1, g.num_edges)
    assert not set(log.added) & g.edges
    assert h.num_edges == g.num_edges + log.achieved


def test_add_random_uniform_over_non_edges():
    g = Graph(5, [(0, 1), (1, 2), (2, 3)])
    non_edges = [(i, j) for i in range(5) for j in range(i + 1, 5) if not g.has_edge(i, j)]
    counts = dict.fromkeys(non_edges, 0)
    for s in range(3000):
        ch = add_random(g.copy(), 1, np.random.default_rng(s))
        counts[ch.added[0]] += 1
    assert stats.chisquare(list(counts.values())).pvalue > 1e-3


def accepted_pair_probabilities(g, w_src, w_dst):
    """Exact law of the first accepted pair under rejection sampling."""
    p = {}
    for u in range(g.num_nodes):
        for v in range(g.num_nodes):
            if u != v and not g.has_edge(u, v):
                e = (min(u, v), max(u, v))
                p[e] = p.get(e, 0.0) + w_src[u] * w_dst[v]
    z = sum(p.values())
    return {e: x / z for e, x in p.items()}


def test_add_pa_hub_frequency():
    # hub 0 adjacent to nodes 1..14, plus a sparse ring among the rest
    n = 30
    edges = [(0, i) for i in range(1, 15)] + [(i, i + 1) for i in range(1, n - 1)]
    g = Graph(n, edges)
    deg = g.degrees().astype(float)
    probs = accepted_pair_probabilities(g, deg / deg.sum(), deg / deg.sum())
    p_hub = sum(p for e, p in probs.items() if 0 in e)
    trials = 2000
    hits = sum(0 in add_degree_based(g.copy(), 1, "pa", np.random.default_rng(s)).added[0] for s in range(trials))
    sd = math.sqrt(trials * p_hub * (1 - p_hub))
    assert abs(hits - trials * p_hub) <= 3 * sd
    # far more often than under uniform endpoints
    uniform = sum(1 for e in probs if 0 in e) / len(probs)
    assert hits / trials > 2 * uniform


def test_add_deg_never_targets_isolated():
    g = Graph(7, [(i, j) for i in range(5) for j in range(i + 1, 5)])
    for s in range(300):
        ch = add_degree_based(g.copy(), 1, "deg", np.random.default_rng(s))
        # the clique is full: every addition joins an isolated source to a clique node
        assert ch.achieved == 1 and ch.added[0] != (5, 6)
        assert ch.added[0][1] in (5, 6) and ch.added[0][0] < 5


def test_assortative_weights():
    deg = np.array([1, 1, 10])
    w = assortative_destination_weights(deg, 2, "assortative")
    np.testing.assert_allclose(w, [1 / 9, 1 / 9, 0.0])
    w = assortative_destination_weights(np.array([1, 10, 10]), 2, "assortative")
    np.testing.assert_allclose(w, [1 / 9, 2 / 9, 0.0])
    w = assortative_destination_weights(np.array([3, 3, 5, 1]), 0, "disassortative")
    np.testing.assert_allclose(w, [0.0, 0.0, 2.0, 2.0])


def test_add_dd_never_joins_equal_degrees():
    g = random_graph(40, 0.1, np.random.default_rng(3))
    deg = g.degrees()
    _, log = apply_attack(g, None, AttackSpec("add_dd", 0.05, seed=2))
    # the first addition uses the input degrees
    u, v = log.added[0]
    assert deg[u] != deg[v]


def test_add_ce_examples():
    g, lab = sbm([10, 10], 0.5, 0.0, seed=4)
    h, log = apply_attack(g, lab, AttackSpec("add_ce", 0.2, seed=1))
    assert log.achieved == log.requested > 0
    assert all(lab[u] != lab[v] for u, v in log.added)
    full = Graph(4, [(0, 2), (0, 3), (1, 2), (1, 3), (0, 1)])
    lab2 = LabelMap({0: 0, 1: 0, 2: 1, 3: 1})
    ch = add_cross_label(full, lab2, 2, np.random.default_rng(0))
    assert ch.achieved == 0 and ch.shortfall_reason
    with pytest.raises(AttackError):
        add_cross_label(full, LabelMap({v: 0 for v in range(4)}), 1, np.random.default_rng(0))


# -- deletions -------------------------------------------------------------


def test_delete_random_star_and_triangle():
    ch = delete_random(star(3), 2, False, np.random.default_rng(0))
    assert ch.achieved == 0
    g = complete(3)
    h, log = apply_attack(g, None, AttackSpec("del_rand", 0.2, seed=0))
    assert log.achieved == 1 and h.num_edges == 2 and h.degrees().min() >= 1


def test_delete_random_keeps_components():
    rng = np.random.default_rng(11)
    g = random_graph(50, 0.15, rng)
    before = num_components(g)
    h, log = apply_attack(g, None, AttackSpec("del_rand", 0.3, seed=4))
    assert num_components(h) == before
    assert h.degrees().min() >= min(1, g.degrees().min())
    assert log.achieved == log.requested


def test_delete_random_uniform_among_eligible():
    # triangle 0-1-2 plus pendant 3 on node 2: (2,3) is ineligible (degree 1)
    g = Graph(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
    counts = {}
    for s in range(3000):
        e = delete_random(g.copy(), 1, True, np.random.default_rng(s)).removed[0]
        counts[e] = counts.get(e, 0) + 1
    assert set(counts) == {(0, 1), (0, 2), (1, 2)}
    assert stats.chisquare(list(counts.values())).pvalue > 1e-3


def test_delete_random_degree_on_original():
    g = complete(3)
    ch = delete_random(g.copy(), 2, True, np.random.default_rng(0))
    assert ch.achieved == 1  # after one removal two nodes drop to degree 1
    ch = delete_random(g.copy(), 2, True, np.random.default_rng(0), degree_on_original=True)
    assert ch.achieved == 2


def test_delete_ranked_path_examples():
    g = path(4)
    ch = delete_ranked(g.copy(), 1, "deg", allow_disconnect=True)
    assert ch.removed == [(1, 2)]
    # every edge of a path is a bridge, so nothing may go when disconnection is forbidden
    ch = delete_ranked(g.copy(), 1, "deg", allow_disconnect=False)
    assert ch.removed == [] and ch.shortfall_reason


def test_delete_ranked_tie_break_and_skip():
    # triangle 0-1-2 with pendant 2-3: scores deg: (0,1)=4, (0,2)=5, (1,2)=5, (2,3)=4
    g = Graph(4, [(0, 1), (0, 2), (1, 2), (2, 3)])
    assert delete_ranked(g.copy(), 2, "deg", True).removed == [(0, 2), (1, 2)]
    # without disconnection: after (0,2) goes, the rest is a path and every edge is a bridge
    assert delete_ranked(g.copy(), 2, "deg", False).removed == [(0, 2)]


def test_deterministic_deletions_seed_invariant():
    g, lab = sbm([20, 20], 0.3, 0.05, seed=6)
    for s in DETERMINISTIC:
        a, _ = apply_attack(g, lab, AttackSpec(s, 0.3, seed=1))
        b, _ = apply_attack(g, lab, AttackSpec(s, 0.3, seed=99))
        assert a == b


def test_del_rand_on_cora():
    g, lab = real_dataset("cora")
    h, log = apply_attack(g, lab, AttackSpec("del_rand", 0.2, seed=0))
    assert h.num_edges == 4055
    a, _ = apply_attack(g, lab, AttackSpec("del_deg", 0.2, seed=1))
    b, _ = apply_attack(g, lab, AttackSpec("del_deg", 0.2, seed=2))
    assert a == b


def test_delete_intra_label():
    g, lab = sbm([12, 12], 0.4, 0.0, seed=2)
    ch = delete_intra_label(g.copy(), lab, 5, True, np.random.default_rng(0))
    assert ch.achieved == 5 and all(lab[u] == lab[v] for u, v in ch.removed)
    hetero, hl = sbm([5, 5, 5], 0.0, 0.5, seed=2)
    ch = delete_intra_label(hetero.copy(), hl, 3, True, np.random.default_rng(0))
    assert ch.achieved == 0 and ch.shortfall_reason


def test_studentdb_no_intra_label_deletions():
    g, lab = real_dataset("studentdb")
    _, log = apply_attack(g, lab, AttackSpec("del_di", 0.2))
    assert log.achieved == 0


# -- rewiring and DICE -----------------------------------------------------


def test_rewire_preserves_edge_count():
    g = random_graph(40, 0.15, np.random.default_rng(1))
    h, log = apply_attack(g, None, AttackSpec("rew_rand", 0.3, seed=2))
    assert h.num_edges == g.num_edges and log.achieved == log.requested
    h.check_invariants()


def test_rewire_path3():
    # endpoints of a 3-path have degree 1, so no edge is eligible for removal:
    # the only legal outcome is the unchanged graph
    outcomes = set()
    for s in range(50):
        h, log = apply_attack(path(3), None, AttackSpec("rew_rand", 0.5, seed=s))
        outcomes.add(frozenset(h.edges))
        assert h.num_edges == 2 and log.shortfall_reason
    assert outcomes == {frozenset(path(3).edges)}


def test_rewire_rollback_when_no_target():
    # in K4 every other node is already a neighbor, so no target exists
    g = complete(4)
    ch = rewire_random(g, 1, True, np.random.default_rng(0))
    assert ch.achieved == 0 and "rolled back" in ch.shortfall_reason and g == complete(4)


def test_dice_split_is_binomial():
    g, lab = sbm([500, 500], 0.1, 0.001, seed=0)
    n = 10_000
    ch = dice(g, lab, n, np.random.default_rng(1), allow_disconnect=True)
    assert ch.achieved == n
    adds = len(ch.added)
    assert abs(adds - n / 2) <= 3 * math.sqrt(n / 4)
    assert all(lab[u] != lab[v] for u, v in ch.added)
    assert all(lab[u] == lab[v] for u, v in ch.removed)


def test_dice_heterophilic_only_adds():
    g, lab = sbm([6, 6, 6], 0.0, 0.4, seed=1)
    h, log = apply_attack(g, lab, AttackSpec("dice", 0.3, seed=2))
    assert log.removed == [] and log.achieved == log.requested


def test_studentdb_dice_only_adds():
    g, lab = real_dataset("studentdb")
    _, log = apply_attack(g, lab, AttackSpec("dice", 0.2))
    assert log.removed == [] and len(log.added) == log.achieved


@pytest.mark.parametrize("strategy", sorted(set(STRATEGIES) - DETERMINISTIC))
def test_nondeterministic_reproducible(strategy):
    g, lab = sbm([15, 15], 0.3, 0.05, seed=8)
    a = apply_attack(g, lab, AttackSpec(strategy, 0.3, seed=42))
    b = apply_attack(g, lab, AttackSpec(strategy, 0.3, seed=42))
    assert a[0] == b[0] and a[1] == b[1]


def test_rank_deletion_never_disconnects():
    rng = np.random.default_rng(5)
    for _ in range(5):
        g = random_graph(40, 0.1, rng)
        c = num_components(g)
        for s in ("del_rand", "del_deg", "del_pa", "del_da", "del_dd", "del_di"):
            h, _ = apply_attack(g, labels_for(g), AttackSpec(s, 0.4, seed=1))
            assert num_components(h) == c, s
        # rewiring may join components through its additions, never split them
        for s in ("rew_rand", "dice"):
            h, _ = apply_attack(g, labels_for(g), AttackSpec(s, 0.4, seed=1))
            assert num_components(h) <= c, s
