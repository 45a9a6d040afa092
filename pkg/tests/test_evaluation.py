import json

import numpy as np
import pytest

from conftest import path, random_graph, real_dataset, sbm
from nerobust.attacks import AttackSpec, apply_attack
from nerobust.embed import Embedding, MethodConfig
from nerobust.evaluation import (
    CORRECT,
    TRAIN,
    NCResult,
    export_prediction_status,
    hadamard_pair_features,
    network_reconstruction_eval,
    node_classification_eval,
    prediction_status_from_document,
    sample_node_pairs,
    write_prediction_status,
)
from nerobust.graph import Graph, LabelMap

HOPE = MethodConfig(method="hope", d=32)


def onehot_embedding(labels, n, k):
    x = np.zeros((n, k))
    for v, c in labels.items():
        x[v, c] = 1.0
    return Embedding(x, "oracle")


def test_hadamard_examples():
    emb = np.array([[1.0, 2.0], [3.0, -1.0], [1.0, 1.0]])
    np.testing.assert_array_equal(hadamard_pair_features(emb, [(0, 1)]), [[3.0, -2.0]])
    np.testing.assert_array_equal(hadamard_pair_features(emb, [(0, 2)]), [emb[0]])
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 4))
    pairs = rng.integers(0, 6, (10, 2))
    np.testing.assert_array_equal(hadamard_pair_features(x, pairs), hadamard_pair_features(x, pairs[:, ::-1]))
    with pytest.raises(ValueError):
        hadamard_pair_features(emb, [(0, 3)])


def test_nc_split_sizes_and_partition():
    g, lab = sbm([50, 50], 0.2, 0.02, seed=1)
    res = node_classification_eval(
        g, lab, HOPE, 0.5, shuffles=2, rng=np.random.default_rng(0), embedding=onehot_embedding(lab, 100, 2)
    )
    for r in res:
        assert set(r.status) == set(range(100))
        assert sum(s == TRAIN for s in r.status.values()) == 50
        # one-hot label embedding is a perfect predictor
        assert r.mr == 0.0 and r.f1_micro == 1.0


def test_nc_beats_majority_on_sbm():
    g, lab = sbm([150, 150], 0.2, 0.01, seed=2)
    res = node_classification_eval(g, lab, MethodConfig(method="hope", d=128), 0.5, 3, np.random.default_rng(1))
    assert np.mean([r.f1_micro for r in res]) >= 0.5 + 0.3


def test_nc_rejects_bad_fraction():
    g, lab = sbm([5, 5], 0.5, 0.1)
    with pytest.raises(ValueError):
        node_classification_eval(g, lab, HOPE, 1.0)


def test_sample_node_pairs_all():
    pairs = sample_node_pairs(10, 45, np.random.default_rng(0))
    assert sorted(map(tuple, pairs.tolist())) == [(i, j) for i in range(10) for j in range(i + 1, 10)]


def test_nr_full_pair_set():
    g = random_graph(10, 0.4, np.random.default_rng(1))
    res = network_reconstruction_eval(g, g, MethodConfig(method="netmf", d=8, netmf_window=2), 1.0,
                                      np.random.default_rng(0))
    assert res.metadata["test_pairs"] == 45
    assert 0 <= res.auc <= 1 and 0 <= res.average_precision <= 1


def test_nr_unattacked_sbm_high_auc():
    aucs = []
    for seed in range(3):
        g, _ = sbm([50, 50, 50], 0.2, 0.01, seed=seed)
        res = network_reconstruction_eval(g, g, MethodConfig(method="hope", d=64), 0.05,
                                          np.random.default_rng(seed))
        aucs.append(res.auc)
    assert np.mean(aucs) > 0.9


def test_nr_refuses_empty_attacked():
    g = path(4)
    with pytest.raises(ValueError):
        network_reconstruction_eval(g, Graph(4), HOPE)


def test_nr_exclude_train_pairs():
    g = random_graph(30, 0.3, np.random.default_rng(2))
    h, _ = apply_attack(g, None, AttackSpec("del_rand", 0.5, allow_disconnect=True, seed=0))
    emb = Embedding(np.random.default_rng(0).normal(size=(30, 4)))
    res = network_reconstruction_eval(g, h, HOPE, 0.3, np.random.default_rng(1), embedding=emb,
                                      exclude_train_pairs=True)
    # 0.3 * 435 = 130.5 rounds half up
    assert res.metadata["test_pairs"] == 131


def test_export_all_correct_roundtrip(tmp_path):
    g = Graph(3, [(0, 1), (1, 2)])
    lab = LabelMap({0: 0, 1: 1, 2: 0})
    res = NCResult(1.0, 1.0, {0: CORRECT, 1: CORRECT, 2: CORRECT}, {"method": "hope", "budget": 0.0})
    doc = write_prediction_status(res, g, lab, tmp_path / "s.json")
    assert [n["status"] for n in doc["nodes"]] == ["correct"] * 3 and doc["mr"] == 0.0
    back, g2, lab2 = prediction_status_from_document(json.loads((tmp_path / "s.json").read_text()))
    assert back == res and g2 == g and lab2 == lab


def test_export_mr_consistent_after_dice():
    g, lab = sbm([20, 20, 20], 0.0, 0.3, seed=4)
    h, _ = apply_attack(g, lab, AttackSpec("dice", 0.6, seed=1))
    (res,) = node_classification_eval(h, lab, HOPE, 0.5, 1, np.random.default_rng(2))
    doc = export_prediction_status(res, h, lab)
    assert doc["mr"] == res.mr


def test_studentdb_dice_export():
    g, lab = real_dataset("studentdb")
    h, _ = apply_attack(g, lab, AttackSpec("dice", 0.6, seed=1))
    (res,) = node_classification_eval(h, lab, HOPE, 0.5, 1, np.random.default_rng(2))
    assert export_prediction_status(res, h, lab)["mr"] == res.mr


def test_pipelines_reproducible():
    g, lab = sbm([30, 30], 0.2, 0.02, seed=5)
    cfg = MethodConfig(method="node2vec", d=16, num_walks=3, walk_length=10, epochs=1, seed=3)
    a = node_classification_eval(g, lab, cfg, 0.5, 2, np.random.default_rng(9))
    b = node_classification_eval(g, lab, cfg, 0.5, 2, np.random.default_rng(9))
    assert [(r.f1_micro, r.f1_macro, r.status) for r in a] == [(r.f1_micro, r.f1_macro, r.status) for r in b]
    x = network_reconstruction_eval(g, g, cfg, 0.2, np.random.default_rng(1))
    y = network_reconstruction_eval(g, g, cfg, 0.2, np.random.default_rng(1))
    assert (x.auc, x.average_precision) == (y.auc, y.average_precision)
