"""Graph classifier layers, pooling, and the affine head."""

import numpy as np
import pytest

from graphcorr import autodiff as ad
from graphcorr.autodiff import Tensor
from graphcorr.errors import ConfigurationError
from graphcorr.models import (ClassifierConfig, ClassifierParams, classify,
                              cross_entropy, gcn_norm_adjacency,
                              neighbor_mean_matrix)
from graphcorr.params import ParameterStore
from graphcorr.signals import GraphTopology

from oracles import finite_diff, max_rel_err


def triangle():
    return GraphTopology(3, [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)])


def path3():
    return GraphTopology(3, [(0, 1), (1, 0), (1, 2), (2, 1)])


def make(cfg, in_width, rng):
    store = ParameterStore()
    params = ClassifierParams(store, cfg, in_width, rng)
    return store, params


def test_gcn_norm_adjacency_path_graph():
    # degrees with self loops on a 3-node path are [2, 3, 2]
    a_hat = gcn_norm_adjacency(path3())
    want = np.array([
        [1 / 2, 1 / np.sqrt(6), 0.0],
        [1 / np.sqrt(6), 1 / 3, 1 / np.sqrt(6)],
        [0.0, 1 / np.sqrt(6), 1 / 2],
    ])
    np.testing.assert_allclose(a_hat, want, atol=1e-15)


def test_neighbor_mean_matrix_rows():
    topo = GraphTopology(4, [(0, 1), (0, 2), (1, 0), (2, 0)])
    m = neighbor_mean_matrix(topo)
    np.testing.assert_array_equal(m[0], [0.0, 0.5, 0.5, 0.0])
    np.testing.assert_array_equal(m[1], [1.0, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(m[3], np.zeros(4))  # isolated


def test_zero_weights_give_bias_logits(rng):
    cfg = ClassifierConfig(kind="gcn", hidden_dim=4)
    store, params = make(cfg, 3, rng)
    for name in ("classifier.conv1", "classifier.conv2", "classifier.head1_w"):
        store[name].values[:] = 0.0
    store["classifier.head1_b"].values[:] = [0.25, -1.5]
    logits, pred = classify(Tensor(rng.normal(size=(3, 3))), triangle(), cfg, params)
    np.testing.assert_array_equal(logits.values, [0.25, -1.5])
    assert pred == 0
    loss = cross_entropy(logits, 1)
    want = -(-1.5 - np.log(np.exp(0.25) + np.exp(-1.5)))
    assert abs(loss.item() - want) < 1e-14


def test_gcn_layer_matches_dense_loop(rng):
    cfg = ClassifierConfig(kind="gcn", hidden_dim=5, dropout=0.0)
    store, params = make(cfg, 4, rng)
    x = rng.normal(size=(3, 4))
    topo = path3()
    logits, _ = classify(Tensor(x), topo, cfg, params)

    a_hat = gcn_norm_adjacency(topo)
    w1 = store["classifier.conv1"].values
    w2 = store["classifier.conv2"].values
    h = np.maximum(a_hat @ x @ w1, 0.0)
    h = a_hat @ h @ w2
    z = h.mean(axis=0) @ store["classifier.head1_w"].values
    z = z + store["classifier.head1_b"].values
    assert max_rel_err(logits.values, z) < 1e-12


def test_sage_layer_concatenates_self_and_neighbor_mean(rng):
    cfg = ClassifierConfig(kind="sage", hidden_dim=5, dropout=0.0)
    store, params = make(cfg, 4, rng)
    assert store["classifier.conv1"].shape == (8, 5)
    x = rng.normal(size=(3, 4))
    topo = path3()
    logits, _ = classify(Tensor(x), topo, cfg, params)

    m = neighbor_mean_matrix(topo)
    w1 = store["classifier.conv1"].values
    w2 = store["classifier.conv2"].values
    h = np.maximum(np.concatenate([x, m @ x], axis=1) @ w1, 0.0)
    h = np.concatenate([h, m @ h], axis=1) @ w2
    z = h.mean(axis=0) @ store["classifier.head1_w"].values
    z = z + store["classifier.head1_b"].values
    assert max_rel_err(logits.values, z) < 1e-12


def test_max_pooling_differs_from_mean(rng):
    # the triangle's normalized adjacency is uniform, which would equalize the
    # node rows and hide the pooling choice; the path graph keeps them distinct
    x = rng.normal(size=(3, 4))
    cfg_mean = ClassifierConfig(kind="gcn", hidden_dim=6, pool="mean")
    cfg_max = ClassifierConfig(kind="gcn", hidden_dim=6, pool="max")
    store, params = make(cfg_mean, 4, rng)
    a, _ = classify(Tensor(x), path3(), cfg_mean, params)
    b, _ = classify(Tensor(x), path3(), cfg_max, params)
    assert np.abs(a.values - b.values).max() > 1e-8


def test_two_layer_head(rng):
    cfg = ClassifierConfig(kind="gcn", hidden_dim=4, head_layers=2, dropout=0.0)
    store, params = make(cfg, 3, rng)
    assert store["classifier.head1_w"].shape == (4, 4)
    assert store["classifier.head2_w"].shape == (4, 2)
    x = rng.normal(size=(3, 3))
    topo = triangle()
    logits, _ = classify(Tensor(x), topo, cfg, params)

    a_hat = gcn_norm_adjacency(topo)
    w1 = store["classifier.conv1"].values
    w2 = store["classifier.conv2"].values
    h = a_hat @ np.maximum(a_hat @ x @ w1, 0.0) @ w2
    z = h.mean(axis=0)
    z = np.maximum(z @ store["classifier.head1_w"].values
                   + store["classifier.head1_b"].values, 0.0)
    z = z @ store["classifier.head2_w"].values \
        + store["classifier.head2_b"].values
    assert max_rel_err(logits.values, z) < 1e-12


def test_eval_forward_is_deterministic_despite_dropout(rng):
    cfg = ClassifierConfig(kind="sage", hidden_dim=8, dropout=0.5)
    _, params = make(cfg, 4, rng)
    x = rng.normal(size=(3, 4))
    a, _ = classify(Tensor(x), triangle(), cfg, params)
    b, _ = classify(Tensor(x), triangle(), cfg, params)
    np.testing.assert_array_equal(a.values, b.values)


def test_training_dropout_perturbs_logits(rng):
    cfg = ClassifierConfig(kind="gcn", hidden_dim=16, dropout=0.5)
    _, params = make(cfg, 4, rng)
    x = rng.normal(size=(3, 4))
    base, _ = classify(Tensor(x), triangle(), cfg, params)
    noisy, _ = classify(Tensor(x), triangle(), cfg, params, training=True,
                        dropout_rng=np.random.default_rng(0))
    assert np.abs(base.values - noisy.values).max() > 1e-8


def test_loss_gradients_reach_every_parameter(rng):
    cfg = ClassifierConfig(kind="sage", hidden_dim=3, dropout=0.0, head_layers=2)
    store, params = make(cfg, 2, rng)
    x = rng.normal(size=(3, 2))
    topo = path3()

    logits, _ = classify(Tensor(x), topo, cfg, params, training=True,
                         dropout_rng=np.random.default_rng(1))
    ad.backward(cross_entropy(logits, 1))

    for name in store.names():
        tensor = store[name]
        grad = tensor.grad.copy()

        def f(values):
            keep = tensor.values
            tensor.values = values
            try:
                with ad.no_grad():
                    lg, _ = classify(Tensor(x), topo, cfg, params)
                    return cross_entropy(lg, 1).item()
            finally:
                tensor.values = keep

        assert max_rel_err(grad, finite_diff(f, tensor.values.copy())) < 1e-5, name


def test_width_and_shape_validation(rng):
    cfg = ClassifierConfig(kind="gcn", hidden_dim=4)
    _, params = make(cfg, 3, rng)
    with pytest.raises(ConfigurationError, match="expected width"):
        classify(Tensor(np.zeros((3, 5))), triangle(), cfg, params)
    with pytest.raises(ConfigurationError, match="graph nodes"):
        classify(Tensor(np.zeros((4, 3))), triangle(), cfg, params)


def test_config_validation(rng):
    with pytest.raises(ConfigurationError, match="kind"):
        ClassifierConfig(kind="gat").validate()
    with pytest.raises(ConfigurationError, match="hidden_dim"):
        ClassifierConfig(hidden_dim=0).validate()
    with pytest.raises(ConfigurationError, match="dropout"):
        ClassifierConfig(dropout=1.0).validate()
    with pytest.raises(ConfigurationError, match="pool"):
        ClassifierConfig(pool="sum").validate()
    with pytest.raises(ConfigurationError, match="head_layers"):
        ClassifierConfig(head_layers=0).validate()
    with pytest.raises(ConfigurationError, match="num_classes"):
        ClassifierConfig(num_classes=1).validate()
