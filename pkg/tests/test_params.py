"""Parameter store, Adam optimizer, and checkpoint round trips."""

import numpy as np
import pytest

from graphcorr import autodiff as ad
from graphcorr.autodiff import Tensor
from graphcorr.errors import CompatibilityError, ContractError
from graphcorr.params import (ADAM_BETAS, ADAM_EPS, ParameterStore,
                              load_checkpoint, save_checkpoint)

from oracles import adam_scalar


def test_add_rejects_duplicates():
    store = ParameterStore()
    store.add("w", np.zeros(2))
    with pytest.raises(ContractError, match="registered twice"):
        store.add("w", np.zeros(2))


def test_glorot_bounds_and_determinism():
    limit = np.sqrt(6.0 / (8 + 4))
    a = ParameterStore().glorot("w", (8, 4), np.random.default_rng(5))
    b = ParameterStore().glorot("w", (8, 4), np.random.default_rng(5))
    assert np.abs(a.values).max() <= limit
    np.testing.assert_array_equal(a.values, b.values)


def test_names_sorted_and_trainable_filter():
    store = ParameterStore()
    store.add("b.two", np.zeros(1))
    store.add("a.one", np.zeros(1), trainable=False)
    assert store.names() == ["a.one", "b.two"]
    assert [n for n, _ in store.trainable()] == ["b.two"]


def test_adam_first_step_is_learning_rate_sized():
    store = ParameterStore()
    w = store.add("w", np.array([3.0, -1.0]))
    w.grad = np.array([1.0, 1.0])
    store.adam_step(0.1)
    # bias-corrected first step: lr * g / (|g| + eps) ~= lr
    np.testing.assert_allclose(w.values, [2.9, -1.1], atol=1e-8)


def test_adam_zero_gradient_leaves_parameter_unchanged():
    store = ParameterStore()
    w = store.add("w", np.array([1.5]))
    w.grad = np.zeros(1)
    store.adam_step(0.1)
    assert w.values[0] == 1.5


def test_adam_missing_gradient_is_contract_error():
    store = ParameterStore()
    store.add("w", np.array([1.0]))
    with pytest.raises(ContractError, match="no gradient"):
        store.adam_step(0.1)


def test_adam_matches_scalar_recurrence_on_quadratic():
    # minimize w^2 by gradient 2w; compare the whole trajectory to the oracle
    store = ParameterStore()
    w = store.add("w", np.array([1.7]))
    grads, trajectory = [], []
    for _ in range(200):
        g = 2.0 * w.values[0]
        grads.append(g)
        w.grad = np.array([g])
        store.adam_step(0.05)
        trajectory.append(w.values[0])
        w.grad = None
    want = adam_scalar(1.7, grads, 0.05, ADAM_BETAS, ADAM_EPS)
    np.testing.assert_allclose(trajectory, want, atol=1e-12)
    assert abs(w.values[0]) < 1e-2


def test_zero_grad_resets_accumulation():
    store = ParameterStore()
    w = store.add("w", np.ones(3))
    loss = ad.tensor_sum(ad.multiply(w, w))
    ad.backward(loss)
    assert w.grad is not None
    store.zero_grad()
    assert w.grad is None


def test_state_values_and_load_roundtrip():
    store = ParameterStore()
    rng = np.random.default_rng(11)
    store.glorot("a", (3, 2), rng)
    store.add("b", rng.normal(size=4))
    state = store.state_values()
    state["a"] = state["a"] + 1.0
    store.load_values(state)
    np.testing.assert_array_equal(store["a"].values, state["a"])


def test_load_values_names_all_problems():
    store = ParameterStore()
    store.add("keep", np.zeros((2, 2)))
    store.add("shape", np.zeros(3))
    with pytest.raises(CompatibilityError) as info:
        store.load_values({"keep": np.zeros((2, 2)), "shape": np.zeros(4),
                           "extra": np.zeros(1)})
    message = str(info.value)
    assert "unexpected extra" in message
    assert "shape" in message and "(4,)" in message


def test_checkpoint_roundtrip_is_bitwise(tmp_path):
    store = ParameterStore()
    rng = np.random.default_rng(3)
    store.glorot("embedder.query", (6, 6), rng)
    store.add("lag.filters", rng.normal(size=(5, 2)) * 1e-7)
    store.add("classifier.head1_b", np.array(np.pi))
    path = tmp_path / "ckpt.txt"
    save_checkpoint(store, path)
    loaded = load_checkpoint(path)
    assert sorted(loaded) == store.names()
    for name, t in store.items():
        assert loaded[name].shape == t.values.shape
        np.testing.assert_array_equal(loaded[name], t.values)


def test_checkpoint_accepts_state_dict(tmp_path):
    state = {"w": np.arange(6, dtype=np.float64).reshape(2, 3)}
    path = tmp_path / "ckpt.txt"
    save_checkpoint(state, path)
    np.testing.assert_array_equal(load_checkpoint(path)["w"], state["w"])


def test_checkpoint_bad_record_names_line(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("good 1 2 0.5 0.5\nbroken 2 3 nope\n")
    with pytest.raises(CompatibilityError, match="line 2"):
        load_checkpoint(path)


def test_checkpoint_value_count_mismatch(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("w 1 3 0.5 0.5\n")
    with pytest.raises(CompatibilityError):
        load_checkpoint(path)
