"""Gradient checks for every autodiff primitive against central differences."""

import numpy as np
import pytest

from graphcorr import autodiff as ad
from graphcorr.autodiff import Tensor
from graphcorr.errors import (ConfigurationError, ContractError,
                              ShapeMismatchError)

from oracles import finite_diff, max_rel_err

TOL = 1e-5


def check_grads(build, arrays, tol=TOL, floor=1e-6):
    """Compare backward() gradients of a scalar-valued builder against FD."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    loss = build(*tensors)
    ad.backward(loss)
    for idx, a in enumerate(arrays):
        def f(x, idx=idx):
            vals = [Tensor(v) for v in arrays]
            vals[idx] = Tensor(x)
            with ad.no_grad():
                return build(*vals).item()
        fd = finite_diff(f, np.array(a, dtype=np.float64))
        err = max_rel_err(tensors[idx].grad, fd, floor)
        assert err < tol, f"input {idx}: max relative error {err}"


def weighted_sum(t, w):
    return ad.tensor_sum(ad.multiply(t, Tensor(w)))


def test_add_gradients(rng):
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(3, 4))
    w = rng.normal(size=(3, 4))
    check_grads(lambda x, y: weighted_sum(ad.add(x, y), w), [a, b])


def test_add_scalar_broadcast(rng):
    a = rng.normal(size=(3, 4))
    s = np.array(0.7)
    w = rng.normal(size=(3, 4))
    check_grads(lambda x, y: weighted_sum(ad.add(x, y), w), [a, s])


def test_add_shape_mismatch_names_shapes():
    with pytest.raises(ShapeMismatchError, match=r"\(2, 2\).*\(3, 2\)"):
        ad.add(Tensor(np.zeros((2, 2))), Tensor(np.zeros((3, 2))))


def test_multiply_and_scale(rng):
    a = rng.normal(size=(4, 3))
    b = rng.normal(size=(4, 3))
    w = rng.normal(size=(4, 3))
    check_grads(lambda x, y: weighted_sum(ad.multiply(x, y), w), [a, b])
    check_grads(lambda x: weighted_sum(ad.scale(x, -1.7), w), [a])


def test_matmul_2d(rng):
    a = rng.normal(size=(3, 5))
    b = rng.normal(size=(5, 4))
    w = rng.normal(size=(3, 4))
    check_grads(lambda x, y: weighted_sum(ad.matmul(x, y), w), [a, b])


def test_matmul_batched_broadcast(rng):
    # (W, R, R) @ (R, D): the second operand's gradient sums over the batch
    a = rng.normal(size=(4, 3, 3))
    b = rng.normal(size=(3, 2))
    w = rng.normal(size=(4, 3, 2))
    check_grads(lambda x, y: weighted_sum(ad.matmul(x, y), w), [a, b])


def test_transpose_reshape_concat_narrow(rng):
    a = rng.normal(size=(2, 3, 4))
    b = rng.normal(size=(2, 5))
    w1 = rng.normal(size=(4, 2, 3))
    check_grads(lambda x: weighted_sum(ad.transpose(x, (2, 0, 1)), w1), [a])
    w2 = rng.normal(size=(12, 2))
    check_grads(lambda x: weighted_sum(ad.reshape(x, (12, 2)), w2), [a])
    c = rng.normal(size=(2, 3))
    d = rng.normal(size=(2, 4))
    w3 = rng.normal(size=(2, 7))
    check_grads(lambda x, y: weighted_sum(ad.concat([x, y], axis=1), w3), [c, d])
    w4 = rng.normal(size=(2, 2))
    check_grads(lambda x: weighted_sum(ad.narrow(x, 1, 1, 2), w4), [b])


def test_sum_mean_axes(rng):
    a = rng.normal(size=(3, 4, 2))
    w = rng.normal(size=(3, 2))
    check_grads(lambda x: weighted_sum(ad.tensor_sum(x, axis=1), w), [a])
    check_grads(lambda x: weighted_sum(ad.mean(x, axis=1), w), [a])
    check_grads(lambda x: ad.mean(x), [a])


def test_max_over_gradient_and_tie_routing(rng):
    a = rng.normal(size=(5, 3))
    w = rng.normal(size=(3,))
    check_grads(lambda x: weighted_sum(ad.max_over(x, axis=0), w), [a])
    # a tie routes the full gradient to the first maximal entry
    tied = Tensor(np.array([[2.0, 0.0], [2.0, 1.0]]), requires_grad=True)
    out = ad.tensor_sum(ad.max_over(tied, axis=0))
    ad.backward(out)
    assert np.array_equal(tied.grad, np.array([[1.0, 0.0], [0.0, 1.0]]))


def test_softmax_rows_sum_to_one(rng):
    a = rng.normal(size=(6, 9)) * 30.0  # large logits: stability check
    s = ad.softmax(Tensor(a))
    np.testing.assert_allclose(s.values.sum(axis=-1), np.ones(6), atol=1e-12)
    assert s.values.min() >= 0.0


def test_softmax_gradient(rng):
    a = rng.normal(size=(4, 5))
    w = rng.normal(size=(4, 5))
    check_grads(lambda x: weighted_sum(ad.softmax(x), w), [a])


def test_gelu_matches_exact_definition(rng):
    from scipy.special import erf
    x = rng.normal(size=(7,)) * 2.0
    got = ad.gelu(Tensor(x)).values
    want = x * 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    np.testing.assert_allclose(got, want, atol=1e-15)


def test_gelu_relu_gradients(rng):
    a = rng.normal(size=(3, 6))
    w = rng.normal(size=(3, 6))
    check_grads(lambda x: weighted_sum(ad.gelu(x), w), [a])
    b = rng.normal(size=(3, 6)) + 0.05  # keep away from the ReLU kink
    check_grads(lambda x: weighted_sum(ad.relu(x), w), [b])


def test_layer_norm_statistics(rng):
    a = rng.normal(size=(5, 16)) * 40.0 + 7.0  # variance >> eps
    out = ad.layer_norm(Tensor(a), Tensor(np.ones(16)), Tensor(np.zeros(16)))
    mu = out.values.mean(axis=-1)
    var = out.values.var(axis=-1)
    assert np.abs(mu).max() < 1e-10
    # unit variance up to the regularizer: |var - 1| ~= eps / row variance
    assert np.abs(var - 1.0).max() < 2.0 * 1e-5 / a.var(axis=-1).min()


def test_layer_norm_gradients(rng):
    a = rng.normal(size=(4, 6))
    gain = rng.normal(size=(6,)) + 1.0
    shift = rng.normal(size=(6,))
    w = rng.normal(size=(4, 6))
    check_grads(lambda x, g, s: weighted_sum(ad.layer_norm(x, g, s), w),
                [a, gain, shift])


def test_dropout_identity_and_mask(rng):
    a = Tensor(rng.normal(size=(50, 40)), requires_grad=True)
    assert ad.dropout(a, 0.5, None, training=False) is a
    assert ad.dropout(a, 0.0, rng, training=True) is a
    out = ad.dropout(a, 0.5, np.random.default_rng(0), training=True)
    dropped = out.values == 0.0
    kept = ~dropped
    assert 0.3 < dropped.mean() < 0.7
    np.testing.assert_allclose(out.values[kept], a.values[kept] * 2.0, atol=1e-12)
    ad.backward(ad.tensor_sum(out))
    np.testing.assert_allclose(a.grad[kept], 2.0)
    np.testing.assert_allclose(a.grad[dropped], 0.0)


def test_dropout_contract_errors(rng):
    a = Tensor(np.zeros((2, 2)))
    with pytest.raises(ConfigurationError):
        ad.dropout(a, 1.0, rng, training=True)
    with pytest.raises(ConfigurationError):
        ad.dropout(a, -0.1, rng, training=True)
    with pytest.raises(ContractError):
        ad.dropout(a, 0.5, None, training=True)


def test_row_outer_values_and_gradients(rng):
    a = rng.normal(size=(2, 4, 3))
    b = rng.normal(size=(2, 4, 2))
    out = ad.row_outer(Tensor(a), Tensor(b))
    assert out.shape == (2, 4, 6)
    # entry [n, d*K + k] = a[n, d] * b[n, k]
    assert out.values[1, 2, 2 * 2 + 1] == a[1, 2, 2] * b[1, 2, 1]
    w = rng.normal(size=(2, 4, 6))
    check_grads(lambda x, y: weighted_sum(ad.row_outer(x, y), w), [a, b])


def test_scatter_add_rows_matches_loop(rng):
    vals = rng.normal(size=(6, 3))
    index = np.array([2, 0, 2, 1, 0, 2])
    out = ad.scatter_add_rows(Tensor(vals), index, 4)
    want = np.zeros((4, 3))
    for k, i in enumerate(index):
        want[i] += vals[k]
    np.testing.assert_array_equal(out.values, want)  # bitwise
    w = rng.normal(size=(4, 3))
    check_grads(lambda x: weighted_sum(ad.scatter_add_rows(x, index, 4), w), [vals])
    with pytest.raises(ContractError):
        ad.scatter_add_rows(Tensor(vals), np.array([0, 1, 2, 3, 4, 9]), 4)


def test_cross_entropy_value_and_gradient(rng):
    logits = rng.normal(size=(4,))
    t = Tensor(logits, requires_grad=True)
    loss = ad.cross_entropy_with_logits(t, 2)
    z = logits - logits.max()
    want = np.log(np.exp(z).sum()) - z[2]
    assert abs(loss.item() - want) < 1e-12
    ad.backward(loss)
    p = np.exp(z) / np.exp(z).sum()
    p[2] -= 1.0
    np.testing.assert_allclose(t.grad, p, atol=1e-12)
    with pytest.raises(ContractError):
        ad.cross_entropy_with_logits(Tensor(logits), 4)


def test_uniform_logits_give_log2():
    loss = ad.cross_entropy_with_logits(Tensor(np.zeros(2)), 0)
    assert abs(loss.item() - np.log(2.0)) < 1e-15


def test_backward_requires_scalar_and_recorded_graph():
    t = Tensor(np.zeros((2, 2)), requires_grad=True)
    out = ad.scale(t, 2.0)
    with pytest.raises(ContractError):
        ad.backward(out)
    with pytest.raises(ContractError):
        ad.backward(Tensor(np.asarray(3.0)))


def test_backward_accumulates_and_is_deterministic(rng):
    a = rng.normal(size=(3, 3))
    t = Tensor(a, requires_grad=True)
    loss = ad.tensor_sum(ad.multiply(t, t))
    ad.backward(loss)
    first = t.grad.copy()
    ad.backward(loss)  # accumulates a second, bitwise-identical pass
    np.testing.assert_array_equal(t.grad, 2.0 * first)


def test_backward_batch_seed_averages(rng):
    # seeding each loss with 1/B matches the gradient of the mean loss
    a = rng.normal(size=(4,))
    t = Tensor(a, requires_grad=True)
    losses = [ad.tensor_sum(ad.scale(ad.multiply(t, t), 0.5 + i)) for i in range(3)]
    for loss in losses:
        ad.backward(loss, grad=1.0 / 3.0)
    want = sum((0.5 + i) * 2.0 * a for i in range(3)) / 3.0
    np.testing.assert_allclose(t.grad, want, atol=1e-12)


def test_no_grad_blocks_recording():
    t = Tensor(np.ones(3), requires_grad=True)
    with ad.no_grad():
        out = ad.tensor_sum(ad.multiply(t, t))
    with pytest.raises(ContractError):
        ad.backward(out)


def test_operator_sugar(rng):
    a = rng.normal(size=(2, 2))
    b = rng.normal(size=(2, 2))
    x, y = Tensor(a), Tensor(b)
    np.testing.assert_allclose((x + y).values, a + b)
    np.testing.assert_allclose((x - y).values, a - b)
    np.testing.assert_allclose((x * y).values, a * b)
    np.testing.assert_allclose((x / 2.0).values, a / 2.0)
    np.testing.assert_allclose((-x).values, -a)
    np.testing.assert_allclose((x @ y).values, a @ b)
