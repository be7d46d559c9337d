import math

import numpy as np
import pytest

from fedwatch.data import Dataset, gen_blobs
from fedwatch.model import (
    MlpArchitecture,
    ModelError,
    TrainSpec,
    evaluate,
    forward,
    init_params,
    loss_and_grad,
    sgd_train,
)


def test_param_count_arithmetic():
    # 785*30 + 31*10, weights plus biases per layer pair
    assert MlpArchitecture((784, 30, 10)).param_count == 785 * 30 + 31 * 10 == 23860
    assert MlpArchitecture((1, 1)).param_count == 2
    assert MlpArchitecture((2, 2)).param_count == 6


def test_invalid_architecture_rejected():
    with pytest.raises(ModelError):
        MlpArchitecture((5,))
    with pytest.raises(ModelError):
        MlpArchitecture((4, 0, 2))


def test_init_is_deterministic_and_biases_zero():
    arch = MlpArchitecture((2, 2))
    a = init_params(arch, 7)
    b = init_params(arch, 7)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, init_params(arch, 8))

    tiny = MlpArchitecture((1, 1))
    params = init_params(tiny, 3)
    assert params.shape == (2,)
    assert params[1] == 0.0  # bias entry

    bound = math.sqrt(6.0 / (2 + 2))
    weights = init_params(arch, 11)[:4]
    assert (np.abs(weights) <= bound).all()


def test_forward_uniform_for_zero_params():
    arch = MlpArchitecture((6, 4, 10))
    params = np.zeros(arch.param_count)
    p = forward(arch, params, np.ones(6))
    np.testing.assert_allclose(p, np.full(10, 0.1), atol=1e-12)


def test_forward_normalized_on_random_inputs():
    rng = np.random.default_rng(0)
    arch = MlpArchitecture((5, 7, 3))
    params = init_params(arch, 1) + rng.normal(0, 0.5, arch.param_count)
    x = rng.normal(0, 1, (100, 5))
    probs = forward(arch, params, x)
    assert probs.shape == (100, 3)
    assert (probs > 0).all() and (probs < 1).all()
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_forward_dimension_mismatch():
    arch = MlpArchitecture((5, 3))
    with pytest.raises(ModelError):
        forward(arch, np.zeros(arch.param_count), np.zeros(4))


def test_scaling_output_layer_preserves_argmax():
    rng = np.random.default_rng(5)
    arch = MlpArchitecture((4, 6, 3))
    params = init_params(arch, 2) + rng.normal(0, 0.3, arch.param_count)
    x = rng.normal(0, 1, (50, 4))
    base = np.argmax(forward(arch, params, x), axis=1)
    scaled = params.copy()
    scaled[4 * 6 + 6:] *= 3.5  # output-layer weights and biases
    assert np.array_equal(np.argmax(forward(arch, scaled, x), axis=1), base)


def test_loss_at_zero_params_is_log_c():
    arch = MlpArchitecture((3, 10))
    loss, grad = loss_and_grad(arch, np.zeros(arch.param_count),
                               np.array([[0.3, -1.0, 2.0]]), np.array([4]))
    assert abs(loss - math.log(10)) < 1e-12
    assert grad.shape == (arch.param_count,)


def test_loss_invariant_under_batch_duplication():
    rng = np.random.default_rng(9)
    arch = MlpArchitecture((4, 5, 3))
    params = init_params(arch, 0) + rng.normal(0, 0.4, arch.param_count)
    x = rng.normal(0, 1, (6, 4))
    y = rng.integers(0, 3, 6)
    l1, g1 = loss_and_grad(arch, params, x, y)
    l2, g2 = loss_and_grad(arch, params, np.vstack([x, x]), np.concatenate([y, y]))
    assert abs(l1 - l2) < 1e-12
    np.testing.assert_allclose(g1, g2, atol=1e-12)


def test_label_out_of_range_rejected():
    arch = MlpArchitecture((3, 2))
    with pytest.raises(ModelError):
        loss_and_grad(arch, np.zeros(arch.param_count),
                      np.zeros((1, 3)), np.array([2]))


def _fd_gradient(arch, params, x, y, h=1e-5):
    grad = np.zeros_like(params)
    for i in range(params.size):
        up = params.copy()
        up[i] += h
        down = params.copy()
        down[i] -= h
        lu, _ = loss_and_grad(arch, up, x, y)
        ld, _ = loss_and_grad(arch, down, x, y)
        grad[i] = (lu - ld) / (2 * h)
    return grad


@pytest.mark.parametrize("sizes", [(4, 3, 2), (5, 8, 3)])
def test_gradient_matches_finite_differences(sizes):
    rng = np.random.default_rng(sum(sizes))
    arch = MlpArchitecture(sizes)
    for _ in range(3):
        params = rng.normal(0, 0.7, arch.param_count)
        x = rng.normal(0, 1, (5, sizes[0]))
        y = rng.integers(0, sizes[-1], 5)
        _, analytic = loss_and_grad(arch, params, x, y)
        fd = _fd_gradient(arch, params, x, y)
        denom = np.maximum(1e-3, np.maximum(np.abs(analytic), np.abs(fd)))
        assert (np.abs(analytic - fd) / denom).max() < 1e-4


def _blob_2class(seed):
    return gen_blobs(class_count=2, dim=4, per_class=25, spread=0.3, seed=seed)


def test_sgd_zero_lr_and_zero_epochs_are_identity(tiny_dataset):
    arch = MlpArchitecture((5, 4, 3))
    start = init_params(arch, 0)
    out = sgd_train(arch, start, tiny_dataset,
                    TrainSpec(epochs=2, batch_size=8, learning_rate=0.0), 1)
    assert np.array_equal(out, start)
    out = sgd_train(arch, start, tiny_dataset,
                    TrainSpec(epochs=0, batch_size=8, learning_rate=0.1), 1)
    assert np.array_equal(out, start)


def test_sgd_reduces_training_error_majority_of_seeds():
    improved = 0
    for seed in range(10):
        data = _blob_2class(seed)
        arch = MlpArchitecture((4, 6, 2))
        start = init_params(arch, seed)
        spec = TrainSpec(epochs=5, batch_size=10, learning_rate=0.1)
        trained = sgd_train(arch, start, data, spec, seed)
        _, err_before = evaluate(arch, start, data)
        _, err_after = evaluate(arch, trained, data)
        improved += err_after < err_before
    assert improved >= 6


def test_sgd_deterministic_in_seed(tiny_dataset):
    arch = MlpArchitecture((5, 4, 3))
    start = init_params(arch, 0)
    spec = TrainSpec(epochs=2, batch_size=7, learning_rate=0.05)
    a = sgd_train(arch, start, tiny_dataset, spec, 123)
    b = sgd_train(arch, start, tiny_dataset, spec, 123)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sgd_train(arch, start, tiny_dataset, spec, 124))


def test_sgd_batch_larger_than_data_rejected(tiny_dataset):
    arch = MlpArchitecture((5, 3))
    with pytest.raises(ModelError):
        sgd_train(arch, init_params(arch, 0), tiny_dataset,
                  TrainSpec(batch_size=64), 0)


def test_evaluate_perfect_and_zero_params():
    # all labels equal the model argmax -> accuracy 1
    arch = MlpArchitecture((2, 3))
    params = np.zeros(arch.param_count)
    params[0] = 1.0  # weight feature0 toward class 0
    x = np.array([[1.0, 0.0]] * 8)
    data = Dataset(x, np.zeros(8, dtype=np.int64), 3)
    acc, err = evaluate(arch, params, data)
    assert acc == 1.0 and err == 0.0

    # all-zero params on a balanced set: ties break to class 0
    rng = np.random.default_rng(0)
    features = rng.normal(0, 1, (100, 6))
    labels = np.repeat(np.arange(10), 10).astype(np.int64)
    balanced = Dataset(features, labels, 10)
    arch10 = MlpArchitecture((6, 10))
    acc, err = evaluate(arch10, np.zeros(arch10.param_count), balanced)
    assert acc == 0.1  # exactly the class-0 share
    assert acc + err == 1.0


def test_evaluate_is_pure(tiny_dataset):
    arch = MlpArchitecture((5, 4, 3))
    params = init_params(arch, 4)
    assert evaluate(arch, params, tiny_dataset) == evaluate(arch, params, tiny_dataset)


def test_accuracy_error_sum_to_one_across_sizes():
    rng = np.random.default_rng(2)
    arch = MlpArchitecture((3, 4))
    params = init_params(arch, 1) + rng.normal(0, 1, arch.param_count)
    for n in (1, 3, 7, 33, 100):
        data = Dataset(rng.normal(0, 1, (n, 3)),
                       rng.integers(0, 4, n).astype(np.int64), 4)
        acc, err = evaluate(arch, params, data)
        assert acc + err == 1.0
