"""Flat-parameter MLP classifier: the local learner every worker runs.

Parameters live in a single 1-D float64 vector so model copies, updates and
aggregation are plain vector arithmetic. All functions are pure given their
inputs; randomness enters only through explicit seeds.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .rng import substream


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class MlpArchitecture:
    """Layer widths (input, hidden..., output); ReLU hidden, softmax output."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ModelError("architecture needs at least input and output layers")
        if any(s < 1 for s in sizes):
            raise ModelError(f"layer sizes must be positive, got {sizes}")

    @property
    def param_count(self) -> int:
        return sum(
            nin * nout + nout
            for nin, nout in zip(self.layer_sizes[:-1], self.layer_sizes[1:])
        )

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    def sizes_array(self) -> np.ndarray:
        return np.asarray(self.layer_sizes, dtype=np.intp)


@dataclass(frozen=True)
class TrainSpec:
    """Local SGD settings: epochs, mini-batch size, learning rate."""

    epochs: int = 1
    batch_size: int = 32
    learning_rate: float = 0.1

    def __post_init__(self):
        if self.epochs < 0:
            raise ModelError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ModelError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ModelError("learning_rate must be >= 0")


def init_params(arch: MlpArchitecture, seed: int) -> np.ndarray:
    """Uniform Xavier-style weights in +-sqrt(6/(n_in+n_out)), zero biases."""
    rng = substream(seed, "init")
    chunks = []
    for nin, nout in zip(arch.layer_sizes[:-1], arch.layer_sizes[1:]):
        bound = np.sqrt(6.0 / (nin + nout))
        chunks.append(rng.uniform(-bound, bound, nin * nout))
        chunks.append(np.zeros(nout))
    return np.concatenate(chunks)


def _check_params(arch: MlpArchitecture, params: np.ndarray) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    if params.ndim != 1 or params.shape[0] != arch.param_count:
        raise ModelError(
            f"parameter vector has length {params.shape}, expected {arch.param_count}"
        )
    return params


def forward(arch: MlpArchitecture, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one input vector or a batch of rows."""
    params = _check_params(arch, params)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != arch.n_inputs:
        raise ModelError(f"input width {x.shape[1]} != {arch.n_inputs}")
    z = kernels.forward_logits(params, arch.sizes_array(), x)
    z = z - z.max(axis=1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=1, keepdims=True)
    return p[0] if single else p


def loss_and_grad(arch, params, features, labels):
    """Mean cross-entropy over the batch and its gradient (flat, length d)."""
    params = _check_params(arch, params)
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim == 1:
        features = features[None, :]
        labels = labels.reshape(1)
    if features.shape[0] == 0:
        raise ModelError("batch must be non-empty")
    if labels.min() < 0 or labels.max() >= arch.n_classes:
        raise ModelError(
            f"labels out of range [0, {arch.n_classes}): "
            f"[{labels.min()}, {labels.max()}]"
        )
    return kernels.loss_grad(params, arch.sizes_array(), features, labels)


def sgd_train(arch, start, data, spec: TrainSpec, rng_seed: int) -> np.ndarray:
    """Shuffled mini-batch SGD for ``spec.epochs`` epochs; returns new weights.

    Deterministic in (arch, start, data, spec, rng_seed).
    """
    start = _check_params(arch, start)
    n = len(data)
    if n == 0:
        raise ModelError("training dataset is empty")
    if spec.batch_size > n:
        raise ModelError(f"batch_size {spec.batch_size} exceeds dataset size {n}")
    params = start.copy()
    sizes = arch.sizes_array()
    features = np.ascontiguousarray(data.features, dtype=np.float64)
    labels = np.ascontiguousarray(data.labels, dtype=np.int64)
    lr = spec.learning_rate
    for epoch in range(spec.epochs):
        order = substream(rng_seed, "epoch", epoch).permutation(n)
        for lo in range(0, n, spec.batch_size):
            idx = order[lo:lo + spec.batch_size]
            _, grad = kernels.loss_grad(params, sizes, features[idx], labels[idx])
            params -= lr * grad
    return params


def evaluate(arch, params, data) -> tuple[float, float]:
    """(accuracy, error_rate) on a dataset; argmax ties go to the lowest class."""
    params = _check_params(arch, params)
    n = len(data)
    if n == 0:
        raise ModelError("evaluation dataset is empty")
    pred = kernels.predict_labels(params, arch.sizes_array(), data.features)
    accuracy = float(np.count_nonzero(pred == data.labels) / n)
    return accuracy, 1.0 - accuracy
