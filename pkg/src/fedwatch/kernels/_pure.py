"""NumPy implementation of the MLP hot kernels.

The compiled twin in ``_fast.pyx`` provides the same three functions with
identical semantics. Both operate on a flat float64 parameter vector laid out
as [W0, b0, W1, b1, ...], each W stored row-major with shape (n_in, n_out).
Hidden layers are ReLU; the output layer is affine (softmax is applied by the
callers that need probabilities).
"""
import numpy as np


def _layer_views(params, sizes):
    views = []
    off = 0
    for nin, nout in zip(sizes[:-1], sizes[1:]):
        w = params[off:off + nin * nout].reshape(nin, nout)
        off += nin * nout
        b = params[off:off + nout]
        off += nout
        views.append((w, b))
    return views


def forward_logits(params, sizes, x):
    """Batch logits, shape (n, sizes[-1])."""
    layers = _layer_views(params, sizes)
    a = x
    for w, b in layers[:-1]:
        a = np.maximum(a @ w + b, 0.0)
    w, b = layers[-1]
    return a @ w + b


def predict_labels(params, sizes, x):
    """Row argmax of the logits; ties resolve to the lowest class index."""
    return np.argmax(forward_logits(params, sizes, x), axis=1).astype(np.int64)


def loss_grad(params, sizes, x, y):
    """Mean cross-entropy over the batch and its flat gradient.

    Uses the log-sum-exp form so the loss stays finite even for wildly
    saturated logits (poisoned parameter vectors reach 1e6-scale weights).
    """
    layers = _layer_views(params, sizes)
    acts = [x]
    a = x
    for w, b in layers[:-1]:
        a = np.maximum(a @ w + b, 0.0)
        acts.append(a)
    w_last, b_last = layers[-1]
    z = a @ w_last + b_last

    n = x.shape[0]
    rows = np.arange(n)
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.sum(np.exp(shifted), axis=1))
    loss = float(np.mean(logsum - shifted[rows, y]))

    delta = np.exp(shifted - logsum[:, None])
    delta[rows, y] -= 1.0
    delta /= n

    grad = np.zeros_like(params)
    grad_views = _layer_views(grad, sizes)
    for i in range(len(layers) - 1, -1, -1):
        gw, gb = grad_views[i]
        gw[:] = acts[i].T @ delta
        gb[:] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ layers[i][0].T
            delta[acts[i] <= 0.0] = 0.0
    return loss, grad
