# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_pure``: identical MLP kernel semantics, C loops.

Same flat parameter layout ([W0, b0, W1, b1, ...], W row-major) and the same
log-sum-exp loss formulation; results agree with the NumPy backend up to
floating-point summation order.
"""
from libc.math cimport exp, log

import numpy as np


cdef void _affine(const double[::1] params, Py_ssize_t off,
                  const double[:, ::1] inp, double[:, ::1] out,
                  Py_ssize_t nin, Py_ssize_t nout, bint relu) noexcept:
    cdef Py_ssize_t n = inp.shape[0]
    cdef Py_ssize_t boff = off + nin * nout
    cdef Py_ssize_t i, j, k
    cdef double aik
    for i in range(n):
        for j in range(nout):
            out[i, j] = params[boff + j]
        for k in range(nin):
            aik = inp[i, k]
            if aik != 0.0:
                for j in range(nout):
                    out[i, j] += aik * params[off + k * nout + j]
        if relu:
            for j in range(nout):
                if out[i, j] < 0.0:
                    out[i, j] = 0.0


cdef list _forward(const double[::1] params, const Py_ssize_t[::1] sizes,
                   object x):
    """Activation list [x, h1, ..., logits]; hidden layers ReLU-clamped."""
    cdef Py_ssize_t n_layers = sizes.shape[0] - 1
    cdef Py_ssize_t off = 0, layer, nin, nout
    acts = [x]
    cur = x
    for layer in range(n_layers):
        nin = sizes[layer]
        nout = sizes[layer + 1]
        nxt = np.empty((cur.shape[0], nout), dtype=np.float64)
        _affine(params, off, cur, nxt, nin, nout, layer < n_layers - 1)
        acts.append(nxt)
        cur = nxt
        off += nin * nout + nout
    return acts


def forward_logits(const double[::1] params, const Py_ssize_t[::1] sizes,
                   object x):
    acts = _forward(params, sizes, np.ascontiguousarray(x))
    return acts[len(acts) - 1]


def predict_labels(const double[::1] params, const Py_ssize_t[::1] sizes,
                   object x):
    acts = _forward(params, sizes, np.ascontiguousarray(x))
    cdef double[:, ::1] z = acts[len(acts) - 1]
    cdef Py_ssize_t n = z.shape[0], c = z.shape[1]
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] o = out
    cdef Py_ssize_t i, j, best
    for i in range(n):
        best = 0
        for j in range(1, c):
            if z[i, j] > z[i, best]:
                best = j
        o[i] = best
    return out


def loss_grad(const double[::1] params, const Py_ssize_t[::1] sizes,
              object x, const long long[::1] y):
    x = np.ascontiguousarray(x)
    acts = _forward(params, sizes, x)
    cdef double[:, ::1] z = acts[len(acts) - 1]
    cdef Py_ssize_t n = z.shape[0], c = z.shape[1]
    cdef Py_ssize_t n_layers = sizes.shape[0] - 1

    delta_arr = np.empty((n, c), dtype=np.float64)
    cdef double[:, ::1] delta = delta_arr
    cdef Py_ssize_t i, j
    cdef double zmax, sumexp, logsum, loss = 0.0
    for i in range(n):
        zmax = z[i, 0]
        for j in range(1, c):
            if z[i, j] > zmax:
                zmax = z[i, j]
        sumexp = 0.0
        for j in range(c):
            sumexp += exp(z[i, j] - zmax)
        logsum = log(sumexp)
        loss += logsum - (z[i, y[i]] - zmax)
        for j in range(c):
            delta[i, j] = exp(z[i, j] - zmax - logsum)
        delta[i, y[i]] -= 1.0
    loss /= n
    for i in range(n):
        for j in range(c):
            delta[i, j] /= n

    grad = np.zeros(params.shape[0], dtype=np.float64)
    cdef double[::1] g = grad
    cdef Py_ssize_t layer, nin, nout, off, boff, k
    cdef const double[:, ::1] a_in
    cdef double[:, ::1] nxt_delta
    cdef double dij, aik

    offsets = []
    off = 0
    for layer in range(n_layers):
        offsets.append(off)
        off += sizes[layer] * sizes[layer + 1] + sizes[layer + 1]

    for layer in range(n_layers - 1, -1, -1):
        nin = sizes[layer]
        nout = sizes[layer + 1]
        off = offsets[layer]
        boff = off + nin * nout
        a_in = acts[layer]
        n = a_in.shape[0]
        for i in range(n):
            for k in range(nin):
                aik = a_in[i, k]
                if aik != 0.0:
                    for j in range(nout):
                        g[off + k * nout + j] += aik * delta[i, j]
            for j in range(nout):
                g[boff + j] += delta[i, j]
        if layer > 0:
            nxt_arr = np.zeros((n, nin), dtype=np.float64)
            nxt_delta = nxt_arr
            for i in range(n):
                for j in range(nout):
                    dij = delta[i, j]
                    if dij != 0.0:
                        for k in range(nin):
                            nxt_delta[i, k] += dij * params[off + k * nout + j]
                for k in range(nin):
                    if a_in[i, k] <= 0.0:
                        nxt_delta[i, k] = 0.0
            delta_arr = nxt_arr
            delta = delta_arr
    return loss, grad
