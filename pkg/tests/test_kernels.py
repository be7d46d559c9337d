"""Backend parity: the compiled kernels must agree with the NumPy ones."""
import numpy as np
import pytest

from fedwatch import kernels
from fedwatch.kernels import _pure

_fast = kernels.available_backends().get("compiled")

needs_compiled = pytest.mark.skipif(
    _fast is None, reason="compiled kernels not built"
)


def _random_case(rng, sizes, n):
    sizes = np.asarray(sizes, dtype=np.intp)
    d = int(sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:])))
    params = np.ascontiguousarray(rng.normal(0, 1, d))
    x = np.ascontiguousarray(rng.normal(0, 1, (n, sizes[0])))
    y = rng.integers(0, sizes[-1], n).astype(np.int64)
    return params, sizes, x, y


@needs_compiled
@pytest.mark.parametrize("sizes", [(3, 2), (5, 8, 3), (20, 30, 10), (6, 7, 5, 4)])
def test_backends_agree(sizes):
    rng = np.random.default_rng(42)
    for trial in range(10):
        params, sz, x, y = _random_case(rng, sizes, n=1 + trial)
        zp = _pure.forward_logits(params, sz, x)
        zf = np.asarray(_fast.forward_logits(params, sz, x))
        np.testing.assert_allclose(zp, zf, rtol=1e-10, atol=1e-12)

        lp, gp = _pure.loss_grad(params, sz, x, y)
        lf, gf = _fast.loss_grad(params, sz, x, y)
        assert abs(lp - lf) < 1e-10
        np.testing.assert_allclose(gp, np.asarray(gf), rtol=1e-9, atol=1e-12)

        assert np.array_equal(
            _pure.predict_labels(params, sz, x),
            np.asarray(_fast.predict_labels(params, sz, x)),
        )


@needs_compiled
def test_backends_agree_on_saturated_params():
    rng = np.random.default_rng(7)
    params, sz, x, y = _random_case(rng, (10, 6, 4), n=8)
    params = params * 2e6 + 0.5  # poisoned-scale weights saturate softmax
    lp, gp = _pure.loss_grad(params, sz, x, y)
    lf, gf = _fast.loss_grad(params, sz, x, y)
    assert np.isfinite(lp) and np.isfinite(lf)
    assert np.isfinite(gp).all()
    np.testing.assert_allclose(gp, np.asarray(gf), rtol=1e-9, atol=1e-9)
    assert np.array_equal(
        _pure.predict_labels(params, sz, x),
        np.asarray(_fast.predict_labels(params, sz, x)),
    )


def test_kernel_calls_are_deterministic():
    rng = np.random.default_rng(3)
    params, sz, x, y = _random_case(rng, (7, 5, 3), n=6)
    l1, g1 = kernels.loss_grad(params, sz, x, y)
    l2, g2 = kernels.loss_grad(params, sz, x, y)
    assert l1 == l2
    assert np.array_equal(g1, g2)


def test_use_switches_backend_and_back():
    previous = kernels.backend_name()
    assert previous in kernels.available_backends()
    old = kernels.use("python")
    assert old == previous
    assert kernels.backend_name() == "python"
    kernels.use(previous)
    with pytest.raises(ValueError):
        kernels.use("fortran")
