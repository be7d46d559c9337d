"""MLP kernels: compiled extension when built, NumPy fallback otherwise.

The backend is selected once at import. ``use()`` rebinding exists for the
benchmark and the parity tests; simulation code just calls the module-level
functions.
"""
import numpy as np

from . import _pure

try:
    from . import _fast  # type: ignore[attr-defined]
except ImportError:
    _fast = None

_active = _fast if _fast is not None else _pure


def backend_name() -> str:
    return "compiled" if _active is _fast else "python"


def available_backends() -> dict:
    out = {"python": _pure}
    if _fast is not None:
        out["compiled"] = _fast
    return out


def use(name: str) -> str:
    """Switch the active backend; returns the previous one."""
    global _active
    previous = backend_name()
    backends = available_backends()
    if name not in backends:
        raise ValueError(f"backend {name!r} not available (have {sorted(backends)})")
    _active = backends[name]
    return previous


def _as_c64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def forward_logits(params, sizes, x):
    return _active.forward_logits(
        _as_c64(params), np.asarray(sizes, dtype=np.intp), _as_c64(x)
    )


def predict_labels(params, sizes, x):
    return _active.predict_labels(
        _as_c64(params), np.asarray(sizes, dtype=np.intp), _as_c64(x)
    )


def loss_grad(params, sizes, x, y):
    return _active.loss_grad(
        _as_c64(params),
        np.asarray(sizes, dtype=np.intp),
        _as_c64(x),
        np.ascontiguousarray(y, dtype=np.int64),
    )
