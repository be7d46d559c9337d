"""Benchmark the compiled kernels against the NumPy fallback.

Micro-benchmarks the three hot kernels at the two workload scales (the
synthetic-blob default corpus and MNIST-shaped inputs), then times one full
simulated run per backend. Run from the repository root:

    python benchmarks/bench_kernels.py [--repeat 300]
"""
import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fedwatch import kernels  # noqa: E402
from fedwatch.config import parse_config  # noqa: E402
from fedwatch.protocol import run_training  # noqa: E402

CASES = [
    ("blob train batch", (20, 30, 10), 32),
    ("blob validation eval", (20, 30, 10), 500),
    ("mnist train batch", (784, 30, 10), 32),
    ("mnist validation eval", (784, 30, 10), 500),
]

OPS = ("loss_grad", "forward_logits", "predict_labels")


def _case_inputs(rng, sizes, n):
    sizes = np.asarray(sizes, dtype=np.intp)
    d = int(sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:])))
    params = np.ascontiguousarray(rng.normal(0, 1, d))
    x = np.ascontiguousarray(rng.normal(0, 1, (n, sizes[0])))
    y = rng.integers(0, sizes[-1], n).astype(np.int64)
    return params, sizes, x, y


def _time_op(mod, op, args, repeat):
    fn = getattr(mod, op)
    fn(*args)  # warm up
    start = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - start) / repeat * 1e6


def micro(repeat):
    backends = kernels.available_backends()
    rng = np.random.default_rng(0)
    print(f"{'case':<22} {'op':<15} " +
          " ".join(f"{name + ' us':>12}" for name in backends) +
          ("   speedup   max|diff|" if len(backends) == 2 else ""))
    for label, sizes, n in CASES:
        params, sz, x, y = _case_inputs(rng, sizes, n)
        for op in OPS:
            args = (params, sz, x, y) if op == "loss_grad" else (params, sz, x)
            times = {name: _time_op(mod, op, args, repeat)
                     for name, mod in backends.items()}
            row = f"{label:<22} {op:<15} " + " ".join(
                f"{times[name]:>12.1f}" for name in backends
            )
            if len(backends) == 2:
                speedup = times["python"] / times["compiled"]
                ref = backends["python"]
                alt = backends["compiled"]
                if op == "loss_grad":
                    lr, gr = ref.loss_grad(*args)
                    la, ga = alt.loss_grad(*args)
                    diff = max(abs(lr - la), float(np.abs(gr - np.asarray(ga)).max()))
                else:
                    diff = float(np.abs(
                        np.asarray(getattr(ref, op)(*args), dtype=np.float64)
                        - np.asarray(getattr(alt, op)(*args), dtype=np.float64)
                    ).max())
                row += f" {speedup:>9.2f}x {diff:>11.2e}"
            print(row)


def end_to_end():
    config = parse_config(None, {
        "rounds": "20", "attack.pattern": "static",
        "defense.enabled": "true", "defense.delta": "5",
    })
    print("\nfull 20-round defended run (default corpus):")
    original = kernels.backend_name()
    for name in kernels.available_backends():
        kernels.use(name)
        start = time.perf_counter()
        log = run_training(config)
        elapsed = time.perf_counter() - start
        print(f"  {name:<9} {elapsed:6.2f} s   final accuracy "
              f"{log.records[-1].global_accuracy:.3f}   "
              f"excluded {sorted(log.exclusion_events)}")
    kernels.use(original)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=300)
    args = parser.parse_args()
    names = ", ".join(kernels.available_backends())
    print(f"backends available: {names} (active: {kernels.backend_name()})\n")
    micro(args.repeat)
    end_to_end()


if __name__ == "__main__":
    main()
