"""Compare the compiled kernels against the numpy fallback on the training
hot path: encoder forward/backward and a batched PGD attack.

Run:  python benchmarks/bench_backends.py [--repeats 30]
"""

import argparse
import time

import numpy as np

from abat.attacks import AttackConfig, pgd
from abat.numerics import FeatureEncoder, Tape, Tensor, backends
from abat.objectives import LossKind, ace_loss


def time_call(fn, repeats):
    fn()  # warmup
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), float(np.median(times))


def bench_forward_backward(encoder, x, anchors, labels):
    def step():
        encoder.zero_grad()
        tape = Tape()
        loss = ace_loss(tape, encoder.forward(tape, Tensor(x)), anchors, labels)
        tape.backward(loss)

    return step


def bench_pgd(encoder, x, anchors, labels, steps):
    cfg = AttackConfig(epsilon=8 / 255, steps=steps, step_size=2 / 255,
                       loss=LossKind.ace())

    def step():
        pgd(encoder, anchors, x, labels, cfg)

    return step


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=30)
    parser.add_argument("--batch", type=int, default=128)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    encoder = FeatureEncoder([64, 128, 128, 32], seed=0)
    x = rng.random((args.batch, 64))
    anchors = rng.standard_normal((20, 32))
    anchors /= np.linalg.norm(anchors, axis=1, keepdims=True)
    labels = rng.integers(0, 20, size=args.batch)

    cases = {
        "forward+backward (B=%d)" % args.batch:
            lambda: bench_forward_backward(encoder, x, anchors, labels),
        "pgd-7 attack (B=%d)" % args.batch:
            lambda: bench_pgd(encoder, x, anchors, labels, 7),
    }

    names = sorted(backends.available())
    if len(names) < 2:
        print("only one backend available:", names)
    results = {}
    for backend_name in names:
        backends.set_active(backend_name)
        for case_name, make in cases.items():
            best, median = time_call(make(), args.repeats)
            results[(case_name, backend_name)] = (best, median)

    width = max(len(c) for c in cases)
    print(f"{'case'.ljust(width)}  backend   best ms   median ms")
    for case_name in cases:
        for backend_name in names:
            best, median = results[(case_name, backend_name)]
            print(f"{case_name.ljust(width)}  {backend_name:8s} "
                  f"{1e3 * best:8.3f}  {1e3 * median:9.3f}")
        if len(names) == 2 and "cython" in names:
            speedup = (results[(case_name, 'numpy')][1]
                       / results[(case_name, 'cython')][1])
            print(f"{''.ljust(width)}  numpy/cython median ratio: {speedup:.2f}x")


if __name__ == "__main__":
    main()
