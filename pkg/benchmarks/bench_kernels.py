"""Compare the numba and numpy paths of the hot kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on the input sizes the suites actually use (n = 2..4
matrices, polynomials in up to 22 variables).  The first jit call is timed
separately so compile cost is visible.
"""
import argparse
import time

import numpy as np

from dynpg import _kernels as K


def _inputs(rng):
    out = {}
    for n in (2, 3, 4):
        a = 0.4 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
        m = np.eye(n) + 0.3 * rng.standard_normal((n, n))
        out[f"expm n={n}"] = ("expm", (a.astype(np.complex128),))
        out[f"ldu n={n}"] = ("ldu", (m.astype(np.complex128),))
    for nvars in (6, 14, 22):
        exps = rng.integers(0, 4, size=(12, nvars)).astype(np.int64)
        coeffs = rng.standard_normal(12).astype(np.complex128)
        v = (0.5 * rng.standard_normal(nvars)).astype(np.complex128)
        out[f"poly vars={nvars}"] = ("poly_eval_grad", (exps, coeffs, v))
    return out


def _time(fn, args, repeat):
    start = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - start) / repeat


def _agree(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    # ldu also returns a boolean success flag, hence the complex cast
    return max(float(np.max(np.abs(np.asarray(x, dtype=complex) - np.asarray(y, dtype=complex)), initial=0.0))
               for x, y in zip(a, b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    cases = _inputs(rng)
    if K.jit_impl is None:
        print("numba unavailable: numpy path only")
    print(f"{'case':<16} {'numpy us':>10} {'numba us':>10} {'compile s':>10} {'speedup':>8} {'max diff':>10}")
    for label, (kernel, inputs) in cases.items():
        t_np = _time(K.numpy_impl[kernel], inputs, args.repeat)
        if K.jit_impl is None:
            print(f"{label:<16} {1e6 * t_np:>10.2f}")
            continue
        start = time.perf_counter()
        jit_out = K.jit_impl[kernel](*inputs)
        compile_s = time.perf_counter() - start
        t_jit = _time(K.jit_impl[kernel], inputs, args.repeat)
        diff = _agree(K.numpy_impl[kernel](*inputs), jit_out)
        print(f"{label:<16} {1e6 * t_np:>10.2f} {1e6 * t_jit:>10.2f} {compile_s:>10.3f} "
              f"{t_np / t_jit:>7.1f}x {diff:>10.1e}")


if __name__ == "__main__":
    main()
