"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from corrpra.indicators import ema_cutoff
from corrpra.kernels import available_backends


def _symmetric(n: int, g: np.random.Generator) -> np.ndarray:
    a = g.standard_normal((n, 2 * n))
    return a @ a.T / (2 * n)


def cases(quick: bool):
    g = np.random.default_rng(0)
    sizes = (10, 30) if quick else (10, 30, 60)
    for n in sizes:
        a = _symmetric(n, g)
        yield f"jacobi_eigh N={n}", lambda k, a=a: k.jacobi_eigh(a)
    a = _symmetric(50, g)
    v0 = np.ones(50) / np.sqrt(50)
    yield "power_iteration N=50", lambda k: k.power_iteration(a, v0)
    t = 20_000 if quick else 100_000
    x = g.standard_normal(t)
    tk = ema_cutoff(0.1)
    yield f"ema_filter T={t} beta=0.1", lambda k: k.ema_filter(x, 0.1, tk)
    r = g.standard_normal((20, 5_000))
    w = g.standard_normal(5_000)
    yield "weighted_gram N=20 T=5000", lambda k: k.weighted_gram(r, w)


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = parser.parse_args(argv)

    backends = available_backends()
    names = sorted(backends)
    if "cython" not in backends:
        print("compiled kernels are not built; timing the fallback only")
    header = f"{'kernel':<28}" + "".join(f"{n + ' (ms)':>16}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, fn in cases(args.quick):
        best = {}
        for name in names:
            mod = backends[name]
            fn(mod)  # warm up
            number = 3
            best[name] = min(timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)) / number * 1e3
        line = f"{label:<28}" + "".join(f"{best[n]:>16.3f}" for n in names)
        if len(names) == 2:
            line += f"{best['python'] / best['cython']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
