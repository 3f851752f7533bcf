"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

from chiralwalk import _kernels, kspace, mc, walk
from chiralwalk.core import CoinAngles, CoinParams

A = CoinAngles(1.0, 0.5)
H = CoinParams()


def position_walk():
    walk.chirality_series(A, H, 2000)


def kspace_propagators():
    blocks = kspace._blocks(kspace.quadrature_nodes(1600), 0.05)
    _kernels.impl.propagator_mean(blocks, 200)


def uniform_ensemble():
    mc.ensemble_chiral(A, H, kspace.NoiseParams(0.05), 100, 2000, seed=0)


def local_ensemble():
    mc.ensemble_chiral(A, H, kspace.NoiseParams(0.05), 100, 2000, seed=0, rule="local")


CASES = [position_walk, kspace_propagators, uniform_ensemble, local_ensemble]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if _kernels.NUMBA is None:
        raise SystemExit("numba is not installed")
    before = _kernels.impl
    print(f"{'case':<22}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    try:
        for fn in CASES:
            _kernels.select("numba")
            fn()  # compile
            t_jit = best_of(fn, args.repeat)
            _kernels.select("numpy")
            t_np = best_of(fn, args.repeat)
            print(f"{fn.__name__:<22}{t_np:>12.4f}{t_jit:>12.4f}{t_np / t_jit:>10.1f}")
    finally:
        _kernels.impl = before


if __name__ == "__main__":
    main()
