"""Compare the compiled kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py [--nodes N] [--repeat R]``.
"""

import argparse
import timeit

import numpy as np

from spacelike_mcf import _kernels
from spacelike_mcf._kernels import _pykernels


def frame_inputs(N, n, m, seed=0):
    rng = np.random.default_rng(seed)
    d = n + m
    G = np.broadcast_to(np.diag([1.0] * n + [-1.0] * m), (N, d, d)).copy()
    E = np.zeros((N, n, d))
    E[:, :, :n] = np.eye(n)
    E[:, :, n:] = 0.4 * rng.uniform(-1, 1, (N, n, m)) / np.sqrt(n * m)
    T = np.broadcast_to(np.eye(d)[n:], (N, m, d)).copy()
    return E, G, T


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nodes", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    compiled = _kernels.compiled_module()
    if compiled is None:
        print("compiled kernels are not built; only the fallback is timed")
    print(f"{'kernel':<28}{'numpy [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    cases = []
    for n, m in ((2, 1), (2, 2), (3, 3)):
        E, G, T = frame_inputs(args.nodes, n, m)
        cases.append((f"adapted_frames ({n},{m})", lambda mod, a=(E, G, T): mod.adapted_frames(*a)))
    R = np.linspace(0.5, 2.0, args.nodes)
    H = R + 0.1 * np.sin(3 * R)
    h = R[1] - R[0]
    cases.append(("radial_rhs", lambda mod: mod.radial_rhs(R, H, h)))
    for name, call in cases:
        t_py = best_of(lambda: call(_pykernels), args.repeat)
        if compiled is None:
            print(f"{name:<28}{t_py:12.4f}{'-':>12}{'-':>10}")
            continue
        t_c = best_of(lambda: call(compiled), args.repeat)
        print(f"{name:<28}{t_py:12.4f}{t_c:12.4f}{t_py / t_c:10.1f}")


if __name__ == "__main__":
    main()
