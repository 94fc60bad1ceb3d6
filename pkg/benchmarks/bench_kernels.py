"""Compare the compiled and pure-Python kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--sizes 50,100,200] [--repeat 3]

Times the Jacobi eigensolver on edge Laplacians and the cell search (which
runs one breadth-first tree per node) on synthetic networks.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from wdntsp import _kernels, topology
from wdntsp.network import generate_synthetic
from wdntsp.spectral import JACOBI_MAX_SWEEPS, JACOBI_TOL
from wdntsp.topology import build_b1, build_complex


def time_jacobi(mod, L, repeat):
    n = L.shape[0]
    rounds = _kernels.round_robin(n)

    def run():
        mod.jacobi(np.array(L, dtype=float), np.eye(n), rounds, JACOBI_TOL, JACOBI_MAX_SWEEPS)

    return min(timeit.repeat(run, number=1, repeat=repeat))


def time_cells(mod, b1, repeat):
    saved = _kernels.bfs_tree
    _kernels.bfs_tree = mod.bfs_tree
    try:
        return min(timeit.repeat(lambda: topology.build_b2(b1, 30), number=1, repeat=repeat))
    finally:
        _kernels.bfs_tree = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="50,100,200")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = _kernels.backends()
    if "compiled" not in backends:
        print("compiled core not built; only the Python backend is available")
    names = sorted(backends)
    print(f"{'kernel':<8} {'nodes':>5} {'dim':>5} " + " ".join(f"{n:>11}" for n in names)
          + ("    speedup" if len(names) == 2 else ""))
    for n_nodes in (int(s) for s in args.sizes.split(",")):
        net = generate_synthetic(0, n_nodes, 0.4)
        L1 = build_complex(net).laplacians.L1
        b1 = build_b1(net)
        for label, dim, fn, arg in (("jacobi", L1.shape[0], time_jacobi, L1),
                                    ("cells", n_nodes, time_cells, b1)):
            times = {name: fn(backends[name], arg, args.repeat) for name in names}
            line = f"{label:<8} {n_nodes:>5} {dim:>5} " + " ".join(
                f"{times[name] * 1e3:>9.2f}ms" for name in names)
            if len(names) == 2:
                line += f" {times['python'] / times['compiled']:>9.1f}x"
            print(line)


if __name__ == "__main__":
    main()
