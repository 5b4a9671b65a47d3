"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--cutoff 12] [--repeat 5]

Prints the best-of-N wall time for each kernel and backend, the speed-up, and
the largest relative difference between the two outputs.
"""
from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from mcsqkd import _kernels_py
from mcsqkd.bsm import Basis, ChannelDetector, Polarization, _packed_engine, mode_vector

try:
    from mcsqkd import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def _fock_workload(mod, cutoff):
    u = mode_vector("alice", Polarization.PLUS)
    v = mode_vector("bob", Polarization.MINUS)
    out = []
    for n in range(cutoff + 1):
        for m in range(cutoff + 1):
            out.append(mod.fock_product(n, m, u, v)[1])
    return np.concatenate(out)


def _segment_workload(mod, packed, cd, cutoff):
    configs, probs, offsets, _ = packed
    k_max = 2 * cutoff
    return mod.segment_pattern_sums(
        configs, probs, offsets, cd.click_factors(k_max), cd.silence_factors(k_max)
    )


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--cutoff", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if _kernels_c is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
        return 1

    cd = ChannelDetector(0.1, 6e-6)
    packed = _packed_engine(Basis.X, args.cutoff)
    workloads = {
        "fock_product": lambda mod: _fock_workload(mod, args.cutoff),
        "segment_pattern_sums": lambda mod: _segment_workload(mod, packed, cd, args.cutoff),
    }

    print(f"cutoff {args.cutoff}, {packed[1].size} packed configurations, best of {args.repeat}")
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'cython [ms]':>13}{'speed-up':>10}{'scaled diff':>14}")
    for name, work in workloads.items():
        t_py = _best(lambda: work(_kernels_py), args.repeat)
        t_c = _best(lambda: work(_kernels_c), args.repeat)
        a, b = work(_kernels_py), work(_kernels_c)
        # entries cancelled by interference sit near zero, so scale by the largest output
        diff = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
        print(f"{name:<22}{1e3 * t_py:>12.2f}{1e3 * t_c:>13.2f}{t_py / t_c:>9.1f}x{diff:>14.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
