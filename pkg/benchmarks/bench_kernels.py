"""Compiled vs pure-Python kernels on battery-sized inputs.

    python benchmarks/bench_kernels.py [--races 100000] [--repeat 3]

Both implementations are loaded side by side, checked for identical output,
then timed with ``timeit``.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from fairmatch import _pykernels

try:
    from fairmatch import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def inputs(races: int, slots: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    arrival = rng.integers(0, 5_000_000, size=(races, slots), dtype=np.int64)
    agent = rng.integers(-1, 4, size=(races, slots)).astype(np.int32)
    release = arrival + rng.integers(0, 2_000_001, size=(races, slots))
    tiebreak = rng.integers(0, 1 << 62, size=(races, slots), dtype=np.int64)
    rank = np.argsort(rng.random((races, 4)), axis=1).argsort(axis=1).astype(np.int64)
    group = rng.integers(0, 6, size=4000).tolist()
    perm = rng.permutation(6).tolist()
    return {
        "resolve_races": (arrival, release, tiebreak, agent),
        "libra_schedule": (arrival, agent, rank, 1_000_000),
        "rr_drain_order": (group, perm),
    }


def same(a, b) -> bool:
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--races", type=int, default=100_000)
    ap.add_argument("--slots", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; run: pip install -e . --no-build-isolation")
        return
    cases = inputs(args.races, args.slots)
    print(f"{'kernel':<16} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, argv in cases.items():
        py, cy = getattr(_pykernels, name), getattr(_ckernels, name)
        assert same(py(*argv), cy(*argv)), f"{name}: implementations disagree"
        t_py = min(timeit.repeat(lambda: py(*argv), number=1, repeat=args.repeat))
        t_cy = min(timeit.repeat(lambda: cy(*argv), number=1, repeat=args.repeat))
        print(f"{name:<16} {t_py:>10.4f} {t_cy:>10.4f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
