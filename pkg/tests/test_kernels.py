import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairmatch import _pykernels, kernels

ck = pytest.importorskip("fairmatch._ckernels")


def test_compiled_kernels_selected():
    assert kernels.IMPLEMENTATION == "cython"


def test_pure_fallback_env_switch():
    code = "from fairmatch import kernels; print(kernels.IMPLEMENTATION)"
    out = subprocess.run([sys.executable, "-c", code], env={**os.environ, "FAIRMATCH_PURE": "1"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=0, max_size=30), st.randoms())
def test_rr_drain_order_equal(groups, rnd):
    present = sorted(set(groups))
    perm = present[:]
    rnd.shuffle(perm)
    a = _pykernels.rr_drain_order(groups, perm)
    b = ck.rr_drain_order(groups, perm)
    assert a.tolist() == b.tolist()
    assert sorted(a.tolist()) == list(range(len(groups)))


def random_race_arrays(seed, n=300, m=7):
    rng = np.random.default_rng(seed)
    arrival = rng.integers(0, 50, size=(n, m), dtype=np.int64)
    agent = rng.integers(-1, 4, size=(n, m)).astype(np.int32)
    release = arrival + rng.integers(0, 20, size=(n, m))
    tiebreak = rng.integers(0, 3, size=(n, m), dtype=np.int64)
    return arrival, release, tiebreak, agent


@pytest.mark.parametrize("seed", range(10))
def test_resolve_races_equal(seed):
    args = random_race_arrays(seed)
    for x, y in zip(_pykernels.resolve_races(*args), ck.resolve_races(*args)):
        assert x.dtype == y.dtype and np.array_equal(x, y)


@pytest.mark.parametrize("seed", range(10))
def test_libra_schedule_equal(seed):
    arrival, _, _, agent = random_race_arrays(seed)
    rng = np.random.default_rng(seed + 100)
    rank = np.argsort(rng.random((arrival.shape[0], 4)), axis=1).astype(np.int64)
    for timer in (0, 5, 17):
        for x, y in zip(_pykernels.libra_schedule(arrival, agent, rank, timer),
                        ck.libra_schedule(arrival, agent, rank, timer)):
            assert np.array_equal(x, y)


def test_libra_schedule_semantics():
    arrival = np.array([[0, 3, 10, 11, -1]], dtype=np.int64)
    agent = np.array([[0, 1, 0, 0, -1]], dtype=np.int32)
    rank = np.array([[1, 0]], dtype=np.int64)
    for impl in (_pykernels, ck):
        rel, tb = impl.libra_schedule(arrival, agent, rank, 3)
        # buffer [0, 3] inclusive, then a fresh one opened at 10
        assert rel[0, :4].tolist() == [3, 3, 13, 13]
        assert tb[0, :4].tolist() == [1, 0, 1, 3]


def test_resolve_races_empty_rows():
    arrival = np.zeros((2, 2), dtype=np.int64)
    agent = np.array([[-1, -1], [4, 2]], dtype=np.int32)
    release = np.array([[0, 0], [5, 5]], dtype=np.int64)
    tb = np.array([[0, 0], [1, 0]], dtype=np.int64)
    for impl in (_pykernels, ck):
        w, c, n = impl.resolve_races(arrival, release, tb, agent)
        assert w.tolist() == [-1, 2] and c.tolist() == [0, 5] and n.tolist() == [0, 2]
