import random

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from fairmatch.core import ms
from fairmatch.policies import (
    ConstantDelayConfig, FbaConfig, RandomDelayConfig, constant_delay_schedule, fba_batch_end, fba_schedule,
    fcfs_schedule, random_delay_schedule,
)
from fairmatch.simnet.engine import run_scenario
from fairmatch.simnet.presets import sniping, two_takers
from conftest import mk
from oracles import fba_p2_win, random_delay_p2_win


def test_fcfs_releases_on_arrival_and_orders_by_seq():
    a, b = mk(3, arrived=5), mk(4, arrived=5)
    assert fcfs_schedule(a).release_at == 5
    assert sorted([b, a], key=lambda o: (fcfs_schedule(o).release_at, o.seq)) == [a, b]


def test_config_invariants():
    with pytest.raises(ValueError):
        ConstantDelayConfig(-1)
    with pytest.raises(ValueError):
        RandomDelayConfig(-1)
    with pytest.raises(ValueError):
        FbaConfig(0)


def test_constant_delay_examples():
    cfg = ConstantDelayConfig(ms(3))
    assert constant_delay_schedule(mk(1, arrived=0), cfg, True).release_at == ms(3)
    asym = ConstantDelayConfig(ms(3), takers_only=True)
    assert constant_delay_schedule(mk(1, arrived=7), asym, False).release_at == 7
    assert constant_delay_schedule(mk(1, arrived=7), asym, True).release_at == 7 + ms(3)


def test_constant_delay_slow_cancel_beats_delayed_taker():
    # taker reacts at 0, maker cancels at 1 ms; takers are held 3 ms
    cfg = sniping(races=200, sniper_ns=0, maker_ns=ms(1), policy="constant_delay", delay_ns=ms(3),
                  takers_only=True)
    res = run_scenario(cfg)
    assert res.win_counts() == {"MM": 200}


def test_random_delay_zero_is_fcfs():
    rng = random.Random(0)
    cfg = RandomDelayConfig(0)
    assert all(random_delay_schedule(mk(i, arrived=i), cfg, rng).release_at == i for i in range(50))
    r0 = run_scenario(two_takers("random_delay", races=300, max_delay_ns=0))
    r1 = run_scenario(two_takers("fcfs", races=300))
    assert [r.winner for r in r0.races] == [r.winner for r in r1.races]


def test_random_delay_uniform_ks():
    D = ms(2)
    rng = random.Random("ks")
    cfg = RandomDelayConfig(D)
    o = mk(1, arrived=0)
    draws = np.array([random_delay_schedule(o, cfg, rng).release_at for _ in range(100_000)]) / D
    assert draws.min() >= 0 and draws.max() <= 1
    assert sps.kstest(draws, "uniform").pvalue > 0.01


def test_random_delay_draws_in_arrival_order_reproducible():
    cfg = RandomDelayConfig(1000)
    a = [random_delay_schedule(mk(i, arrived=i), cfg, random.Random(5)).release_at for i in range(5)]
    b = [random_delay_schedule(mk(i, arrived=i), cfg, random.Random(5)).release_at for i in range(5)]
    assert a == b


@given(st.integers(0, 10**12), st.integers(1, 10**7), st.integers(0, 10**7))
def test_fba_batch_end_half_open(t, L, phase):
    cfg = FbaConfig(L, phase)
    end = fba_batch_end(t, cfg)
    assert end > t and end - L <= t
    assert (end - phase) % L == 0


@given(st.integers(0, 10**9), st.integers(0, 10**9))
def test_release_never_before_arrival(t, D):
    rng = random.Random(t)
    o = mk(1, arrived=t)
    assert random_delay_schedule(o, RandomDelayConfig(D), rng).release_at >= t
    assert fba_schedule(o, FbaConfig(max(1, D)), rng).release_at > t
    assert constant_delay_schedule(o, ConstantDelayConfig(D), True).release_at >= t


def test_fba_within_batch_exchangeable():
    # each of k batch members is first with frequency 1/k over 100k batches
    rng = random.Random("fba-perm")
    cfg = FbaConfig(ms(2))
    k = 4
    first = [0] * k
    n = 100_000
    for _ in range(n):
        ranks = [fba_schedule(mk(i + 1, arrived=i), cfg, rng).release_rank_hint for i in range(k)]
        first[ranks.index(min(ranks))] += 1
    assert all(abs(f / n - 1 / k) <= 0.02 for f in first)


def test_oracles_agree_with_closed_forms():
    assert abs(float(random_delay_p2_win(100, 200)) - 0.125) < 0.01
    assert float(fba_p2_win(2000, 1000)) == 0.25
    assert abs(float(fba_p2_win(3000, 1000)) - 1 / 3) < 1e-9


def test_fba_same_batch_coin_flip():
    # zero latency gap: both orders always share the batch
    res = run_scenario(two_takers("fba", latency_p1=ms(2), latency_p2=ms(2), races=20_000, batch_ns=ms(2)))
    assert abs(res.win_rate("P2") - 0.5) <= 0.02
