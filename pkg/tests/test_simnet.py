import json

import numpy as np
import pytest

from fairmatch.core import ms
from fairmatch.harness import audit_latency
from fairmatch.simnet.agents import AgentConfigError, AgentSpec, Strategy
from fairmatch.simnet.batch import run_batch_config
from fairmatch.simnet.engine import ARRIVAL, EventKind, EventLoop, SimulationError, run_scenario
from fairmatch.simnet.latency import Jitter, LatencyProfile
from fairmatch.simnet.presets import build, maker, sniping, taker, taker_population, two_takers
from fairmatch.simnet.scenario import ConfigError, PolicySpec


def records(res, kind):
    return [r for r in map(json.loads, res.log) if r["kind"] == kind]


def test_same_seed_byte_identical_logs():
    for pol, kw in [("libra", {"timer_ns": ms(1)}), ("random_delay", {"max_delay_ns": ms(2)}), ("fba", {})]:
        cfg = two_takers(pol, races=200, seed=3, **kw)
        a, b = run_scenario(cfg, record_log=True), run_scenario(cfg, record_log=True)
        assert a.log == b.log and len(a.log) > 200
    c = run_scenario(two_takers("random_delay", races=200, seed=4, max_delay_ns=ms(2)), record_log=True)
    assert c.log != a.log


def test_event_loop_monotone_and_no_past():
    loop = EventLoop()
    seen = []
    for t in (5, 1, 3, 3):
        loop.schedule(t, ARRIVAL, EventKind.ORDER_ARRIVAL, t)
    loop.run(lambda kind, payload, at: seen.append(at))
    assert seen == sorted(seen) == [1, 3, 3, 5]
    with pytest.raises(SimulationError):
        loop.schedule(4, ARRIVAL, EventKind.ORDER_ARRIVAL, None)


def test_zero_latency_taker_arrives_at_stimulus():
    cfg = build("fcfs", [maker(), taker("T", 1)], {}, 20)
    res = run_scenario(cfg, record_log=True)
    for r in res.races:
        assert r.competitors == [("T", r.stimulus_at)]


def test_arrival_is_sum_of_legs():
    prof = LatencyProfile(100, 200, 300, 400, 500)
    assert prof.total() == 1500
    res = run_scenario(build("fcfs", [maker(), taker("A", 1), taker("B", 2)],
                             {"A": LatencyProfile(reaction_L=ms(2)), "B": prof}, 50))
    for r in res.races:
        assert dict(r.competitors) == {"A": r.stimulus_at + ms(2), "B": r.stimulus_at + 1500}
    cfg = two_takers("fcfs", races=50)
    for r in run_scenario(cfg).races:
        assert [n for n, _ in r.competitors] == ["P1", "P2"] and r.competitors[1][1] - r.competitors[0][1] == ms(1)


def test_latency_composition_audit_with_jitter_everywhere():
    jit = {leg: Jitter("uniform", a=-50_000, b=80_000) for leg in ("epsilon", "update", "reaction", "transmit")}
    jit["gateway"] = Jitter("truncnormal", mu=0, sigma=30_000, lo=-60_000, hi=60_000)
    prof = LatencyProfile(10_000, 70_000, ms(1), 90_000, 40_000, jitter=jit, theta_steps=((0, 5_000),))
    cfg = build("libra", [maker(reprice_cancel=True), taker("A", 1), taker("B", 2, strategy=Strategy.DUPLICATOR)],
                {"MM": prof, "A": prof, "B": prof}, 300, policy_params={"timer_ns": ms(1)})
    res = run_scenario(cfg, record_log=True)
    arrivals = [r for r in records(res, "arrival") if "legs" in r]
    assert len(arrivals) > 900
    assert audit_latency(map(json.loads, res.log)) == []
    assert any(r["jitter"]["gateway"] != 0 for r in arrivals)
    assert all(r["legs"]["gateway"] == 45_000 for r in arrivals)


def test_jitter_shifts_arrivals_monte_carlo():
    # B is 0.1 ms faster on base latency but gets uniform(0, 0.2 ms) gateway jitter
    jit = Jitter("uniform", a=0, b=200_000)
    cfg = two_takers("fcfs", latency_p1=ms(2), latency_p2=ms(1.9), races=20_000, jitter_p2_gateway=jit)
    res = run_scenario(cfg)
    shift = np.mean([dict(r.competitors)["P2"] - r.stimulus_at for r in res.races]) - ms(1.9)
    assert abs(shift - 100_000) < 2_000
    # oracle: B wins iff its jitter is below the 0.1 ms head start (ties go to the earlier seq)
    draws = np.rint(np.random.default_rng(0).uniform(0, 200_000, 1_000_000))
    assert abs(res.win_rate("P2") - np.mean(draws < 100_000)) <= 0.02


def test_gateway_congestion_steps():
    prof = LatencyProfile(gateway_theta=100, theta_steps=((0, 0), (10**9, 7_000)))
    assert prof.congestion(5) == 0 and prof.congestion(10**9) == 7_000
    cfg = build("fcfs", [maker(), taker("A", 1)], {"A": prof}, 40)
    res = run_scenario(cfg)
    for r in res.races:
        extra = 7_000 if r.stimulus_at >= 10**9 else 0
        assert r.competitors[0][1] - r.stimulus_at == 100 + extra
    assert {r.competitors[0][1] - r.stimulus_at for r in res.races} == {100, 7_100}


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        two_takers("nonsense")
    with pytest.raises(ValueError):
        LatencyProfile(reaction_L=-1)
    with pytest.raises(ConfigError):
        two_takers("fcfs", races=0)
    with pytest.raises(AgentConfigError):
        AgentSpec("x", 1, 1, Strategy.DUPLICATOR, {"copies": 0})
    with pytest.raises(AgentConfigError):
        AgentSpec("x", 1, 1, Strategy.REACTIVE_TAKER, {"lead_ns": 5})
    with pytest.raises(ConfigError):
        build("fcfs", [maker(), taker("A", 1)], {}, 10, race_spacing_ns=1000)


def test_one_winner_per_race_and_participation():
    res = run_scenario(taker_population(ms(1), races=2_000))
    contested = [r for r in res.races if r.competitors]
    assert all(r.winner for r in contested)
    assert all(not r.winner for r in res.races if not r.competitors)
    assert res.stats.quote_fills == len(contested)
    # each taker joins about half of the races
    joined = sum(len(r.competitors) for r in res.races) / (8 * len(res.races))
    assert abs(joined - 0.5) < 0.03


def test_multi_participant_flag():
    res = run_scenario(two_takers("fcfs", races=50))
    assert not any(r.multi_participant for r in res.races)
    res = run_scenario(two_takers("libra", races=50, timer_ns=ms(1)))
    assert all(r.multi_participant for r in res.races)
    res = run_scenario(two_takers("libra", races=50, timer_ns=ms(0.5)))
    assert not any(r.multi_participant for r in res.races)


def test_libra_timer_exactness():
    res = run_scenario(taker_population(ms(2), races=300), record_log=True)
    fwd = {r["seq"]: r["at"] for r in records(res, "forward")}
    arrived = {r["order"]["seq"]: r["order"]["arrived_at"] for r in records(res, "arrival")}
    for d in records(res, "drain"):
        assert d["at"] == d["deadline"] == arrived[d["started_by"]] + ms(2)
        assert all(fwd[s] == d["at"] for s in d["output"])
    assert res.stats.cross_buffer_timer_triggers == 0


def test_market_data_deliveries():
    prof = LatencyProfile(update_offset_epsilon=500, update_path_U=1_500)
    cfg = build("fcfs", [maker(), taker("A", 1)], {"A": prof, "MM": prof}, 30, market_data=True, delta_ns=250)
    res = run_scenario(cfg, record_log=True)
    ups = [r for r in records(res, "update") if r["what"] == "book"]
    assert res.stats.updates_delivered == len(ups) > 0
    # each taker's stimulus delivery is offset by delta + epsilon + U as well
    for r in res.races:
        assert r.competitors[0][1] - r.stimulus_at == 250 + 500 + 1_500


def test_bang_the_close_lands_before_boundary():
    L = ms(2)
    cfg = build("fba", [maker(), taker("B", 1, strategy=Strategy.BANG_THE_CLOSE, margin_ns=1_000)],
                {"B": LatencyProfile(reaction_L=ms(0.3))}, 300, policy_params={"batch_ns": L})
    for r in run_scenario(cfg).races:
        t = r.competitors[0][1]
        assert t % L == L - 1_000 or (t - r.stimulus_at == ms(0.3) and t % L > L - 1_000)


def test_sniping_without_exemption_has_fewer_overtakes():
    on = run_scenario(sniping(races=2_000, cancel_exemption=True))
    off = run_scenario(sniping(races=2_000, cancel_exemption=False))
    assert on.stats.cancel_overtakes > 0 and off.stats.cancel_overtakes < on.stats.cancel_overtakes
    assert 0.45 < off.stats.cancel_overtakes / 2_000 < 0.55


@pytest.mark.parametrize("policy,kw,who", [
    ("random_delay", {"max_delay_ns": ms(2)}, "P2"),
    ("fba", {"batch_ns": ms(3)}, "P2"),
    ("libra", {"timer_ns": ms(1)}, "P1"),
])
def test_batch_engine_agrees_with_event_engine(policy, kw, who):
    cfg = two_takers(policy, races=20_000, p2_copies=3, **kw)
    ev = run_scenario(cfg).win_rate(who)
    bt = run_batch_config(cfg).win_rate(who)
    assert abs(ev - bt) <= 0.02


def test_batch_engine_population_contention_agrees():
    cfg = taker_population(ms(3), races=5_000)
    ev = sum(r.multi_participant for r in run_scenario(cfg).races) / 5_000
    bt = float(np.mean(run_batch_config(cfg).contending >= 2))
    assert abs(ev - bt) <= 0.03


def test_batch_engine_rejects_unsupported():
    with pytest.raises(ConfigError):
        run_batch_config(sniping(races=10))


def test_rows_schema_and_firm_labels():
    from fairmatch.harness import sybil_scenario

    res = run_scenario(sybil_scenario({"name": "fcfs"}, 50, 0))
    row = res.rows()[0]
    assert set(row) >= {"stimulus_ns", "instrument", "policy", "firms", "arrivals_ns", "winner", "multi_participant"}
    assert set(row["firms"].split(";")) == {"H", "firm7"}
    assert len(row["accounts"].split(";")) == 3
