"""Ready-made scenario builders for the common race set-ups."""
from __future__ import annotations

from typing import Any, Optional, Sequence

from ..core import ms
from .agents import AgentSpec, Strategy
from .latency import Jitter, LatencyProfile
from .scenario import PolicySpec, ScenarioConfig

MAKER = "MM"


def maker(quantity: int = 1, price: int = 100, reprice_cancel: bool = False, account: int = 100) -> AgentSpec:
    return AgentSpec(MAKER, account, account, Strategy.PASSIVE_MAKER,
                     {"price": price, "quantity": quantity, "reprice_cancel": reprice_cancel})


def taker(name: str, account: int, firm: Optional[int] = None, strategy: Strategy = Strategy.REACTIVE_TAKER,
          **params: Any) -> AgentSpec:
    return AgentSpec(name, account, account if firm is None else firm, strategy, params)


def build(
    policy: str,
    agents: Sequence[AgentSpec],
    latencies: dict[str, LatencyProfile],
    races: int,
    seed: int = 0,
    name: str = "scenario",
    **kwargs: Any,
) -> ScenarioConfig:
    policy_params = kwargs.pop("policy_params", {})
    profiles = dict(latencies)
    for a in agents:
        profiles.setdefault(a.name, LatencyProfile())
    return ScenarioConfig(
        name=name, policy=PolicySpec(policy, dict(policy_params)), instruments=kwargs.pop("instruments", [1]),
        agents=list(agents), latency_profiles=profiles, races=races, seed=seed, **kwargs,
    )


def two_takers(
    policy: str,
    latency_p1: int = ms(2),
    latency_p2: int = ms(3),
    races: int = 10_000,
    seed: int = 0,
    p2_copies: int = 1,
    jitter_p2_gateway: Optional[Jitter] = None,
    **policy_params: Any,
) -> ScenarioConfig:
    """P1 (faster) and P2 race for a one-unit offer; the latency gap sits in the reaction leg."""
    p2 = (taker("P2", 2, strategy=Strategy.DUPLICATOR, copies=p2_copies) if p2_copies > 1 else taker("P2", 2))
    jit = {"gateway": jitter_p2_gateway} if jitter_p2_gateway else {}
    return build(
        policy,
        [maker(), taker("P1", 1), p2],
        {"P1": LatencyProfile(reaction_L=latency_p1), "P2": LatencyProfile(reaction_L=latency_p2, jitter=jit)},
        races,
        seed,
        name=f"two_takers_{policy}",
        policy_params=policy_params,
    )


def sniping(races: int = 1_000, seed: int = 0, sniper_ns: int = ms(1), maker_ns: int = ms(1.5),
            timer_ns: int = ms(1), cancel_exemption: bool = True, maker_jitter: Optional[Jitter] = None,
            policy: str = "libra", **policy_params: Any) -> ScenarioConfig:
    """A slow maker cancels its stale offer after the stimulus; a fast sniper tries to lift it."""
    if policy == "libra":
        policy_params = {"timer_ns": timer_ns, "cancel_exemption": cancel_exemption, **policy_params}
    jit = {"reaction": maker_jitter} if maker_jitter else {}
    return build(
        policy,
        [maker(reprice_cancel=True), taker("SN", 1, strategy=Strategy.SNIPER)],
        {MAKER: LatencyProfile(reaction_L=maker_ns, jitter=jit), "SN": LatencyProfile(reaction_L=sniper_ns)},
        races, seed, name=f"sniping_{policy}", policy_params=policy_params,
    )


def taker_population(
    timer_ns: int,
    races: int = 2_000,
    seed: int = 0,
    fast: int = 4,
    slow: int = 4,
    participation: float = 0.5,
    race_spacing_ns: Optional[int] = None,
    jitter_ns: int = 300_000,
) -> ScenarioConfig:
    """Two latency classes of takers, each reacting to a stimulus with some probability.

    Fast takers sit within 0.2-1.0 ms, slow ones within 3-12 ms, all with
    uniform transmit jitter of up to ``jitter_ns`` (0.3 ms by default).
    """
    agents = [maker()]
    lat = {}
    jit = {"transmit": Jitter("uniform", a=0, b=jitter_ns)} if jitter_ns else {}
    for i in range(fast):
        name = f"F{i + 1}"
        agents.append(taker(name, 1 + i, participation=participation))
        lat[name] = LatencyProfile(reaction_L=200_000 + i * 800_000 // max(1, fast - 1), jitter=jit)
    for i in range(slow):
        name = f"S{i + 1}"
        agents.append(taker(name, 1 + fast + i, participation=participation))
        lat[name] = LatencyProfile(reaction_L=3_000_000 + i * 9_000_000 // max(1, slow - 1), jitter=jit)
    return build("libra", agents, lat, races, seed, name="taker_population",
                 policy_params={"timer_ns": timer_ns}, race_spacing_ns=race_spacing_ns)
