"""Baseline reordering policies: FCFS, constant delay, random delay, batch auction.

A policy sees every message on arrival and tells the venue when to hand it
to the matching engine. The venue (``simnet.Venue``) implements the small
surface the policies call: ``book(instrument)``, ``forward(order, now)``,
``schedule_release(order, decision)``, ``schedule_timer(key, deadline)`` and
``drop(order, reason)``.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .core import Nanos, Order


@dataclass(frozen=True, slots=True)
class PolicyDecision:
    release_at: Nanos
    release_rank_hint: Optional[int] = None


@dataclass(frozen=True)
class ConstantDelayConfig:
    delay: Nanos
    takers_only: bool = False

    def __post_init__(self) -> None:
        if self.delay < 0:
            raise ValueError("constant delay must be >= 0")


@dataclass(frozen=True)
class RandomDelayConfig:
    max_delay_D: Nanos
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.max_delay_D < 0:
            raise ValueError("max_delay_D must be >= 0")


@dataclass(frozen=True)
class FbaConfig:
    batch_length_L: Nanos
    boundary_phase: Nanos = 0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_length_L <= 0:
            raise ValueError("batch_length_L must be > 0")


def fcfs_schedule(o: Order) -> PolicyDecision:
    return PolicyDecision(o.arrived_at)


def constant_delay_schedule(o: Order, cfg: ConstantDelayConfig, is_marketable: bool) -> PolicyDecision:
    if cfg.takers_only and not is_marketable:
        return PolicyDecision(o.arrived_at)
    return PolicyDecision(o.arrived_at + cfg.delay)


def random_delay_schedule(o: Order, cfg: RandomDelayConfig, rng: random.Random) -> PolicyDecision:
    """Delay drawn uniformly from the integers in [0, D]; one draw per call."""
    if cfg.max_delay_D == 0:
        return PolicyDecision(o.arrived_at)
    return PolicyDecision(o.arrived_at + rng.randint(0, cfg.max_delay_D))


def fba_batch_end(t: Nanos, cfg: FbaConfig) -> Nanos:
    """End of the half-open grid interval [start, start + L) containing ``t``."""
    k = (t - cfg.boundary_phase) // cfg.batch_length_L
    return cfg.boundary_phase + (k + 1) * cfg.batch_length_L


def fba_schedule(o: Order, cfg: FbaConfig, rng: random.Random) -> PolicyDecision:
    # a random key per order; sorting a batch by key is a uniform permutation
    return PolicyDecision(fba_batch_end(o.arrived_at, cfg), rng.getrandbits(62))


class Policy:
    """Base class. Subclasses override ``decide`` or ``on_arrival``."""

    name = "policy"

    def decide(self, o: Order, venue) -> PolicyDecision:
        raise NotImplementedError

    def on_arrival(self, o: Order, now: Nanos, venue) -> None:
        decision = self.decide(o, venue)
        if decision.release_at == now and decision.release_rank_hint is None:
            venue.forward(o, now)
        else:
            venue.schedule_release(o, decision)

    def on_timer(self, key, now: Nanos, venue) -> None:
        raise NotImplementedError(f"{self.name} sets no timers")

    def describe(self) -> dict:
        return {"name": self.name}


class FCFSPolicy(Policy):
    name = "fcfs"

    def decide(self, o: Order, venue) -> PolicyDecision:
        return fcfs_schedule(o)


class ConstantDelayPolicy(Policy):
    name = "constant_delay"

    def __init__(self, cfg: ConstantDelayConfig) -> None:
        self.cfg = cfg

    def decide(self, o: Order, venue) -> PolicyDecision:
        marketable = False
        if self.cfg.takers_only and not o.is_cancel:
            marketable = venue.book(o.instrument).is_marketable(o)
        return constant_delay_schedule(o, self.cfg, marketable)

    def describe(self) -> dict:
        return {"name": self.name, "delay_ns": self.cfg.delay, "takers_only": self.cfg.takers_only}


class RandomDelayPolicy(Policy):
    name = "random_delay"

    def __init__(self, cfg: RandomDelayConfig) -> None:
        self.cfg = cfg
        self.rng = random.Random(f"{cfg.rng_seed}:random_delay")

    def decide(self, o: Order, venue) -> PolicyDecision:
        return random_delay_schedule(o, self.cfg, self.rng)

    def describe(self) -> dict:
        return {"name": self.name, "max_delay_ns": self.cfg.max_delay_D}


class FBAPolicy(Policy):
    name = "fba"

    def __init__(self, cfg: FbaConfig) -> None:
        self.cfg = cfg
        self.rng = random.Random(f"{cfg.rng_seed}:fba")

    def decide(self, o: Order, venue) -> PolicyDecision:
        return fba_schedule(o, self.cfg, self.rng)

    def describe(self) -> dict:
        return {"name": self.name, "batch_ns": self.cfg.batch_length_L, "phase_ns": self.cfg.boundary_phase}
