"""Vectorized race engine.

Covers the common subset of scenarios: one unit quote, takers that only
send marketable orders (optionally several copies) and a maker that does
not cancel. All randomness for a battery is drawn up front with numpy and
the winner of every race is resolved in one kernel call, so 100k races
take a fraction of a second. The event engine in ``engine.py`` remains the
reference; this one exists for fast sweeps and is cross-checked against it
statistically in the tests.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .. import kernels
from .agents import Strategy
from .latency import Jitter, LatencyProfile
from .scenario import DEFAULT_WINDOW_NS, POLICY_PARAMS, ConfigError, PolicySpec, ScenarioConfig

_TAKERS = (Strategy.REACTIVE_TAKER, Strategy.SNIPER, Strategy.DUPLICATOR)


@dataclass(frozen=True)
class BatchTaker:
    name: str
    group: int  # fairness group: firm after any merge, else the account
    profile: LatencyProfile
    copies: int = 1
    participation: float = 1.0
    label: Optional[str] = None
    firm: Optional[int] = None  # owner for contention counts; defaults to ``group``


@dataclass
class BatchResult:
    names: list[str]
    labels: list[str]
    policy: str
    stimulus: np.ndarray  # (n,)
    arrival: np.ndarray  # (n, m) with -1 on empty slots
    owner: np.ndarray  # (n, m) taker index, -1 empty
    winner: np.ndarray  # (n,) taker index, -1 none
    cleared: np.ndarray
    contending: np.ndarray

    def win_counts(self) -> dict[str, int]:
        idx, counts = np.unique(self.winner[self.winner >= 0], return_counts=True)
        return {self.names[i]: int(c) for i, c in zip(idx, counts)}

    def win_rate(self, name: str) -> float:
        return self.win_counts().get(name, 0) / len(self.winner)

    def rows(self) -> list[dict[str, Any]]:
        """Race rows in the same schema as the event engine (firm columns only)."""
        rows = []
        n_takers = len(self.names)
        for r in range(len(self.winner)):
            first = [None] * n_takers
            for a, t in zip(self.owner[r].tolist(), self.arrival[r].tolist()):
                if a >= 0 and (first[a] is None or t < first[a]):
                    first[a] = t
            firms: dict[str, int] = {}
            for a in sorted((a for a in range(n_takers) if first[a] is not None), key=lambda a: (first[a], a)):
                lab = self.labels[a]
                firms.setdefault(lab, first[a])
            w = int(self.winner[r])
            rows.append({
                "stimulus_ns": int(self.stimulus[r]),
                "instrument": 1,
                "policy": self.policy,
                "firms": ";".join(firms),
                "arrivals_ns": ";".join(str(t) for t in firms.values()),
                "winner": self.labels[w] if w >= 0 else "",
                "multi_participant": int(self.contending[r] >= 2),
                "cleared_ns": int(self.cleared[r]) if w >= 0 else "",
            })
        return rows


def _draw_jitter(j: Optional[Jitter], rng: np.random.Generator, shape) -> np.ndarray:
    if j is None or j.kind == "none":
        return np.zeros(shape, dtype=np.int64)
    if j.kind == "uniform":
        return np.rint(rng.uniform(j.a, j.b, size=shape)).astype(np.int64)
    out = np.empty(int(np.prod(shape)), dtype=np.float64)
    filled = 0
    while filled < out.size:
        x = rng.normal(j.mu, j.sigma, size=max(64, 2 * (out.size - filled)))
        x = x[(x >= j.lo) & (x <= j.hi)][: out.size - filled]
        out[filled:filled + x.size] = x
        filled += x.size
    return np.rint(out).reshape(shape).astype(np.int64)


def _leg(prof: LatencyProfile, leg: str, rng: np.random.Generator, shape) -> np.ndarray:
    base = prof.base(leg)
    return base + np.maximum(_draw_jitter(prof.jitter.get(leg), rng, shape), -base)


def run_batch(
    takers: list[BatchTaker],
    policy: PolicySpec,
    races: int,
    seed: int = 0,
    window_ns: int = DEFAULT_WINDOW_NS,
    settle_ns: int = 0,
) -> BatchResult:
    if not takers:
        raise ConfigError("the batch engine needs at least one taker")
    if policy.name not in POLICY_PARAMS:
        raise ConfigError(f"unknown policy {policy.name!r}")
    p = {**POLICY_PARAMS[policy.name], **policy.params}
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    n = races
    stimulus = settle_ns + rng.integers(0, window_ns, size=n, dtype=np.int64)
    m = sum(t.copies for t in takers)
    arrival = np.full((n, m), -1, dtype=np.int64)
    owner = np.full((n, m), -1, dtype=np.int32)
    col = 0
    for i, t in enumerate(takers):
        if t.profile.theta_steps:
            raise ConfigError(f"taker {t.name}: gateway congestion needs the event engine")
        joins = rng.random(n) < t.participation
        react = stimulus.copy()
        for leg in ("epsilon", "update", "reaction"):
            react += _leg(t.profile, leg, rng, n)
        path = _leg(t.profile, "transmit", rng, (n, t.copies)) + _leg(t.profile, "gateway", rng, (n, t.copies))
        cols = slice(col, col + t.copies)
        arrival[:, cols] = np.where(joins[:, None], react[:, None] + path, -1)
        owner[:, cols] = np.where(joins[:, None], i, -1)
        col += t.copies

    live = owner >= 0
    tiebreak = np.zeros((n, m), dtype=np.int64)
    name = policy.name
    if name == "fcfs":
        release = arrival.copy()
    elif name == "constant_delay":
        release = arrival + int(p["delay_ns"])
    elif name == "random_delay":
        release = arrival + rng.integers(0, int(p["max_delay_ns"]) + 1, size=(n, m), dtype=np.int64)
    elif name == "fba":
        L, phase = int(p["batch_ns"]), int(p["phase_ns"])
        release = phase + ((arrival - phase) // L + 1) * L
        tiebreak = rng.integers(0, 1 << 62, size=(n, m), dtype=np.int64)
    else:
        groups = sorted({t.group for t in takers})
        gidx = np.array([groups.index(t.group) for t in takers], dtype=np.int32)
        group_of_slot = np.where(live, gidx[np.maximum(owner, 0)], -1).astype(np.int32)
        # a uniform permutation of groups per race; its restriction to the groups present is uniform too
        rank = np.argsort(rng.random((n, len(groups))), axis=1).argsort(axis=1).astype(np.int64)
        release, tiebreak = kernels.libra_schedule(arrival, group_of_slot, rank, int(p["timer_ns"]))
    release = np.where(live, release, -1)
    slot_winner, cleared, _ = kernels.resolve_races(arrival, release, tiebreak, np.where(live, np.arange(m), -1))
    winner = np.where(slot_winner >= 0, owner[np.arange(n), np.maximum(slot_winner, 0)], -1).astype(np.int32)
    # contention counts distinct firms, not slots
    group_ids = np.array([t.group if t.firm is None else t.firm for t in takers], dtype=np.int32)
    slot_group = np.where(live, group_ids[np.maximum(owner, 0)], -1).astype(np.int32)
    _, _, contending = kernels.resolve_races(arrival, release, tiebreak, slot_group)
    labels = [t.label or t.name for t in takers]
    return BatchResult([t.name for t in takers], labels, name, stimulus, arrival, owner, winner, cleared,
                       contending)


def takers_from_config(cfg: ScenarioConfig) -> list[BatchTaker]:
    """Batch takers for a scenario the vectorized engine can express."""
    mk = cfg.makers[0]
    if mk.params.get("reprice_cancel") or int(mk.params["quantity"]) != 1:
        raise ConfigError("the batch engine supports a single-unit quote without maker cancels")
    if cfg.market_data or cfg.delta_ns:
        raise ConfigError("the batch engine does not model market-data delivery or delta")
    merge = {}
    merge_by_firm = False
    if cfg.policy.name == "libra":
        merge = {int(k): int(v) for k, v in dict(cfg.policy.params.get("firm_merge", {})).items()}
        merge_by_firm = bool(cfg.policy.params.get("merge_by_firm", False))
    labels = cfg.firm_labels()
    out = []
    for a in cfg.takers:
        if a.strategy not in _TAKERS:
            raise ConfigError(f"agent {a.name}: strategy {a.strategy.value} needs the event engine")
        if int(a.params["quantity"]) != 1 or int(a.params["aggression"]) < 0:
            raise ConfigError(f"agent {a.name}: batch takers send unit marketable orders")
        group = merge.get(a.account, a.firm if merge_by_firm else a.account)
        copies = int(a.params["copies"]) if a.strategy is Strategy.DUPLICATOR else 1
        out.append(BatchTaker(a.name, group, cfg.latency_profiles[a.name], copies,
                              float(a.params["participation"]), labels[a.name], a.firm))
    return out


def run_batch_config(cfg: ScenarioConfig, seed: Optional[int] = None) -> BatchResult:
    return run_batch(takers_from_config(cfg), cfg.policy, cfg.races, cfg.seed if seed is None else seed,
                     cfg.stimulus_window_ns, cfg.settle())
