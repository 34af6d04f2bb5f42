"""Libra: order-triggered buffering with per-firm, shuffled round-robin draining.

Every non-cancel order lands in a buffer keyed by instrument, side and
either "marketable" (price ``None``) or its limit price. The first order
into an empty buffer starts that buffer's timer; later orders never extend
it. When the timer fires the buffer is drained: orders are grouped by firm,
each group keeps arrival order, and the groups are visited round-robin in a
freshly shuffled firm order.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional, Sequence

from . import kernels
from .core import Nanos, Order, OrderType, ParticipantId, Side, Ticks
from .policies import Policy


@dataclass(frozen=True, slots=True)
class BufferKey:
    instrument: int
    side: Side
    price: Optional[Ticks] = None  # None marks the marketable buffer

    @property
    def marketable(self) -> bool:
        return self.price is None

    def to_dict(self) -> dict:
        return {"instrument": self.instrument, "side": self.side.value, "price": self.price}


@dataclass(slots=True)
class LibraBuffer:
    key: BufferKey
    orders: list[Order]
    timer_deadline: Nanos
    started_by: int  # seq of the order that started the timer


@dataclass(frozen=True)
class LibraConfig:
    timer_T: Nanos = 1_000_000
    firm_merge: Mapping[int, int] = field(default_factory=dict)
    rng_seed: int = 0
    cancel_exemption: bool = True
    # prose reading: IOCs never open a buffer (they may still join a running one)
    ioc_never_starts_timer: bool = False
    merge_by_firm: bool = False

    def __post_init__(self) -> None:
        if self.timer_T <= 0:
            raise ValueError("timer_T must be > 0")

    def group_of(self, owner: ParticipantId) -> int:
        """Draining identity of an account: merged firm if known, else the account."""
        if owner.id in self.firm_merge:
            return self.firm_merge[owner.id]
        return owner.firm if self.merge_by_firm else owner.id


@dataclass
class DrainContext:
    per_participant: dict[int, list[Order]]
    shuffled_ids: list[int]
    id_universe: list[int]


class BookView(NamedTuple):
    best_bid: Optional[Ticks]
    best_offer: Optional[Ticks]


class Outcome(enum.Enum):
    FORWARDED = "forwarded"
    BUFFERED = "buffered"
    DROPPED = "dropped"


class InterceptResult(NamedTuple):
    outcome: Outcome
    key: Optional[BufferKey] = None
    started_timer: bool = False
    reason: str = ""


class LibraState:
    """Live buffers, at most one per key."""

    def __init__(self) -> None:
        self.buffers: dict[BufferKey, LibraBuffer] = {}

    def __len__(self) -> int:
        return len(self.buffers)

    def pop(self, key: BufferKey) -> LibraBuffer:
        return self.buffers.pop(key)


def classify(o: Order, view: BookView) -> Optional[BufferKey]:
    """Buffer key for a non-cancel order, or ``None`` for a non-marketable IOC
    or a market order facing an empty book."""
    if o.side is Side.BUY:
        if view.best_offer is not None and (o.order_type is OrderType.MARKET or o.limit_price >= view.best_offer):
            return BufferKey(o.instrument, Side.BUY)
    elif view.best_bid is not None and (o.order_type is OrderType.MARKET or o.limit_price <= view.best_bid):
        return BufferKey(o.instrument, Side.SELL)
    if o.order_type in (OrderType.IOC, OrderType.MARKET):
        return None
    return BufferKey(o.instrument, o.side, o.limit_price)


def libra_intercept(o: Order, view: BookView, state: LibraState, cfg: LibraConfig) -> InterceptResult:
    if o.order_type is OrderType.CANCEL:
        if cfg.cancel_exemption:
            return InterceptResult(Outcome.FORWARDED)
        # without the exemption a cancel waits with the orders that would hit its target
        key = BufferKey(o.instrument, o.side.opposite)
    else:
        key = classify(o, view)
        if key is None:
            reason = "market order on empty book" if o.order_type is OrderType.MARKET else "non-marketable IOC"
            return InterceptResult(Outcome.DROPPED, reason=reason)
    buf = state.buffers.get(key)
    if buf is not None:
        buf.orders.append(o)
        return InterceptResult(Outcome.BUFFERED, key)
    if cfg.ioc_never_starts_timer and o.order_type is OrderType.IOC:
        return InterceptResult(Outcome.FORWARDED, key)
    state.buffers[key] = LibraBuffer(key, [o], o.arrived_at + cfg.timer_T, o.seq)
    return InterceptResult(Outcome.BUFFERED, key, started_timer=True)


SMALL_DRAIN = 16


def drain_context(orders: Sequence[Order], cfg: LibraConfig, perm: Sequence[int]) -> DrainContext:
    per: dict[int, list[Order]] = {}
    for o in sorted(orders, key=Order.sort_key):
        per.setdefault(cfg.group_of(o.owner), []).append(o)
    return DrainContext(per, list(perm), sorted(per))


def libra_drain(
    b: LibraBuffer,
    cfg: LibraConfig,
    rng: Optional[random.Random] = None,
    perm: Optional[Sequence[int]] = None,
) -> tuple[list[Order], DrainContext]:
    """Forwarding sequence for a buffer whose timer fired.

    ``perm`` fixes the firm order (tests enumerate it); otherwise it is a
    shuffle of the firms present drawn from ``rng``.
    """
    ordered = sorted(b.orders, key=Order.sort_key)
    groups = [cfg.group_of(o.owner) for o in ordered]
    if perm is None and len(ordered) == 1:
        return ordered, DrainContext({groups[0]: ordered}, groups[:], groups[:])
    firms = sorted(set(groups))
    if perm is None:
        perm = list(firms)
        if len(perm) > 1:
            (rng or random).shuffle(perm)
    elif sorted(perm) != firms:
        raise ValueError(f"permutation {list(perm)} does not cover firms {firms}")
    if len(firms) == 1:
        out = ordered
    elif len(ordered) <= SMALL_DRAIN:
        # array round trip costs more than the loop for a handful of orders
        queues: dict[int, list[Order]] = {f: [] for f in perm}
        for o, g in zip(ordered, groups):
            queues[g].append(o)
        out = []
        for k in range(max(len(q) for q in queues.values())):
            out.extend(queues[f][k] for f in perm if k < len(queues[f]))
    else:
        index = {f: i for i, f in enumerate(firms)}
        idx = kernels.rr_drain_order([index[g] for g in groups], [index[f] for f in perm])
        out = [ordered[i] for i in idx.tolist()]
    ctx = DrainContext({}, list(perm), firms)
    for o, g in zip(ordered, groups):
        ctx.per_participant.setdefault(g, []).append(o)
    return out, ctx


def placeholding_resistance_check(
    drained: Sequence[Order], attacker: int, honest: int, cfg: Optional[LibraConfig] = None
) -> bool:
    """True iff the honest firm's first order is forwarded before the
    attacker's real (second-oldest) order."""
    cfg = cfg or LibraConfig()
    att = sorted((o for o in drained if cfg.group_of(o.owner) == attacker), key=Order.sort_key)
    if len(att) < 2:
        raise ValueError("attacker needs a placeholder and a real order in the buffer")
    real = att[1]
    pos = {id(o): i for i, o in enumerate(drained)}
    honest_pos = [pos[id(o)] for o in drained if cfg.group_of(o.owner) == honest]
    if not honest_pos:
        raise ValueError("honest firm has no order in the buffer")
    return min(honest_pos) < pos[id(real)]


class LibraPolicy(Policy):
    name = "libra"

    def __init__(self, cfg: LibraConfig) -> None:
        self.cfg = cfg
        self.state = LibraState()
        self.rng = random.Random(f"{cfg.rng_seed}:libra")

    def on_arrival(self, o: Order, now: Nanos, venue) -> None:
        book = venue.book(o.instrument)
        res = libra_intercept(o, BookView(book.best_bid(), book.best_offer()), self.state, self.cfg)
        if res.outcome is Outcome.FORWARDED:
            venue.forward(o, now)
        elif res.outcome is Outcome.DROPPED:
            venue.drop(o, res.reason)
        elif res.started_timer:
            venue.schedule_timer(res.key, self.state.buffers[res.key].timer_deadline)

    def on_timer(self, key: BufferKey, now: Nanos, venue) -> None:
        buf = self.state.pop(key)
        out, ctx = libra_drain(buf, self.cfg, self.rng)
        venue.on_drain(buf, out, ctx, now)
        for o in out:
            venue.forward(o, now)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "timer_ns": self.cfg.timer_T,
            "cancel_exemption": self.cfg.cancel_exemption,
            "ioc_never_starts_timer": self.cfg.ioc_never_starts_timer,
        }
