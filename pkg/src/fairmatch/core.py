"""Shared vocabulary: orders, execution reports, time and price units.

Time is integer nanoseconds since the simulation epoch and prices are
integer ticks. Nothing in here touches floats.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Any, Optional

Nanos = int
Ticks = int

NS_PER_US = 1_000
NS_PER_MS = 1_000_000


def ms(value: float) -> Nanos:
    """Milliseconds to integer nanoseconds (rounded)."""
    return int(round(value * NS_PER_MS))


def us(value: float) -> Nanos:
    return int(round(value * NS_PER_US))


class OrderType(enum.Enum):
    MARKET = "Market"
    LIMIT = "Limit"
    CANCEL = "Cancel"
    IOC = "IOC"

    __hash__ = object.__hash__  # members are singletons; skips Enum's Python-level hash


class Side(enum.Enum):
    BUY = "Buy"
    SELL = "Sell"

    __hash__ = object.__hash__

    @property
    def opposite(self) -> "Side":
        return Side.SELL if self is Side.BUY else Side.BUY


class Rejection(enum.Enum):
    ZERO_QUANTITY = "zero quantity"
    MISSING_PRICE = "missing price"
    UNEXPECTED_PRICE = "unexpected price"
    MISSING_CANCEL_TARGET = "missing cancel target"
    UNEXPECTED_QUANTITY = "unexpected quantity"
    TIMESTAMP_INVERSION = "timestamp inversion"
    NEGATIVE_TIMESTAMP = "negative timestamp"


@dataclass(frozen=True)
class ParticipantId:
    """A trading account. ``firm`` is shared by Sybil accounts of one owner."""

    id: int
    firm: int

    def to_dict(self) -> dict[str, int]:
        return {"id": self.id, "firm": self.firm}

    @classmethod
    def from_dict(cls, d: dict[str, int]) -> "ParticipantId":
        return cls(int(d["id"]), int(d["firm"]))


@dataclass(slots=True)
class Order:
    """One order message.

    ``seq`` is assigned by the exchange on arrival and breaks ties between
    equal ``arrived_at`` values. ``forwarded_at`` is stamped once, when a
    policy releases the order to the matching engine; nothing else mutates.
    """

    seq: int
    owner: ParticipantId
    instrument: int
    order_type: OrderType
    side: Side
    limit_price: Optional[Ticks]
    quantity: int
    submitted_at: Nanos
    arrived_at: Nanos
    target: Optional[int] = None
    forwarded_at: Optional[Nanos] = None

    @property
    def is_cancel(self) -> bool:
        return self.order_type is OrderType.CANCEL

    def sort_key(self) -> tuple[int, int]:
        return (self.arrived_at, self.seq)

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "owner": self.owner.to_dict(),
            "instrument": self.instrument,
            "order_type": self.order_type.value,
            "side": self.side.value,
            "limit_price": self.limit_price,
            "quantity": self.quantity,
            "target": self.target,
            "submitted_at": self.submitted_at,
            "arrived_at": self.arrived_at,
            "forwarded_at": self.forwarded_at,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Order":
        return cls(
            seq=int(d["seq"]),
            owner=ParticipantId.from_dict(d["owner"]),
            instrument=int(d["instrument"]),
            order_type=OrderType(d["order_type"]),
            side=Side(d["side"]),
            limit_price=d.get("limit_price"),
            quantity=int(d.get("quantity") or 0),
            target=d.get("target"),
            submitted_at=int(d["submitted_at"]),
            arrived_at=int(d["arrived_at"]),
            forwarded_at=d.get("forwarded_at"),
        )


@dataclass(frozen=True, slots=True)
class ExecutionReport:
    taker_order: int
    maker_order: int
    price: Ticks
    quantity: int
    at: Nanos

    def to_dict(self) -> dict[str, int]:
        return {
            "taker_order": self.taker_order,
            "maker_order": self.maker_order,
            "price": self.price,
            "quantity": self.quantity,
            "at": self.at,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExecutionReport":
        return cls(**{k: int(d[k]) for k in ("taker_order", "maker_order", "price", "quantity", "at")})


def validate_order(o: Order) -> Optional[Rejection]:
    """Return ``None`` if every order invariant holds, else the first violation."""
    if o.submitted_at < 0 or o.arrived_at < 0:
        return Rejection.NEGATIVE_TIMESTAMP
    if o.arrived_at < o.submitted_at:
        return Rejection.TIMESTAMP_INVERSION
    if o.forwarded_at is not None and o.forwarded_at < o.arrived_at:
        return Rejection.TIMESTAMP_INVERSION
    if o.order_type is OrderType.CANCEL:
        if o.target is None:
            return Rejection.MISSING_CANCEL_TARGET
        if o.quantity:
            return Rejection.UNEXPECTED_QUANTITY
        return None
    if o.quantity <= 0:
        return Rejection.ZERO_QUANTITY
    if o.order_type is OrderType.MARKET:
        if o.limit_price is not None:
            return Rejection.UNEXPECTED_PRICE
    elif o.limit_price is None:
        return Rejection.MISSING_PRICE
    return None


def dumps_line(kind: str, payload: dict[str, Any]) -> str:
    """One JSON-lines record; keys sorted so logs are byte-stable."""
    return json.dumps({"kind": kind, **payload}, sort_keys=True, separators=(",", ":"))
