"""Participant strategies.

Agents do not run their own loops. When a race is set up each agent plans
the messages it will send (and when), and the venue replays them as events.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from ..core import Nanos, OrderType, ParticipantId, Side


class Strategy(enum.Enum):
    PASSIVE_MAKER = "passive_maker"
    REACTIVE_TAKER = "reactive_taker"
    SNIPER = "sniper"
    PLACEHOLDER = "placeholder"
    DUPLICATOR = "duplicator"
    BANG_THE_CLOSE = "bang_the_close"


_TAKER_PARAMS = {"quantity": 1, "aggression": 0, "order_type": "ioc", "participation": 1.0}

PARAMS: dict[Strategy, dict[str, Any]] = {
    Strategy.PASSIVE_MAKER: {"side": "sell", "price": 100, "quantity": 1, "reprice_cancel": False},
    Strategy.REACTIVE_TAKER: dict(_TAKER_PARAMS),
    Strategy.SNIPER: dict(_TAKER_PARAMS),
    Strategy.DUPLICATOR: {**_TAKER_PARAMS, "copies": 5},
    Strategy.PLACEHOLDER: {**_TAKER_PARAMS, "lead_ns": 2_900_000, "placeholder_price": 1, "placeholder_qty": 1},
    Strategy.BANG_THE_CLOSE: {**_TAKER_PARAMS, "margin_ns": 1_000},
}


class AgentConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AgentSpec:
    name: str
    account: int
    firm: int
    strategy: Strategy
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        allowed = PARAMS[self.strategy]
        unknown = set(self.params) - set(allowed)
        if unknown:
            raise AgentConfigError(
                f"agent {self.name}: unknown params {sorted(unknown)} for strategy {self.strategy.value}"
            )
        merged = {**allowed, **self.params}
        if self.strategy is not Strategy.PASSIVE_MAKER:
            if merged["order_type"] not in ("ioc", "market", "limit"):
                raise AgentConfigError(f"agent {self.name}: order_type must be ioc, market or limit")
            if not 0.0 <= float(merged["participation"]) <= 1.0:
                raise AgentConfigError(f"agent {self.name}: participation must be within [0, 1]")
        elif merged["side"] not in ("buy", "sell"):
            raise AgentConfigError(f"agent {self.name}: side must be buy or sell")
        if int(merged["quantity"]) <= 0:
            raise AgentConfigError(f"agent {self.name}: quantity must be > 0")
        if self.strategy is Strategy.DUPLICATOR and int(merged["copies"]) < 1:
            raise AgentConfigError(f"agent {self.name}: copies must be >= 1")
        if self.strategy is Strategy.PLACEHOLDER and int(merged["lead_ns"]) < 0:
            raise AgentConfigError(f"agent {self.name}: lead_ns must be >= 0")
        object.__setattr__(self, "params", merged)

    @property
    def participant(self) -> ParticipantId:
        return ParticipantId(self.account, self.firm)

    @property
    def is_maker(self) -> bool:
        return self.strategy is Strategy.PASSIVE_MAKER

    def to_dict(self) -> dict:
        return {"name": self.name, "strategy": self.strategy.value, "account": self.account, "firm": self.firm,
                **self.params}

    @classmethod
    def from_dict(cls, d: dict, index: int) -> "AgentSpec":
        d = dict(d)
        try:
            name = str(d.pop("name"))
            strategy = Strategy(d.pop("strategy"))
        except KeyError as exc:
            raise AgentConfigError(f"agent #{index}: missing {exc.args[0]!r}") from None
        except ValueError:
            raise AgentConfigError(f"agent #{index}: unknown strategy") from None
        account = int(d.pop("account", index + 1))
        firm = int(d.pop("firm", account))
        return cls(name, account, firm, strategy, d)


@dataclass(frozen=True, slots=True)
class Quote:
    instrument: int
    side: Side
    price: int
    quantity: int


@dataclass(frozen=True, slots=True)
class Plan:
    """One message an agent will send.

    ``offset`` is relative to the agent's update delivery unless
    ``absolute_submit`` is set (orders sent ahead of the stimulus).
    """

    order_type: OrderType
    side: Side
    price: Optional[int]
    quantity: int
    tag: str
    target: Optional[str] = None  # "quote" or "placeholder"
    copies: int = 1
    absolute_submit: Optional[Nanos] = None


ORDER_TYPES = {"ioc": OrderType.IOC, "market": OrderType.MARKET, "limit": OrderType.LIMIT}


def plan_reaction(spec: AgentSpec, quote: Quote) -> list[Plan]:
    """Messages sent in reaction to the stimulus (submitted after delivery + reaction)."""
    p = spec.params
    if spec.is_maker:
        if p["reprice_cancel"]:
            return [Plan(OrderType.CANCEL, quote.side, None, 0, "cancel", target="quote")]
        return []
    otype = ORDER_TYPES[p["order_type"]]
    side = quote.side.opposite
    price = None
    if otype is not OrderType.MARKET:
        aggression = int(p["aggression"])
        price = quote.price + aggression if side is Side.BUY else quote.price - aggression
    copies = int(p["copies"]) if spec.strategy is Strategy.DUPLICATOR else 1
    plans = [Plan(otype, side, price, int(p["quantity"]), "take", copies=copies)]
    if spec.strategy is Strategy.PLACEHOLDER:
        plans.append(Plan(OrderType.CANCEL, side, None, 0, "cancel_placeholder", target="placeholder"))
    return plans


def plan_ahead(spec: AgentSpec, quote: Quote, stimulus_at: Nanos) -> list[Plan]:
    """Messages sent before the stimulus (the placeholder order)."""
    if spec.strategy is not Strategy.PLACEHOLDER:
        return []
    p = spec.params
    side = quote.side.opposite
    return [
        Plan(
            OrderType.LIMIT,
            side,
            int(p["placeholder_price"]),
            int(p["placeholder_qty"]),
            "placeholder",
            absolute_submit=stimulus_at - int(p["lead_ns"]),
        )
    ]


def withhold_until(spec: AgentSpec, natural_arrival: Nanos, batch_end: Optional[Callable[[Nanos], Nanos]]) -> Nanos:
    """Bang-the-close timing: hold the order so it lands just before the
    batch boundary that would otherwise include it."""
    if spec.strategy is not Strategy.BANG_THE_CLOSE or batch_end is None:
        return natural_arrival
    target = batch_end(natural_arrival) - max(1, int(spec.params["margin_ns"]))
    return max(target, natural_arrival)
