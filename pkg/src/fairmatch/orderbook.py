"""Continuous limit order book with price-time priority."""
from __future__ import annotations

import bisect
import enum
from collections import deque
from typing import Optional

from .core import ExecutionReport, Nanos, Order, OrderType, Side, Ticks


class CancelResult(enum.Enum):
    CANCELLED = "cancelled"
    TOO_LATE = "too-late"


class LimitOrderBook:
    """Resting bids/offers for one instrument.

    Levels hold orders in the sequence they were forwarded to the book, which
    is the time priority. Fills happen at the resting order's price.
    """

    def __init__(self, instrument: int) -> None:
        self.instrument = instrument
        self._levels: dict[Side, dict[Ticks, deque[Order]]] = {Side.BUY: {}, Side.SELL: {}}
        # ascending keys; bids stored negated so index 0 is always the best level
        self._keys: dict[Side, list[int]] = {Side.BUY: [], Side.SELL: []}
        self.open: dict[int, int] = {}
        self._resting: dict[int, Order] = {}

    def best_bid(self) -> Optional[Ticks]:
        keys = self._keys[Side.BUY]
        return -keys[0] if keys else None

    def best_offer(self) -> Optional[Ticks]:
        keys = self._keys[Side.SELL]
        return keys[0] if keys else None

    def best(self, side: Side) -> Optional[Ticks]:
        return self.best_bid() if side is Side.BUY else self.best_offer()

    def is_marketable(self, o: Order) -> bool:
        """Would ``o`` cross the spread against the current book?"""
        contra = self._keys[o.side.opposite]
        if not contra:
            return False
        if o.order_type is OrderType.MARKET:
            return True
        if o.side is Side.BUY:
            return o.limit_price >= contra[0]
        return o.limit_price <= -contra[0]

    def submit(self, o: Order, at: Optional[Nanos] = None) -> list[ExecutionReport]:
        if o.instrument != self.instrument:
            raise ValueError(f"order {o.seq} for instrument {o.instrument} sent to book {self.instrument}")
        if o.order_type is OrderType.CANCEL:
            raise ValueError("cancel messages go through cancel()")
        now = o.forwarded_at if at is None else at
        contra_side = o.side.opposite
        contra_keys = self._keys[contra_side]
        contra_levels = self._levels[contra_side]
        sign = 1 if contra_side is Side.SELL else -1
        is_market = o.order_type is OrderType.MARKET
        remaining = o.quantity
        reports: list[ExecutionReport] = []
        while remaining and contra_keys:
            price = sign * contra_keys[0]
            if not is_market and (price > o.limit_price if o.side is Side.BUY else price < o.limit_price):
                break
            queue = contra_levels[price]
            maker = queue[0]
            left = self.open[maker.seq]
            fill = left if left < remaining else remaining
            reports.append(ExecutionReport(o.seq, maker.seq, price, fill, now))
            remaining -= fill
            if fill == left:
                queue.popleft()
                del self.open[maker.seq]
                del self._resting[maker.seq]
                if not queue:
                    del contra_levels[price]
                    contra_keys.pop(0)
            else:
                self.open[maker.seq] = left - fill
        if remaining and o.order_type is OrderType.LIMIT:
            self._rest(o, remaining)
        return reports

    def _rest(self, o: Order, qty: int) -> None:
        levels = self._levels[o.side]
        queue = levels.get(o.limit_price)
        if queue is None:
            queue = levels[o.limit_price] = deque()
            key = o.limit_price if o.side is Side.SELL else -o.limit_price
            bisect.insort(self._keys[o.side], key)
        queue.append(o)
        self.open[o.seq] = qty
        self._resting[o.seq] = o

    def cancel(self, c: Order) -> CancelResult:
        """Remove the target if it still rests; otherwise it was already filled (or never rested)."""
        target = self._resting.pop(c.target, None) if c.target is not None else None
        if target is None:
            return CancelResult.TOO_LATE
        del self.open[target.seq]
        levels = self._levels[target.side]
        queue = levels[target.limit_price]
        queue.remove(target)
        if not queue:
            del levels[target.limit_price]
            key = target.limit_price if target.side is Side.SELL else -target.limit_price
            keys = self._keys[target.side]
            del keys[bisect.bisect_left(keys, key)]
        return CancelResult.CANCELLED

    def resting(self, seq: int) -> Optional[Order]:
        return self._resting.get(seq)

    def levels(self, side: Side) -> list[tuple[Ticks, list[Order]]]:
        """Levels best-first with their queues (front first)."""
        sign = 1 if side is Side.SELL else -1
        return [(sign * k, list(self._levels[side][sign * k])) for k in self._keys[side]]

    def snapshot(self) -> dict:
        """JSON-ready view: levels with aggregate open quantity and order count."""

        def agg(side: Side) -> list[list[int]]:
            return [
                [price, sum(self.open[o.seq] for o in queue), len(queue)]
                for price, queue in self.levels(side)
            ]

        return {"instrument": self.instrument, "bids": agg(Side.BUY), "offers": agg(Side.SELL)}

    def check_invariants(self) -> None:
        bid, offer = self.best_bid(), self.best_offer()
        if bid is not None and offer is not None and bid >= offer:
            raise AssertionError(f"crossed book: bid {bid} >= offer {offer}")
        for side in Side:
            for price, queue in self._levels[side].items():
                if not queue:
                    raise AssertionError(f"empty level {side.value} {price}")
        if any(q <= 0 for q in self.open.values()):
            raise AssertionError("non-positive open quantity")
