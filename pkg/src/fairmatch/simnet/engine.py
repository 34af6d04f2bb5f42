"""Discrete-event venue: gateways, reordering policy, matching engine.

Races run in isolated slots. Each slot posts the contested maker quote,
schedules one stimulus uniformly inside the stimulus window, lets every
agent react through its latency profile and runs the event loop dry before
the next slot starts.
"""
from __future__ import annotations

import enum
import heapq
import itertools
import random
from dataclasses import dataclass, field
from typing import Any, Optional

from ..core import Nanos, Order, OrderType, Side, dumps_line, validate_order
from ..orderbook import CancelResult, LimitOrderBook
from ..policies import FBAPolicy, PolicyDecision, fba_batch_end
from .agents import AgentSpec, Plan, Quote, plan_ahead, plan_reaction, withhold_until
from .latency import LatencyProfile
from .scenario import ScenarioConfig, build_policy, config_to_dict

# same-instant ordering: arrivals join buffers before timers at that instant fire
ARRIVAL, RELEASE, STIMULUS, DELIVERY = 0, 1, 2, 3


class EventKind(enum.Enum):
    STIMULUS = "Stimulus"
    UPDATE_DELIVERY = "UpdateDelivery"
    ORDER_ARRIVAL = "OrderArrival"
    BUFFER_TIMER_FIRE = "BufferTimerFire"
    POLICY_RELEASE = "PolicyRelease"


_NO_KEY = (0, 0, 0)


class SimulationError(RuntimeError):
    pass


class EventLoop:
    """Min-heap over (at, phase, key, insertion seq)."""

    def __init__(self) -> None:
        self._heap: list = []
        self._counter = itertools.count()
        self.now: Nanos = 0
        self.processed = 0

    def schedule(self, at: Nanos, phase: int, kind: EventKind, payload: Any, key: tuple = _NO_KEY) -> None:
        if at < self.now:
            raise SimulationError(f"event {kind.value} scheduled at {at} before now={self.now}")
        heapq.heappush(self._heap, (at, phase, key, next(self._counter), kind, payload))

    def __len__(self) -> int:
        return len(self._heap)

    def run(self, handler) -> None:
        heap = self._heap
        pop = heapq.heappop
        while heap:
            at, _, _, _, kind, payload = pop(heap)
            self.now = at
            self.processed += 1
            handler(kind, payload, at)


@dataclass(slots=True)
class Message:
    """An agent message in flight; becomes an ``Order`` when the gateway stamps it."""

    agent: AgentSpec
    plan: Plan
    submitted_at: Nanos
    arrived_at: Nanos
    legs: Optional[dict] = None
    jitter: Optional[dict] = None


RACE_COLUMNS = (
    "stimulus_ns", "instrument", "policy", "firms", "arrivals_ns", "winner", "multi_participant",
    "cleared_ns", "accounts", "account_arrivals_ns", "winner_account",
)


@dataclass
class RaceRecord:
    """Outcome of one race.

    ``competitors`` are accounts with their first responsive arrival;
    ``firms`` folds them by owner (earliest arrival per firm). ``winner``
    is a firm label, ``winner_account`` the account that took the quote.
    """

    stimulus_at: Nanos
    instrument: int
    side: Side
    price: int
    quantity: int
    competitors: list[tuple[str, Nanos]]
    winner_account: str
    policy: str
    multi_participant: bool
    cleared_at: Optional[Nanos] = None
    firms: list[tuple[str, Nanos]] = field(default_factory=list)
    winner: str = ""

    def to_row(self) -> dict[str, Any]:
        return {
            "stimulus_ns": self.stimulus_at,
            "instrument": self.instrument,
            "policy": self.policy,
            "firms": ";".join(n for n, _ in self.firms),
            "arrivals_ns": ";".join(str(t) for _, t in self.firms),
            "winner": self.winner,
            "multi_participant": int(self.multi_participant),
            "cleared_ns": "" if self.cleared_at is None else self.cleared_at,
            "accounts": ";".join(n for n, _ in self.competitors),
            "account_arrivals_ns": ";".join(str(t) for _, t in self.competitors),
            "winner_account": self.winner_account,
        }


@dataclass
class _Race:
    stimulus_at: Nanos
    quote: Quote
    maker: AgentSpec
    quote_seq: Optional[int] = None
    arrivals: dict[str, Nanos] = field(default_factory=dict)
    winner: str = ""
    cleared_at: Optional[Nanos] = None
    cancel: Optional[Order] = None
    cancel_result: Optional[CancelResult] = None
    takes: list[Order] = field(default_factory=list)


@dataclass
class VenueStats:
    orders: int = 0
    forwarded: int = 0
    dropped: int = 0
    rejected: int = 0
    fills: int = 0
    cancels: int = 0
    cancels_delayed: int = 0
    max_cancel_delay_ns: int = 0
    cancel_overtakes: int = 0
    matches_prevented: int = 0
    quote_fills: int = 0
    drains: int = 0
    cross_buffer_timer_triggers: int = 0
    updates_delivered: int = 0
    bought: int = 0  # aggressor volume by taker side
    sold: int = 0


class Venue:
    """Exchange side of the simulation; the surface policies talk to."""

    def __init__(self, cfg: ScenarioConfig, log: Optional[list[str]] = None) -> None:
        self.cfg = cfg
        self.policy = build_policy(cfg.policy, cfg.seed)
        self.books = {i: LimitOrderBook(i) for i in cfg.instruments}
        self.loop = EventLoop()
        self.log = log
        self.stats = VenueStats()
        self._seq = itertools.count(1)
        self._fwd = itertools.count()
        self.fwd_index: dict[int, int] = {}
        self.owner_of: dict[int, AgentSpec] = {}
        self.tag_of: dict[int, str] = {}
        self.live: dict[tuple[str, str], int] = {}  # (agent, tag) -> seq of latest such order
        self.race: Optional[_Race] = None
        self.md_rng = random.Random(f"{cfg.seed}:market_data")
        self.profiles = cfg.latency_profiles
        self.firm_of = {a.name: a.firm for a in cfg.agents}
        self.firm_label = cfg.firm_labels()
        self._fba_end = None
        if isinstance(self.policy, FBAPolicy):
            fcfg = self.policy.cfg
            self._fba_end = lambda t: fba_batch_end(t, fcfg)

    # --- policy surface ---------------------------------------------------
    def book(self, instrument: int) -> LimitOrderBook:
        return self.books[instrument]

    def schedule_release(self, o: Order, d: PolicyDecision) -> None:
        rank = -1 if d.release_rank_hint is None else d.release_rank_hint
        self.loop.schedule(d.release_at, RELEASE, EventKind.POLICY_RELEASE, o, (rank, o.arrived_at, o.seq))

    def schedule_timer(self, key, deadline: Nanos) -> None:
        self.loop.schedule(deadline, RELEASE, EventKind.BUFFER_TIMER_FIRE, key)

    def drop(self, o: Order, reason: str) -> None:
        self.stats.dropped += 1
        if self.log is not None:
            self.log.append(dumps_line("drop", {"seq": o.seq, "at": self.loop.now, "reason": reason}))

    def on_drain(self, buf, out: list[Order], ctx, now: Nanos) -> None:
        self.stats.drains += 1
        members = {o.seq for o in buf.orders}
        starter = min(buf.orders, key=Order.sort_key)
        if buf.started_by not in members or starter.seq != buf.started_by or (
            buf.timer_deadline != starter.arrived_at + self.policy.cfg.timer_T
        ):
            self.stats.cross_buffer_timer_triggers += 1
        if self.log is not None:
            self.log.append(
                dumps_line(
                    "drain",
                    {
                        "at": now,
                        "key": buf.key.to_dict(),
                        "deadline": buf.timer_deadline,
                        "started_by": buf.started_by,
                        "permutation": list(ctx.shuffled_ids),
                        "output": [o.seq for o in out],
                    },
                )
            )

    def forward(self, o: Order, now: Nanos) -> None:
        o.forwarded_at = now
        idx = next(self._fwd)
        self.fwd_index[o.seq] = idx
        st = self.stats
        st.forwarded += 1
        log = self.log
        if log is not None:
            log.append(dumps_line("forward", {"seq": o.seq, "at": now, "policy": self.policy.name}))
        book = self.books[o.instrument]
        race = self.race
        if o.order_type is OrderType.CANCEL:
            st.cancels += 1
            delay = now - o.arrived_at
            if delay:
                st.cancels_delayed += 1
                if delay > st.max_cancel_delay_ns:
                    st.max_cancel_delay_ns = delay
            res = book.cancel(o)
            if log is not None:
                log.append(dumps_line("cancel", {"seq": o.seq, "target": o.target, "at": now, "result": res.value}))
            if race is not None and o.target == race.quote_seq and o is race.cancel:
                race.cancel_result = res
                if res is CancelResult.CANCELLED and not race.winner:
                    race.winner = race.maker.name
                    race.cleared_at = now
            if res is CancelResult.CANCELLED:
                self._book_changed(o.instrument, now)
            return
        reports = book.submit(o, now)
        if reports:
            st.fills += len(reports)
            for r in reports:
                if o.side is Side.BUY:
                    st.bought += r.quantity
                else:
                    st.sold += r.quantity
                if log is not None:
                    log.append(dumps_line("fill", r.to_dict()))
                if race is not None and r.maker_order == race.quote_seq:
                    if self.tag_of.get(o.seq) == "take":
                        st.quote_fills += 1
                    if not race.winner:
                        race.winner = self.owner_of[o.seq].name
                        race.cleared_at = now
        if reports or book.resting(o.seq) is not None:
            self._book_changed(o.instrument, now)

    # --- market data --------------------------------------------------------
    def _book_changed(self, instrument: int, now: Nanos) -> None:
        if not self.cfg.market_data:
            return
        book = self.books[instrument]
        view = (instrument, book.best_bid(), book.best_offer())
        rng = self.md_rng
        for agent in self.cfg.agents:
            prof = self.profiles[agent.name]
            t = now + self.cfg.delta_ns
            for leg in ("epsilon", "update"):
                base, j = prof.leg(leg, rng)
                t += base + j
            self.loop.schedule(t, DELIVERY, EventKind.UPDATE_DELIVERY, ("book", agent, view))

    # --- event handling -----------------------------------------------------
    def handle(self, kind: EventKind, payload: Any, at: Nanos) -> None:
        if kind is EventKind.ORDER_ARRIVAL:
            self._arrive(payload, at)
        elif kind is EventKind.POLICY_RELEASE:
            self.forward(payload, at)
        elif kind is EventKind.BUFFER_TIMER_FIRE:
            self.policy.on_timer(payload, at, self)
        elif kind is EventKind.UPDATE_DELIVERY:
            what, agent, data = payload
            if what == "stimulus":
                if self.log is not None:
                    self.log.append(dumps_line("update", {"agent": agent.name, "at": at, "what": "stimulus"}))
                for msg in data:
                    self.loop.schedule(msg.arrived_at, ARRIVAL, EventKind.ORDER_ARRIVAL, msg)
            else:
                self.stats.updates_delivered += 1
                if self.log is not None:
                    self.log.append(
                        dumps_line("update", {"agent": agent.name, "at": at, "what": "book", "view": list(data)})
                    )
        elif kind is EventKind.STIMULUS:
            if self.log is not None:
                self.log.append(dumps_line("stimulus", {"at": at, "instrument": payload[0]}))
            for agent, delivery_at, msgs in payload[1]:
                self.loop.schedule(delivery_at, DELIVERY, EventKind.UPDATE_DELIVERY, ("stimulus", agent, msgs))

    def _arrive(self, msg: Message, at: Nanos) -> None:
        plan = msg.plan
        agent = msg.agent
        seq = next(self._seq)
        race = self.race
        target = None
        if plan.target is not None:
            target = self.live.get((agent.name, plan.target))
        o = Order(
            seq=seq,
            owner=agent.participant,
            instrument=race.quote.instrument if race else self.cfg.instruments[0],
            order_type=plan.order_type,
            side=plan.side,
            limit_price=plan.price,
            quantity=plan.quantity,
            submitted_at=msg.submitted_at,
            arrived_at=at,
            target=target,
        )
        self.stats.orders += 1
        self.owner_of[seq] = agent
        self.tag_of[seq] = plan.tag
        self.live[(agent.name, plan.tag)] = seq
        if self.log is not None:
            rec = {"order": o.to_dict(), "agent": agent.name, "tag": plan.tag}
            if msg.legs is not None:
                rec["stimulus_at"] = race.stimulus_at if race else None
                rec["legs"] = msg.legs
                rec["jitter"] = msg.jitter
            self.log.append(dumps_line("arrival", rec))
        reason = validate_order(o)
        if reason is not None:
            self.stats.rejected += 1
            if self.log is not None:
                self.log.append(dumps_line("reject", {"seq": seq, "reason": reason.value}))
            return
        if race is not None:
            if plan.tag == "quote":
                race.quote_seq = seq
            elif plan.tag in ("take", "cancel"):
                prev = race.arrivals.get(agent.name)
                if prev is None or at < prev:
                    race.arrivals[agent.name] = at
                if plan.tag == "take":
                    race.takes.append(o)
                elif target == race.quote_seq:
                    race.cancel = o
        self.policy.on_arrival(o, at, self)

    # --- race setup -----------------------------------------------------------
    def post_quote(self, maker: AgentSpec, quote: Quote, at: Nanos) -> None:
        prev = self.live.get((maker.name, "quote"))
        if prev is not None and self.books[quote.instrument].resting(prev) is not None:
            cleanup = Plan(OrderType.CANCEL, quote.side, None, 0, "cleanup", target="quote")
            self.loop.schedule(at, ARRIVAL, EventKind.ORDER_ARRIVAL, Message(maker, cleanup, at, at))
        plan = Plan(OrderType.LIMIT, quote.side, quote.price, quote.quantity, "quote")
        self.loop.schedule(at, ARRIVAL, EventKind.ORDER_ARRIVAL, Message(maker, plan, at, at))

    def make_race(self, stimulus_at: Nanos, quote: Quote, agents: list[AgentSpec], rng: random.Random) -> None:
        """Plan every agent's messages for one stimulus and schedule them.

        Draw order is fixed (agents in config order; participation, update
        legs, reaction, then transmit/gateway per copy) so the scenario stream
        does not depend on the policy.
        """
        keep_legs = self.log is not None
        deliveries = []
        delta = self.cfg.delta_ns
        for agent in agents:
            prof: LatencyProfile = self.profiles[agent.name]
            u = rng.random()
            participation = float(agent.params.get("participation", 1.0))
            for plan in plan_ahead(agent, quote, stimulus_at):
                sub = plan.absolute_submit
                arr, legs, jit = _order_path(prof, sub, rng)
                self.loop.schedule(arr, ARRIVAL, EventKind.ORDER_ARRIVAL, Message(agent, plan, sub, arr))
            plans = plan_reaction(agent, quote)
            eb, ej = prof.leg("epsilon", rng)
            ub, uj = prof.leg("update", rng)
            delivery = stimulus_at + delta + eb + ej + ub + uj
            rb, rj = prof.leg("reaction", rng)
            submitted = delivery + rb + rj
            msgs = []
            for plan in plans:
                for _ in range(plan.copies):
                    arr, legs, jit = _order_path(prof, submitted, rng)
                    sub = submitted
                    if plan.tag == "take":
                        held = withhold_until(agent, arr, self._fba_end)
                        sub += held - arr
                        arr = held
                    m = Message(agent, plan, sub, arr)
                    if keep_legs:
                        legs.update(epsilon=eb, update=ub, reaction=rb, delta=delta, withheld=sub - submitted)
                        jit.update(epsilon=ej, update=uj, reaction=rj)
                        m.legs, m.jitter = legs, jit
                    msgs.append(m)
            if u >= participation:
                continue
            if msgs:
                deliveries.append((agent, delivery, msgs))
        self.loop.schedule(stimulus_at, STIMULUS, EventKind.STIMULUS, (quote.instrument, deliveries))

    def finish_race(self) -> RaceRecord:
        race = self.race
        comp = sorted(race.arrivals.items(), key=lambda kv: (kv[1], kv[0]))
        multi = False
        if race.cleared_at is not None:
            firms = {self.firm_of[name] for name, t in comp if t <= race.cleared_at}
            multi = len(firms) >= 2
        if race.cancel is not None and race.cancel.forwarded_at is not None:
            c = race.cancel
            ci = self.fwd_index[c.seq]
            # taker orders that reached the gateway first but reached the book later
            overtook = [
                o for o in race.takes
                if o.sort_key() < c.sort_key() and self.fwd_index.get(o.seq, -1) > ci
            ]
            if overtook:
                self.stats.cancel_overtakes += 1
                if race.cancel_result is CancelResult.CANCELLED:
                    self.stats.matches_prevented += 1
        firms: dict[str, Nanos] = {}
        for name, t in comp:
            firms.setdefault(self.firm_label[name], t)
        q = race.quote
        self.fwd_index.clear()
        self.owner_of.clear()
        self.tag_of.clear()
        return RaceRecord(
            race.stimulus_at, q.instrument, q.side, q.price, q.quantity, comp, race.winner,
            self.policy.name, multi, race.cleared_at, list(firms.items()),
            self.firm_label[race.winner] if race.winner else "",
        )


def _order_path(prof: LatencyProfile, submitted: Nanos, rng: random.Random) -> tuple[Nanos, dict, dict]:
    tb, tj = prof.leg("transmit", rng)
    gb, gj = prof.leg("gateway", rng, at=submitted + tb + tj)
    return submitted + tb + tj + gb + gj, {"transmit": tb, "gateway": gb}, {"transmit": tj, "gateway": gj}


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    races: list[RaceRecord]
    stats: VenueStats
    log: Optional[list[str]]
    policy: dict
    books: list[dict] = field(default_factory=list)

    def win_counts(self, by: str = "account") -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.races:
            w = r.winner_account if by == "account" else r.winner
            out[w] = out.get(w, 0) + 1
        return out

    def win_rate(self, name: str, by: str = "account") -> float:
        return self.win_counts(by).get(name, 0) / len(self.races)

    def rows(self) -> list[dict[str, Any]]:
        return [r.to_row() for r in self.races]


def run_scenario(cfg: ScenarioConfig, seed: Optional[int] = None, record_log: Optional[bool] = None) -> ScenarioResult:
    """Run every race of ``cfg``; deterministic in (cfg, seed)."""
    if seed is not None and seed != cfg.seed:
        cfg = cfg.replace(seed=seed)
    keep = cfg.record_log if record_log is None else record_log
    log: Optional[list[str]] = [] if keep else None
    venue = Venue(cfg, log)
    if log is not None:
        log.append(dumps_line("header", {"config": config_to_dict(cfg), "policy": venue.policy.describe()}))
    rng = random.Random(f"{cfg.seed}:scenario")
    maker = cfg.makers[0]
    side = Side.BUY if maker.params["side"] == "buy" else Side.SELL
    spacing = cfg.spacing()
    settle = cfg.settle()
    window = cfg.stimulus_window_ns
    n_inst = len(cfg.instruments)
    records = []
    loop = venue.loop
    for i in range(cfg.races):
        start = i * spacing
        instrument = cfg.instruments[i % n_inst]
        quote = Quote(instrument, side, int(maker.params["price"]), int(maker.params["quantity"]))
        stimulus_at = start + settle + rng.randrange(window)
        venue.race = _Race(stimulus_at, quote, maker)
        venue.post_quote(maker, quote, start)
        venue.make_race(stimulus_at, quote, cfg.agents, rng)
        loop.run(venue.handle)
        if loop.now >= start + spacing:
            raise SimulationError(f"race {i} ran past its slot (t={loop.now}); increase race_spacing_ns")
        rec = venue.finish_race()
        records.append(rec)
        venue.race = None
        if log is not None:
            log.append(dumps_line("race", rec.to_row()))
    books = [venue.books[i].snapshot() for i in cfg.instruments]
    if log is not None:
        log.append(dumps_line("snapshot", {"at": loop.now, "books": books}))
    return ScenarioResult(cfg, records, venue.stats, log, venue.policy.describe(), books)
