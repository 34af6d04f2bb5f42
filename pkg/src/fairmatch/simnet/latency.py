"""Per-participant delay taxonomy.

Update path: exchange publishes -> per-participant offset (epsilon) ->
network path (U). Order path: reaction (L) -> transmission (zeta) ->
gateway processing (theta). Each leg may carry its own additive jitter.
"""
from __future__ import annotations

import bisect
import random
from dataclasses import dataclass, field
from typing import Optional

from ..core import Nanos

UPDATE_LEGS = ("epsilon", "update")
ORDER_LEGS = ("reaction", "transmit", "gateway")
LEGS = UPDATE_LEGS + ORDER_LEGS


@dataclass(frozen=True)
class Jitter:
    """``none``, ``uniform(a, b)`` or ``truncnormal(mu, sigma, lo, hi)``, in ns."""

    kind: str = "none"
    a: float = 0.0
    b: float = 0.0
    mu: float = 0.0
    sigma: float = 0.0
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("none", "uniform", "truncnormal"):
            raise ValueError(f"unknown jitter kind {self.kind!r}")
        if self.kind == "uniform" and self.b < self.a:
            raise ValueError("uniform jitter needs a <= b")
        if self.kind == "truncnormal" and (self.sigma <= 0 or self.hi < self.lo):
            raise ValueError("truncnormal jitter needs sigma > 0 and lo <= hi")

    @classmethod
    def from_dict(cls, d: dict) -> "Jitter":
        d = dict(d)
        kind = d.pop("dist", d.pop("kind", "none"))
        return cls(kind=kind, **{k: float(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        fields = {"none": (), "uniform": ("a", "b"), "truncnormal": ("mu", "sigma", "lo", "hi")}[self.kind]
        return {"dist": self.kind, **{f: getattr(self, f) for f in fields}}

    @property
    def upper(self) -> float:
        return {"none": 0.0, "uniform": self.b, "truncnormal": self.hi}[self.kind]

    def draw(self, rng: random.Random) -> int:
        if self.kind == "none":
            return 0
        if self.kind == "uniform":
            return int(round(rng.uniform(self.a, self.b)))
        while True:
            x = rng.gauss(self.mu, self.sigma)
            if self.lo <= x <= self.hi:
                return int(round(x))


NO_JITTER = Jitter()


@dataclass(frozen=True)
class LatencyProfile:
    update_offset_epsilon: Nanos = 0
    update_path_U: Nanos = 0
    reaction_L: Nanos = 0
    transmit_zeta: Nanos = 0
    gateway_theta: Nanos = 0
    jitter: dict[str, Jitter] = field(default_factory=dict)
    # gateway congestion: (from_ns, extra_ns) steps, absolute simulation time
    theta_steps: tuple[tuple[Nanos, Nanos], ...] = ()

    def __post_init__(self) -> None:
        for leg in LEGS:
            if self.base(leg) < 0:
                raise ValueError(f"latency leg {leg} must be >= 0")
        for leg in self.jitter:
            if leg not in LEGS:
                raise ValueError(f"jitter on unknown leg {leg!r}")
        if any(extra < 0 for _, extra in self.theta_steps):
            raise ValueError("gateway congestion steps must be >= 0")
        object.__setattr__(self, "theta_steps", tuple(sorted(self.theta_steps)))
        object.__setattr__(self, "_bases", {leg: self.base(leg) for leg in LEGS})

    def base(self, leg: str) -> Nanos:
        return {
            "epsilon": self.update_offset_epsilon,
            "update": self.update_path_U,
            "reaction": self.reaction_L,
            "transmit": self.transmit_zeta,
            "gateway": self.gateway_theta,
        }[leg]

    def congestion(self, t: Nanos) -> Nanos:
        steps = self.theta_steps
        if not steps:
            return 0
        i = bisect.bisect_right(steps, (t, float("inf"))) - 1
        return steps[i][1] if i >= 0 else 0

    def leg(self, leg: str, rng: random.Random, at: Optional[Nanos] = None) -> tuple[Nanos, int]:
        """(base incl. congestion, jitter draw) for one leg; a leg never goes negative."""
        base = self._bases[leg]
        if at is not None and self.theta_steps and leg == "gateway":
            base += self.congestion(at)
        jit = self.jitter.get(leg)
        if jit is None:
            return base, 0
        j = jit.draw(rng)
        if base + j < 0:
            j = -base
        return base, j

    def total(self) -> Nanos:
        """Stimulus-to-arrival latency without jitter or congestion."""
        return sum(self.base(leg) for leg in LEGS)

    def max_total(self) -> Nanos:
        extra = max((e for _, e in self.theta_steps), default=0)
        return self.total() + extra + sum(int(self.jitter.get(leg, NO_JITTER).upper) + 1 for leg in LEGS)

    def to_dict(self) -> dict:
        d = {
            "epsilon_ns": self.update_offset_epsilon,
            "update_ns": self.update_path_U,
            "reaction_ns": self.reaction_L,
            "transmit_ns": self.transmit_zeta,
            "gateway_ns": self.gateway_theta,
        }
        if self.jitter:
            d["jitter"] = {leg: j.to_dict() for leg, j in sorted(self.jitter.items())}
        if self.theta_steps:
            d["gateway_steps"] = [list(s) for s in self.theta_steps]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LatencyProfile":
        jitter = d.get("jitter", {})
        parsed = {}
        for leg, spec in jitter.items():
            if leg == "all":
                for name in LEGS:
                    parsed.setdefault(name, Jitter.from_dict(spec))
            else:
                parsed[leg] = Jitter.from_dict(spec)
        return cls(
            update_offset_epsilon=int(d.get("epsilon_ns", 0)),
            update_path_U=int(d.get("update_ns", 0)),
            reaction_L=int(d.get("reaction_ns", 0)),
            transmit_zeta=int(d.get("transmit_ns", 0)),
            gateway_theta=int(d.get("gateway_ns", 0)),
            jitter=parsed,
            theta_steps=tuple((int(a), int(b)) for a, b in d.get("gateway_steps", [])),
        )
