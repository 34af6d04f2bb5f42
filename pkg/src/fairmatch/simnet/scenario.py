"""Scenario configuration: TOML schema, validation and policy construction."""
from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..libra import LibraConfig, LibraPolicy
from ..policies import (
    ConstantDelayConfig,
    ConstantDelayPolicy,
    FbaConfig,
    FBAPolicy,
    FCFSPolicy,
    Policy,
    RandomDelayConfig,
    RandomDelayPolicy,
)
from .agents import AgentConfigError, AgentSpec
from .latency import LatencyProfile

POLICY_PARAMS: dict[str, dict[str, Any]] = {
    "fcfs": {},
    "constant_delay": {"delay_ns": 0, "takers_only": False},
    "random_delay": {"max_delay_ns": 0},
    "fba": {"batch_ns": 1_000_000, "phase_ns": 0},
    "libra": {
        "timer_ns": 1_000_000,
        "cancel_exemption": True,
        "ioc_never_starts_timer": False,
        "merge_by_firm": False,
        "firm_merge": {},
    },
}

DEFAULT_WINDOW_NS = 30_000_000  # multiple of 1, 2, 3, 5 and 6 ms: stimulus phase is exactly uniform on those grids


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.message = message
        self.line = line
        self.source = source
        where = ""
        if source:
            where = f"{source}:{line}: " if line else f"{source}: "
        elif line:
            where = f"line {line}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class PolicySpec:
    name: str
    params: dict[str, Any] = field(default_factory=dict)

    def max_hold(self) -> int:
        p = {**POLICY_PARAMS.get(self.name, {}), **self.params}
        return {
            "fcfs": 0,
            "constant_delay": int(p.get("delay_ns", 0)),
            "random_delay": int(p.get("max_delay_ns", 0)),
            "fba": int(p.get("batch_ns", 0)),
            # a cancel without exemption can chain one extra buffer
            "libra": 2 * int(p.get("timer_ns", 0)),
        }[self.name]


@dataclass(frozen=True)
class Outputs:
    event_log: Optional[str] = None
    races_csv: Optional[str] = None
    summary: Optional[str] = None


@dataclass
class ScenarioConfig:
    name: str
    policy: PolicySpec
    instruments: list[int]
    agents: list[AgentSpec]
    latency_profiles: dict[str, LatencyProfile]
    races: int
    seed: int = 0
    outputs: Outputs = field(default_factory=Outputs)
    stimulus_window_ns: int = DEFAULT_WINDOW_NS
    quote_settle_ns: Optional[int] = None
    race_spacing_ns: Optional[int] = None
    horizon_ns: Optional[int] = None
    delta_ns: int = 0
    market_data: bool = False
    tolerance: float = 0.02
    record_log: bool = False
    alternatives: dict[str, dict[str, Any]] = field(default_factory=dict)
    sweep_timer_ns: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.validate()

    # --- derived timing -------------------------------------------------
    @property
    def makers(self) -> list[AgentSpec]:
        return [a for a in self.agents if a.is_maker]

    @property
    def takers(self) -> list[AgentSpec]:
        return [a for a in self.agents if not a.is_maker]

    def _lead(self) -> int:
        return max((int(a.params.get("lead_ns", 0)) for a in self.agents), default=0)

    def settle(self) -> int:
        """Time between slot start and the earliest possible stimulus."""
        if self.quote_settle_ns is not None:
            return self.quote_settle_ns
        return max(self.policy.max_hold() + 1, self._lead()) + 1_000

    def tail(self) -> int:
        """Upper bound on how long a race can run after its stimulus."""
        worst = max((p.max_total() for p in self.latency_profiles.values()), default=0)
        hold = self.policy.max_hold()
        return self.delta_ns + worst + 2 * hold + 1_000

    def spacing(self) -> int:
        if self.race_spacing_ns is not None:
            return self.race_spacing_ns
        if self.horizon_ns is not None:
            return self.horizon_ns // self.races
        return self.settle() + self.stimulus_window_ns + self.tail()

    def firm_labels(self) -> dict[str, str]:
        """Agent name -> firm label: the agent's own name when it is the firm's
        only account, else ``firm<id>``."""
        accounts: dict[int, list[str]] = {}
        for a in self.agents:
            accounts.setdefault(a.firm, []).append(a.name)
        return {a.name: a.name if len(accounts[a.firm]) == 1 else f"firm{a.firm}" for a in self.agents}

    @property
    def horizon(self) -> int:
        return self.spacing() * self.races

    def validate(self) -> None:
        if self.races < 1:
            raise ConfigError("races must be >= 1")
        if self.policy.name not in POLICY_PARAMS:
            raise ConfigError(f"unknown policy {self.policy.name!r}; expected one of {sorted(POLICY_PARAMS)}")
        unknown = set(self.policy.params) - set(POLICY_PARAMS[self.policy.name])
        if unknown:
            raise ConfigError(f"unknown parameters {sorted(unknown)} for policy {self.policy.name}")
        if not self.instruments:
            raise ConfigError("at least one instrument is required")
        if len(self.makers) != 1:
            raise ConfigError("exactly one passive_maker agent must provide the contested quote")
        if not self.takers:
            raise ConfigError("at least one taker agent is required")
        names = [a.name for a in self.agents]
        if len(set(names)) != len(names):
            raise ConfigError("agent names must be unique")
        if len({a.account for a in self.agents}) != len(self.agents):
            raise ConfigError("agent accounts must be unique")
        missing = [n for n in names if n not in self.latency_profiles]
        if missing:
            raise ConfigError(f"no latency profile for agents {missing}")
        if self.stimulus_window_ns < 1:
            raise ConfigError("stimulus_window_ns must be >= 1")
        if self.delta_ns < 0:
            raise ConfigError("delta_ns must be >= 0")
        if not 0 < self.tolerance < 1:
            raise ConfigError("tolerance must be within (0, 1)")
        try:
            build_policy(self.policy, self.seed)
        except ValueError as exc:
            raise ConfigError(f"policy {self.policy.name}: {exc}") from None
        if self.settle() < self._lead():
            raise ConfigError("quote_settle_ns must cover the largest placeholder lead_ns")
        need = self.settle() + self.stimulus_window_ns + self.tail()
        if self.spacing() < need:
            raise ConfigError(
                f"race spacing {self.spacing()} ns is shorter than one race needs ({need} ns); "
                "raise race_spacing_ns / horizon_ns or shrink stimulus_window_ns"
            )

    def with_policy(self, name: str, **params: Any) -> "ScenarioConfig":
        base = dict(self.alternatives.get(name, {})) if name != self.policy.name else dict(self.policy.params)
        base.update(params)
        clone = copy.copy(self)
        clone.policy = PolicySpec(name, base)
        clone.validate()
        return clone

    def replace(self, **changes: Any) -> "ScenarioConfig":
        clone = copy.copy(self)
        for k, v in changes.items():
            setattr(clone, k, v)
        clone.validate()
        return clone


def build_policy(spec: PolicySpec, seed: int) -> Policy:
    p = {**POLICY_PARAMS[spec.name], **spec.params}
    if spec.name == "fcfs":
        return FCFSPolicy()
    if spec.name == "constant_delay":
        return ConstantDelayPolicy(ConstantDelayConfig(int(p["delay_ns"]), bool(p["takers_only"])))
    if spec.name == "random_delay":
        return RandomDelayPolicy(RandomDelayConfig(int(p["max_delay_ns"]), seed))
    if spec.name == "fba":
        return FBAPolicy(FbaConfig(int(p["batch_ns"]), int(p["phase_ns"]), seed))
    merge = {int(k): int(v) for k, v in dict(p["firm_merge"]).items()}
    return LibraPolicy(
        LibraConfig(
            timer_T=int(p["timer_ns"]),
            firm_merge=merge,
            rng_seed=seed,
            cancel_exemption=bool(p["cancel_exemption"]),
            ioc_never_starts_timer=bool(p["ioc_never_starts_timer"]),
            merge_by_firm=bool(p["merge_by_firm"]),
        )
    )


# --- loading --------------------------------------------------------------

_TOP_KEYS = {
    "name", "seed", "races", "instruments", "stimulus_window_ns", "quote_settle_ns", "race_spacing_ns",
    "horizon_ns", "delta_ns", "market_data", "tolerance", "record_log", "policy", "policies", "agents",
    "latency", "outputs", "scenario", "sweep",
}


def locate(text: Optional[str], path: Sequence[Any]) -> Optional[int]:
    """Best-effort 1-based line of a key path such as ("agents", 1, "strategy")."""
    if not text or not path:
        return None
    lines = text.splitlines()
    pos = 0
    found = None
    table: list[str] = []
    for i, part in enumerate(path):
        if isinstance(part, int):
            header = re.compile(r"^\s*\[\[\s*" + re.escape(".".join(table)) + r"\s*\]\]")
            seen = -1
            for n in range(len(lines)):
                if header.match(lines[n]):
                    seen += 1
                    if seen == part:
                        pos, found = n, n + 1
                        break
            continue
        table.append(str(part))
        name = re.escape(str(part))
        pat = re.compile(
            r"^\s*(\[+\s*([\w\"-]+\.)*\"?" + name + r"\"?\s*(\.[\w\"-]+)*\s*\]+|\"?" + name + r"\"?\s*=)"
        )
        for n in range(pos, len(lines)):
            if pat.match(lines[n]):
                pos, found = n, n + 1
                break
    return found


def config_from_dict(data: dict, text: Optional[str] = None, source: Optional[str] = None) -> ScenarioConfig:
    def fail(msg: str, *path: Any) -> ConfigError:
        return ConfigError(msg, locate(text, path), source)

    data = copy.deepcopy(data)
    if "scenario" in data:  # allow a [scenario] table for the top-level keys
        data = {**data.pop("scenario"), **data}
    for key in data:
        if key not in _TOP_KEYS:
            raise fail(f"unknown key {key!r}", key)
    policy_tbl = data.get("policy")
    if not isinstance(policy_tbl, dict) or "name" not in policy_tbl:
        raise fail("a [policy] table with a name is required", "policy")
    policy_tbl = dict(policy_tbl)
    pname = str(policy_tbl.pop("name"))
    if pname not in POLICY_PARAMS:
        raise fail(f"unknown policy {pname!r}; expected one of {sorted(POLICY_PARAMS)}", "policy", "name")
    for k in policy_tbl:
        if k not in POLICY_PARAMS[pname]:
            raise fail(f"unknown parameter {k!r} for policy {pname}", "policy", k)
    alternatives = {str(k): dict(v) for k, v in data.get("policies", {}).items()}
    agents = []
    for i, a in enumerate(data.get("agents", [])):
        try:
            agents.append(AgentSpec.from_dict(a, i))
        except (AgentConfigError, ValueError, TypeError) as exc:
            raise fail(str(exc), "agents", i) from None
    profiles = {}
    for name, prof in data.get("latency", {}).items():
        try:
            profiles[str(name)] = LatencyProfile.from_dict(prof)
        except (ValueError, TypeError) as exc:
            raise fail(f"latency profile {name}: {exc}", "latency", name) from None
    races = data.get("races", 0)
    if not isinstance(races, int) or races < 1:
        raise fail("races must be an integer >= 1", "races")
    out = data.get("outputs", {})
    try:
        cfg = ScenarioConfig(
            name=str(data.get("name", "scenario")),
            policy=PolicySpec(pname, policy_tbl),
            instruments=[int(x) for x in data.get("instruments", [1])],
            agents=agents,
            latency_profiles=profiles,
            races=races,
            seed=int(data.get("seed", 0)),
            outputs=Outputs(out.get("event_log"), out.get("races_csv"), out.get("summary")),
            stimulus_window_ns=int(data.get("stimulus_window_ns", DEFAULT_WINDOW_NS)),
            quote_settle_ns=data.get("quote_settle_ns"),
            race_spacing_ns=data.get("race_spacing_ns"),
            horizon_ns=data.get("horizon_ns"),
            delta_ns=int(data.get("delta_ns", 0)),
            market_data=bool(data.get("market_data", False)),
            tolerance=float(data.get("tolerance", 0.02)),
            record_log=bool(data.get("record_log", False)),
            alternatives=alternatives,
            sweep_timer_ns=[int(t) for t in data.get("sweep", {}).get("timer_ns", [])],
        )
    except ConfigError as exc:
        if exc.line is None:
            key = _guess_key(exc.message)
            raise ConfigError(exc.message, locate(text, key) if key else None, source) from None
        raise
    return cfg


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Inverse of ``config_from_dict`` (defaults spelled out)."""
    d: dict[str, Any] = {
        "name": cfg.name,
        "seed": cfg.seed,
        "races": cfg.races,
        "instruments": list(cfg.instruments),
        "stimulus_window_ns": cfg.stimulus_window_ns,
        "delta_ns": cfg.delta_ns,
        "market_data": cfg.market_data,
        "tolerance": cfg.tolerance,
        "record_log": cfg.record_log,
        "policy": {"name": cfg.policy.name, **copy.deepcopy(cfg.policy.params)},
        "agents": [a.to_dict() for a in cfg.agents],
        "latency": {name: p.to_dict() for name, p in cfg.latency_profiles.items()},
    }
    for key in ("quote_settle_ns", "race_spacing_ns", "horizon_ns"):
        if getattr(cfg, key) is not None:
            d[key] = getattr(cfg, key)
    if cfg.alternatives:
        d["policies"] = copy.deepcopy(cfg.alternatives)
    if cfg.sweep_timer_ns:
        d["sweep"] = {"timer_ns": list(cfg.sweep_timer_ns)}
    out = {k: v for k, v in vars(cfg.outputs).items() if v is not None}
    if out:
        d["outputs"] = out
    return d


def _guess_key(message: str) -> Optional[tuple]:
    for key in ("races", "spacing", "tolerance", "instruments", "stimulus_window_ns", "delta_ns", "policy", "latency"):
        if key in message:
            return {"spacing": ("race_spacing_ns",)}.get(key, (key,))
    if "agent" in message or "maker" in message or "taker" in message:
        return ("agents", 0)
    return None


def apply_overrides(data: dict, overrides: dict[str, Any]) -> dict:
    """CLI overrides: seed, races, policy, timer_ns."""
    data = copy.deepcopy(data)
    if "scenario" in data:
        data = {**data.pop("scenario"), **data}
    for key in ("seed", "races"):
        if overrides.get(key) is not None:
            data[key] = overrides[key]
    if overrides.get("policy"):
        name = overrides["policy"]
        current = data.get("policy", {})
        if current.get("name") != name:
            params = dict(data.get("policies", {}).get(name, {}))
            data["policy"] = {"name": name, **params}
    if overrides.get("timer_ns") is not None:
        pol = dict(data.get("policy", {}))
        if pol.get("name") != "libra":
            raise ConfigError("--timer-ns only applies to the libra policy")
        pol["timer_ns"] = overrides["timer_ns"]
        data["policy"] = pol
    return data


def load_config(path: str | Path, overrides: Optional[dict[str, Any]] = None) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("file not found", source=str(path))
    text = path.read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"parse error: {exc}", int(m.group(1)) if m else None, str(path)) from None
    if overrides:
        data = apply_overrides(data, overrides)
    return config_from_dict(data, text, str(path))
