"""Scenario batteries and reports: runs, replicas, the batch-length sweep,
the attack battery and event-log replay."""
from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from . import stats
from .core import ms
from .simnet.agents import Strategy
from .simnet.engine import RACE_COLUMNS, ScenarioResult, run_scenario
from .simnet.latency import Jitter, LatencyProfile
from .simnet.presets import build, maker, sniping, taker, two_takers
from .simnet.scenario import ConfigError, ScenarioConfig, config_from_dict


# --- single runs -----------------------------------------------------------

def scenario_summary(result: ScenarioResult, rows: Optional[list[dict]] = None) -> dict[str, Any]:
    cfg = result.config
    rows = rows if rows is not None else result.rows()
    return {
        "scenario": cfg.name,
        "seed": cfg.seed,
        "policy": result.policy,
        "fairness": stats.summarize(rows, cfg.tolerance),
        "venue": dataclasses.asdict(result.stats),
    }


def write_outputs(result: ScenarioResult, out_dir: str | Path, stem: Optional[str] = None) -> dict[str, Path]:
    """Races CSV, summary (text and JSON), book snapshot and, when recorded, the event log."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = stem or result.config.name
    rows = result.rows()
    summary = scenario_summary(result, rows)
    paths = {
        "races_csv": out / f"{stem}.races.csv",
        "summary_txt": out / f"{stem}.summary.txt",
        "summary_json": out / f"{stem}.summary.json",
        "books_json": out / f"{stem}.books.json",
    }
    stats.write_races_csv(paths["races_csv"], rows, RACE_COLUMNS)
    paths["summary_txt"].write_text(stats.render_text(summary))
    paths["summary_json"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    paths["books_json"].write_text(json.dumps(result.books, indent=2) + "\n")
    if result.log is not None:
        paths["event_log"] = out / f"{stem}.events.jsonl"
        write_log(paths["event_log"], result.log)
    return paths


def write_log(path: str | Path, lines: Iterable[str]) -> None:
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


# --- replicas --------------------------------------------------------------

def _run_one(args: tuple[ScenarioConfig, int]) -> ScenarioResult:
    cfg, seed = args
    return run_scenario(cfg, seed=seed)


def run_replicas(cfg: ScenarioConfig, seeds: Sequence[int], workers: int = 1) -> list[ScenarioResult]:
    """One independent simulator per seed; results come back in seed order."""
    jobs = [(cfg, s) for s in seeds]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def merged_rows(results: Iterable[ScenarioResult]) -> list[dict[str, Any]]:
    rows: list[dict[str, Any]] = []
    for r in results:
        rows.extend(r.rows())
    return rows


# --- batch-length sweep ----------------------------------------------------

def sweep_batch_length(base: ScenarioConfig, timer_values: Sequence[int],
                       races: Optional[int] = None) -> list[dict[str, Any]]:
    """Rerun one Libra population for each timer value.

    Slot length and settle time are pinned to the largest timer so every
    run sees the same stimuli and the same latency draws; only T moves.
    """
    if base.policy.name != "libra":
        raise ConfigError("the batch-length sweep needs a libra base scenario")
    if not timer_values:
        raise ConfigError("the sweep needs at least one timer value")
    if races is not None:
        base = base.replace(races=races)
    widest = base.with_policy("libra", timer_ns=max(timer_values))
    pinned = base.replace(quote_settle_ns=widest.settle(), race_spacing_ns=widest.spacing())
    rows = []
    first = None
    for t in timer_values:
        res = run_scenario(pinned.with_policy("libra", timer_ns=int(t)))
        multi = [r for r in res.races if r.multi_participant]
        count = len(multi)
        first = count if first is None else first
        rows.append({
            "T_ns": int(t),
            "races": len(res.races),
            "multi_participant_races": count,
            "contested_quantity": sum(r.quantity for r in multi),
            "growth_vs_first": (count / first) if first else "",
        })
    return rows


def is_non_decreasing(values: Sequence[float]) -> bool:
    return all(b >= a for a, b in zip(values, values[1:]))


# --- attack battery --------------------------------------------------------

ATTACKS = ("duplicates", "placeholding", "sybil", "sniping")

DEFAULT_POLICIES: dict[str, dict[str, Any]] = {
    "fcfs": {"name": "fcfs"},
    "random_delay": {"name": "random_delay", "max_delay_ns": ms(2)},
    "fba": {"name": "fba", "batch_ns": ms(2)},
    "libra": {"name": "libra", "timer_ns": ms(1), "merge_by_firm": True},
}


@dataclass
class AttackOutcome:
    attack: str
    policy: str
    metric: str
    attacked: stats.Estimate
    baseline: Optional[stats.Estimate]
    tolerance: float
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def advantage(self) -> float:
        base = self.baseline.rate if self.baseline is not None else 0.0
        return self.attacked.rate - base

    @property
    def threshold(self) -> float:
        """Advantage above this marks the policy vulnerable: the larger of
        the tolerance and the 95% interval width of the attacked rate."""
        return max(self.tolerance, self.attacked.ci_width)

    @property
    def resistant(self) -> bool:
        ok = self.advantage <= self.threshold
        if "cross_buffer_timer_triggers" in self.extra:
            ok = ok and self.extra["cross_buffer_timer_triggers"] == 0
        return ok

    def to_dict(self) -> dict[str, Any]:
        return {
            "attack": self.attack,
            "policy": self.policy,
            "metric": self.metric,
            "attacked": self.attacked.to_dict(),
            "baseline": None if self.baseline is None else self.baseline.to_dict(),
            "advantage": self.advantage,
            "threshold": self.threshold,
            "tolerance": self.tolerance,
            "verdict": "resistant" if self.resistant else "vulnerable",
            **self.extra,
        }


def _params(policy: dict[str, Any]) -> tuple[str, dict[str, Any]]:
    p = dict(policy)
    return p.pop("name"), p


def _rate(res: ScenarioResult, who: str, by: str = "account") -> stats.Estimate:
    return stats.Estimate(res.win_counts(by).get(who, 0), len(res.races))


def duplicates_attack(policy: dict[str, Any], races: int, seed: int, copies: int = 5,
                      tolerance: float = 0.02) -> AttackOutcome:
    """Slower P2 sends ``copies`` identical orders instead of one."""
    name, params = _params(policy)
    base = run_scenario(two_takers(name, races=races, seed=seed, **params))
    att = run_scenario(two_takers(name, races=races, seed=seed, p2_copies=copies, **params))
    return AttackOutcome("duplicates", policy.get("label", name), "P2 win rate",
                         _rate(att, "P2"), _rate(base, "P2"), tolerance, {"copies": copies})


def sybil_scenario(policy: dict[str, Any], races: int, seed: int, accounts: int = 2) -> ScenarioConfig:
    """Honest firm H against firm 7 trading through ``accounts`` accounts; equal base latency,
    independent gateway jitter so arrivals differ."""
    name, params = _params(policy)
    jit = {"gateway": Jitter("uniform", a=0, b=200_000)}
    agents = [maker(), taker("H", 1)]
    lat = {"H": LatencyProfile(reaction_L=ms(2), jitter=jit)}
    for i in range(accounts):
        acct = f"A{i + 1}"
        agents.append(taker(acct, 10 + i, firm=7))
        lat[acct] = LatencyProfile(reaction_L=ms(2), jitter=jit)
    return build(name, agents, lat, races, seed, name=f"sybil_{name}", policy_params=params)


def sybil_attack(policy: dict[str, Any], races: int, seed: int, accounts: int = 2,
                 tolerance: float = 0.02) -> AttackOutcome:
    base = run_scenario(sybil_scenario(policy, races, seed, 1))
    att = run_scenario(sybil_scenario(policy, races, seed, accounts))
    # with one account the firm label is the account name
    return AttackOutcome("sybil", policy.get("label", policy["name"]), "attacking firm win rate",
                         _rate(att, "firm7", "firm"), _rate(base, "A1", "firm"), tolerance,
                         {"accounts": accounts})


def placeholding_scenario(policy: dict[str, Any], races: int, seed: int, attack: bool = True) -> ScenarioConfig:
    """Honest H at 2 ms against A at 2.5 ms; A may park a far-from-market bid ahead of the stimulus."""
    name, params = _params(policy)
    a = taker("A", 2, strategy=Strategy.PLACEHOLDER) if attack else taker("A", 2)
    lat = {"H": LatencyProfile(reaction_L=ms(2)), "A": LatencyProfile(reaction_L=ms(2.5))}
    return build(name, [maker(), taker("H", 1), a], lat, races, seed, name=f"placeholding_{name}",
                 policy_params=params)


def placeholding_attack(policy: dict[str, Any], races: int, seed: int, tolerance: float = 0.02) -> AttackOutcome:
    base = run_scenario(placeholding_scenario(policy, races, seed, attack=False))
    att = run_scenario(placeholding_scenario(policy, races, seed, attack=True))
    extra = {}
    if policy["name"] == "libra":
        extra["cross_buffer_timer_triggers"] = att.stats.cross_buffer_timer_triggers
    return AttackOutcome("placeholding", policy.get("label", policy["name"]), "A win rate",
                         _rate(att, "A"), _rate(base, "A"), tolerance, extra)


def sniping_attack(policy: dict[str, Any], races: int, seed: int, tolerance: float = 0.02) -> AttackOutcome:
    """Sniper at 1 ms against a maker pulling its stale offer at 1.5 ms."""
    name, params = _params(policy)
    if name == "libra":
        params.pop("merge_by_firm", None)
        cfg = sniping(races=races, seed=seed, timer_ns=int(params.pop("timer_ns", ms(1))), **params)
    else:
        cfg = sniping(races=races, seed=seed, policy=name, **params)
    res = run_scenario(cfg)
    fills = stats.Estimate(res.stats.quote_fills, len(res.races))
    return AttackOutcome(
        "sniping", policy.get("label", name), "stale-quote fill rate", fills, None, tolerance,
        {"cancel_overtakes": res.stats.cancel_overtakes, "matches_prevented": res.stats.matches_prevented},
    )


def attack_battery(
    attacks: Sequence[str] = ATTACKS,
    policies: Optional[dict[str, dict[str, Any]]] = None,
    races: int = 20_000,
    seed: int = 0,
    tolerance: float = 0.02,
    copies: int = 5,
    sybil_accounts: int = 2,
) -> list[AttackOutcome]:
    policies = policies or DEFAULT_POLICIES
    unknown = set(attacks) - set(ATTACKS)
    if unknown:
        raise ConfigError(f"unknown attacks {sorted(unknown)}; expected some of {list(ATTACKS)}")
    out = []
    for attack in attacks:
        for label, pol in policies.items():
            pol = {**pol, "label": label}
            clean = {k: v for k, v in pol.items() if k != "label"}
            if attack == "duplicates":
                o = duplicates_attack(clean, races, seed, copies, tolerance)
            elif attack == "sybil":
                o = sybil_attack(clean, races, seed, sybil_accounts, tolerance)
            elif attack == "placeholding":
                o = placeholding_attack(clean, races, seed, tolerance)
            else:
                o = sniping_attack(clean, races, seed, tolerance)
            o.policy = label
            out.append(o)
    return out


def render_battery(outcomes: Sequence[AttackOutcome]) -> str:
    lines = [f"{'attack':<13} {'policy':<14} {'attacked':>9} {'baseline':>9} {'advantage':>10} "
             f"{'threshold':>10}  verdict"]
    for o in outcomes:
        base = "" if o.baseline is None else f"{o.baseline.rate:.4f}"
        lines.append(f"{o.attack:<13} {o.policy:<14} {o.attacked.rate:>9.4f} {base:>9} {o.advantage:>10.4f} "
                     f"{o.threshold:>10.4f}  {'resistant' if o.resistant else 'VULNERABLE'}")
        for k, v in o.extra.items():
            lines.append(f"{'':<28}{k}={v}")
    return "\n".join(lines) + "\n"


# --- replay ----------------------------------------------------------------

def audit_latency(records: Iterable[dict[str, Any]]) -> list[str]:
    """Check arrived_at = stimulus + legs + jitter for every logged reaction order."""
    errors = []
    for rec in records:
        if rec.get("kind") != "arrival" or "legs" not in rec:
            continue
        want = rec["stimulus_at"] + sum(rec["legs"].values()) + sum(rec["jitter"].values())
        got = rec["order"]["arrived_at"]
        if got != want:
            errors.append(f"order {rec['order']['seq']}: arrived_at {got} != {want}")
    return errors


@dataclass
class ReplayReport:
    lines: int
    identical: bool
    first_divergence: Optional[int]
    latency_errors: list[str]
    summary: dict[str, Any]


def replay(path: str | Path) -> ReplayReport:
    """Re-simulate an event log from its header and compare byte for byte."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("file not found", source=str(path))
    original = path.read_text().splitlines()
    if not original:
        raise ConfigError("empty event log", source=str(path))
    try:
        header = json.loads(original[0])
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad JSON: {exc.msg}", 1, str(path)) from None
    if header.get("kind") != "header":
        raise ConfigError("first record is not a header", 1, str(path))
    cfg = config_from_dict(header["config"], source=str(path))
    fresh = run_scenario(cfg, record_log=True)
    first = None
    for i, (a, b) in enumerate(zip(original, fresh.log)):
        if a != b:
            first = i + 1
            break
    if first is None and len(original) != len(fresh.log):
        first = min(len(original), len(fresh.log)) + 1
    records = [json.loads(line) for line in original]
    rows = [{k: v for k, v in r.items() if k != "kind"} for r in records if r.get("kind") == "race"]
    return ReplayReport(
        lines=len(original),
        identical=first is None,
        first_divergence=first,
        latency_errors=audit_latency(records),
        summary=stats.summarize(rows, cfg.tolerance),
    )
