"""Command-line front end: ``fairmatch run|sweep|attacks|replay``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import harness, stats
from .core import ms
from .simnet.engine import RACE_COLUMNS, run_scenario
from .simnet.scenario import ConfigError, load_config

DEFAULT_SWEEP = [ms(t) for t in range(1, 11)]


def _say(args: argparse.Namespace, text: str) -> None:
    if not args.quiet:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _overrides(args: argparse.Namespace, timer: bool = True) -> dict[str, Any]:
    return {
        "seed": args.seed,
        "races": args.races,
        "policy": args.policy,
        "timer_ns": args.timer_ns if timer else None,
    }


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args))
    if args.log:
        cfg = cfg.replace(record_log=True)
    out = Path(args.out_dir)
    if args.engine == "batch":
        from .simnet.batch import run_batch_config

        res = run_batch_config(cfg)
        rows = res.rows()
        out.mkdir(parents=True, exist_ok=True)
        stem = cfg.name
        summary = {"scenario": cfg.name, "seed": cfg.seed, "engine": "batch",
                   "policy": {"name": cfg.policy.name, **cfg.policy.params},
                   "fairness": stats.summarize(rows, cfg.tolerance)}
        cols = [c for c in RACE_COLUMNS if c in rows[0]]
        stats.write_races_csv(out / f"{stem}.races.csv", rows, cols)
        (out / f"{stem}.summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        text = stats.render_text(summary)
        (out / f"{stem}.summary.txt").write_text(text)
        _say(args, text)
        return 0
    result = run_scenario(cfg)
    paths = harness.write_outputs(result, out)
    _say(args, stats.render_text(harness.scenario_summary(result)))
    _say(args, "wrote " + ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args, timer=False))
    if args.timer_ns is not None:
        values = [args.timer_ns]
    elif args.values:
        values = [int(v) for v in args.values.split(",")]
    else:
        values = cfg.sweep_timer_ns or DEFAULT_SWEEP
    rows = harness.sweep_batch_length(cfg, values)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = list(rows[0])
    stats.write_races_csv(out / f"{cfg.name}.sweep.csv", rows, cols)
    counts = [r["multi_participant_races"] for r in rows]
    summary = {
        "scenario": cfg.name,
        "seed": cfg.seed,
        "rows": rows,
        "multi_participant_non_decreasing": harness.is_non_decreasing(counts),
        "growth_first_to_last": (counts[-1] / counts[0]) if counts[0] else None,
    }
    (out / f"{cfg.name}.sweep.json").write_text(json.dumps(summary, indent=2) + "\n")
    lines = [f"{'T_ns':>10} {'races':>7} {'multi':>7} {'contested':>10}"]
    lines += [f"{r['T_ns']:>10} {r['races']:>7} {r['multi_participant_races']:>7} {r['contested_quantity']:>10}"
              for r in rows]
    lines.append(f"non-decreasing in T: {summary['multi_participant_non_decreasing']}")
    text = "\n".join(lines) + "\n"
    (out / f"{cfg.name}.sweep.txt").write_text(text)
    _say(args, text)
    return 0


def load_battery(path: str, args: argparse.Namespace) -> dict[str, Any]:
    p = Path(path)
    if not p.exists():
        raise ConfigError("file not found", source=path)
    try:
        data = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}", source=path) from None
    bat = dict(data.get("battery", {}))
    unknown = set(bat) - {"name", "attacks", "races", "seed", "tolerance", "copies", "sybil_accounts"}
    if unknown:
        raise ConfigError(f"unknown battery keys {sorted(unknown)}", source=path)
    policies = {str(k): dict(v) for k, v in data.get("policies", {}).items()} or dict(harness.DEFAULT_POLICIES)
    for label, pol in policies.items():
        pol.setdefault("name", label)
    if args.policy:
        if args.policy not in policies:
            raise ConfigError(f"policy {args.policy!r} not in battery; have {sorted(policies)}", source=path)
        policies = {args.policy: policies[args.policy]}
    if args.timer_ns is not None:
        for pol in policies.values():
            if pol["name"] == "libra":
                pol["timer_ns"] = args.timer_ns
    return {
        "name": str(bat.get("name", p.stem)),
        "attacks": list(bat.get("attacks", harness.ATTACKS)),
        "policies": policies,
        "races": int(args.races if args.races is not None else bat.get("races", 20_000)),
        "seed": int(args.seed if args.seed is not None else bat.get("seed", 0)),
        "tolerance": float(bat.get("tolerance", 0.02)),
        "copies": int(bat.get("copies", 5)),
        "sybil_accounts": int(bat.get("sybil_accounts", 2)),
    }


def cmd_attacks(args: argparse.Namespace) -> int:
    b = load_battery(args.config, args)
    outcomes = harness.attack_battery(
        b["attacks"], b["policies"], b["races"], b["seed"], b["tolerance"], b["copies"], b["sybil_accounts"]
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = [o.to_dict() for o in outcomes]
    (out / f"{b['name']}.attacks.json").write_text(
        json.dumps({"battery": {k: v for k, v in b.items() if k != "policies"}, "policies": b["policies"],
                    "outcomes": table}, indent=2, default=str) + "\n")
    flat = [{"attack": o.attack, "policy": o.policy, "metric": o.metric, "attacked_rate": o.attacked.rate,
             "baseline_rate": "" if o.baseline is None else o.baseline.rate, "advantage": o.advantage,
             "threshold": o.threshold, "verdict": "resistant" if o.resistant else "vulnerable"} for o in outcomes]
    stats.write_races_csv(out / f"{b['name']}.attacks.csv", flat, list(flat[0]))
    text = harness.render_battery(outcomes)
    (out / f"{b['name']}.attacks.txt").write_text(text)
    _say(args, text)
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    rep = harness.replay(args.event_log)
    ok = rep.identical and not rep.latency_errors
    lines = [f"{rep.lines} records; re-simulation {'identical' if rep.identical else 'DIVERGES'}"]
    if rep.first_divergence is not None:
        lines.append(f"first differing record: line {rep.first_divergence}")
    lines.append(f"latency audit: {len(rep.latency_errors)} violations")
    lines += [f"  {e}" for e in rep.latency_errors[:10]]
    lines.append(stats.render_text(rep.summary))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{Path(args.event_log).stem}.replay.json").write_text(json.dumps({
        "lines": rep.lines, "identical": rep.identical, "first_divergence": rep.first_divergence,
        "latency_errors": rep.latency_errors, "fairness": rep.summary,
    }, indent=2) + "\n")
    _say(args, "\n".join(lines))
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--races", type=int, default=None, help="override the race count")
    common.add_argument("--out-dir", default="out", help="directory for reports (default: out)")
    common.add_argument("--policy", default=None, help="policy to run instead of the configured one")
    common.add_argument("--timer-ns", type=int, default=None, help="Libra batch timer T in ns")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")

    p = argparse.ArgumentParser(prog="fairmatch", description="Temporal-fairness exchange simulator.")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", parents=[common], help="run one scenario and write its reports")
    r.add_argument("config")
    r.add_argument("--log", action="store_true", help="also write the JSON-lines event log")
    r.add_argument("--engine", choices=("event", "batch"), default="event",
                   help="event: full simulator; batch: vectorized engine for simple taker races")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", parents=[common], help="rerun a Libra scenario over batch timer values")
    s.add_argument("config")
    s.add_argument("--values", default=None, help="comma-separated timer values in ns")
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("attacks", parents=[common], help="run the attack battery")
    a.add_argument("config")
    a.set_defaults(func=cmd_attacks)

    rp = sub.add_parser("replay", parents=[common], help="re-simulate an event log and audit it")
    rp.add_argument("event_log")
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
