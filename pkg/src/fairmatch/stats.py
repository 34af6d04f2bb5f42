"""Fairness statistics computed from race rows.

Everything here takes the rows written to the races CSV (or the same dicts
straight from ``RaceRecord.to_row``), so a report can always be rebuilt
from the CSV alone.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Optional, Sequence

Z95 = 1.959963984540054


def wilson(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for k successes in n trials."""
    if n <= 0:
        return (0.0, 1.0)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass(frozen=True)
class Estimate:
    successes: int
    trials: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    @property
    def ci(self) -> tuple[float, float]:
        return wilson(self.successes, self.trials)

    @property
    def ci_width(self) -> float:
        lo, hi = self.ci
        return hi - lo

    def to_dict(self) -> dict[str, Any]:
        lo, hi = self.ci
        return {"successes": self.successes, "trials": self.trials, "rate": self.rate, "ci95": [lo, hi]}


@dataclass(frozen=True)
class Verdict:
    """A pass/fail check that always carries the bound and tolerance it used."""

    name: str
    measured: float
    target: float
    tolerance: float
    kind: str  # "within" (|measured - target| <= tol) or "at_most" (measured <= target + tol)

    @property
    def passed(self) -> bool:
        if math.isnan(self.measured):
            return False
        if self.kind == "within":
            return abs(self.measured - self.target) <= self.tolerance + 1e-12
        if self.kind == "at_most":
            return self.measured <= self.target + self.tolerance + 1e-12
        if self.kind == "exact":
            return self.measured == self.target
        raise ValueError(f"unknown verdict kind {self.kind!r}")

    def line(self) -> str:
        rel = {"within": f"= {self.target:.4f} +/- {self.tolerance}", "at_most": f"<= {self.target} + {self.tolerance}",
               "exact": f"== {self.target}"}[self.kind]
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.measured:.4f} (want {rel})"

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "measured": self.measured, "target": self.target,
                "tolerance": self.tolerance, "kind": self.kind, "passed": self.passed}


# --- rows ------------------------------------------------------------------

@dataclass(frozen=True)
class Race:
    firms: tuple[str, ...]
    arrivals: tuple[int, ...]
    winner: str
    multi_participant: bool
    cleared_at: Optional[int]


def _split(cell: Any) -> list[str]:
    cell = "" if cell is None else str(cell)
    return [x for x in cell.split(";") if x]


def parse_row(row: Mapping[str, Any]) -> Race:
    firms = tuple(_split(row["firms"]))
    arrivals = tuple(int(x) for x in _split(row["arrivals_ns"]))
    if len(firms) != len(arrivals):
        raise ValueError(f"row has {len(firms)} firms but {len(arrivals)} arrivals")
    cleared = row.get("cleared_ns", "")
    return Race(
        firms, arrivals, str(row.get("winner") or ""), bool(int(row["multi_participant"])),
        None if cleared in ("", None) else int(cleared),
    )


def write_races_csv(path, rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns))
        w.writeheader()
        for r in rows:
            w.writerow(r)


def read_races_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- statistics ------------------------------------------------------------

def win_rates(rows: Iterable[Mapping[str, Any]]) -> dict[str, Estimate]:
    """Share of all races won by each firm (unwon races count as ``""``)."""
    races = [parse_row(r) for r in rows]
    counts: dict[str, int] = {}
    names: set[str] = set()
    for r in races:
        counts[r.winner] = counts.get(r.winner, 0) + 1
        names.update(r.firms)
    names.update(k for k in counts if k)
    return {n: Estimate(counts.get(n, 0), len(races)) for n in sorted(names)}


def slower_beats_faster(rows: Iterable[Mapping[str, Any]]) -> dict[tuple[str, str], Estimate]:
    """Matrix keyed (slower, faster).

    Speed is decided per race by arrival. A race counts for a pair when
    both firms responded, their arrivals differ and one of the two won.
    """
    wins: dict[tuple[str, str], int] = {}
    trials: dict[tuple[str, str], int] = {}
    for row in rows:
        r = parse_row(row)
        if not r.winner or r.winner not in r.firms:
            continue
        w = r.firms.index(r.winner)
        tw = r.arrivals[w]
        for j, other in enumerate(r.firms):
            if j == w or r.arrivals[j] == tw:
                continue
            if r.arrivals[j] < tw:
                key = (r.winner, other)  # winner was slower
                wins[key] = wins.get(key, 0) + 1
            else:
                key = (other, r.winner)
            trials[key] = trials.get(key, 0) + 1
    return {k: Estimate(wins.get(k, 0), n) for k, n in sorted(trials.items())}


def multi_participant_count(rows: Iterable[Mapping[str, Any]]) -> int:
    return sum(1 for r in rows if int(r["multi_participant"]))


def fairness_verdicts(matrix: Mapping[tuple[str, str], Estimate], tolerance: float,
                      min_trials: int = 1) -> list[Verdict]:
    return [
        Verdict(f"slower {s} beats faster {f}", est.rate, 0.5, tolerance, "at_most")
        for (s, f), est in matrix.items()
        if est.trials >= min_trials
    ]


def summarize(rows: Sequence[Mapping[str, Any]], tolerance: float = 0.02) -> dict[str, Any]:
    """Fairness section of a report; a pure function of the race rows."""
    rows = list(rows)
    matrix = slower_beats_faster(rows)
    verdicts = fairness_verdicts(matrix, tolerance)
    return {
        "races": len(rows),
        "multi_participant_races": multi_participant_count(rows),
        "win_rates": {k: v.to_dict() for k, v in win_rates(rows).items()},
        "slower_beats_faster": [
            {"slower": s, "faster": f, **est.to_dict()} for (s, f), est in matrix.items()
        ],
        "tolerance": tolerance,
        "verdicts": [v.to_dict() for v in verdicts],
        "temporally_fair": all(v.passed for v in verdicts),
    }


def render_text(summary: Mapping[str, Any]) -> str:
    """Human-readable version of a run summary."""
    out = []
    head = summary.get("scenario")
    if head:
        out.append(f"scenario {head} policy {summary.get('policy', {}).get('name', '?')} "
                   f"seed {summary.get('seed')} races {summary['fairness']['races']}")
    fair = summary.get("fairness", summary)
    out.append(f"multi-participant races: {fair['multi_participant_races']}")
    out.append("win rates:")
    for name, est in fair["win_rates"].items():
        lo, hi = est["ci95"]
        out.append(f"  {name or '(none)':<10} {est['rate']:.4f}  [{lo:.4f}, {hi:.4f}]  n={est['trials']}")
    out.append(f"slower-beats-faster (fair iff <= 0.5 + {fair['tolerance']}):")
    if not fair["slower_beats_faster"]:
        out.append("  (no pair ever contended)")
    for cell in fair["slower_beats_faster"]:
        lo, hi = cell["ci95"]
        ok = "PASS" if cell["rate"] <= 0.5 + fair["tolerance"] + 1e-12 else "FAIL"
        out.append(f"  {ok} {cell['slower']} over {cell['faster']}: {cell['rate']:.4f} "
                   f"[{lo:.4f}, {hi:.4f}] n={cell['trials']}")
    counters = summary.get("venue")
    if counters:
        out.append("venue counters: " + ", ".join(f"{k}={v}" for k, v in counters.items()))
    return "\n".join(out) + "\n"
