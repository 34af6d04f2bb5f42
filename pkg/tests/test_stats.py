import math

import pytest
from hypothesis import given, strategies as st
from scipy.stats import binomtest

from fairmatch import stats


@given(st.integers(1, 5000), st.data())
def test_wilson_matches_scipy(n, data):
    k = data.draw(st.integers(0, n))
    ci = binomtest(k, n).proportion_ci(0.95, method="wilson")
    lo, hi = stats.wilson(k, n)
    assert math.isclose(lo, ci.low, abs_tol=1e-9) and math.isclose(hi, ci.high, abs_tol=1e-9)


def row(firms, arrivals, winner, multi=1):
    return {"firms": ";".join(firms), "arrivals_ns": ";".join(map(str, arrivals)), "winner": winner,
            "multi_participant": multi, "cleared_ns": ""}


def test_pair_matrix_counts_only_pair_wins():
    rows = [
        row(["A", "B"], [1, 2], "A"),
        row(["A", "B"], [1, 2], "B"),
        row(["B", "A"], [1, 2], "A"),  # roles swapped this race
        row(["A", "B", "C"], [1, 2, 3], "C"),
        row(["A", "B"], [5, 5], "A"),  # equal arrivals say nothing about speed
        row([], [], "", 0),
    ]
    m = stats.slower_beats_faster(rows)
    assert m[("B", "A")] == stats.Estimate(1, 2)
    assert m[("A", "B")] == stats.Estimate(1, 1)
    assert m[("C", "A")] == stats.Estimate(1, 1) and m[("C", "B")] == stats.Estimate(1, 1)
    # C lost nothing it ever raced against as the slower... winners only
    assert ("A", "C") not in m


def test_win_rates_and_summary():
    rows = [row(["A", "B"], [1, 2], "A")] * 3 + [row(["A", "B"], [1, 2], "B")]
    s = stats.summarize(rows, tolerance=0.02)
    assert s["win_rates"]["A"]["rate"] == 0.75
    assert s["slower_beats_faster"][0]["rate"] == 0.25
    assert s["temporally_fair"] and s["verdicts"][0]["tolerance"] == 0.02
    text = stats.render_text({"fairness": s})
    assert "PASS B over A" in text and "0.5 + 0.02" in text


def test_verdict_cites_tolerance():
    v = stats.Verdict("x", 0.53, 0.5, 0.02, "at_most")
    assert not v.passed and "0.02" in v.line() and v.to_dict()["tolerance"] == 0.02
    assert stats.Verdict("y", 0.76, 0.75, 0.02, "within").passed
    assert stats.Verdict("z", 0.0, 0.0, 0.0, "exact").passed
    assert not stats.Verdict("n", float("nan"), 0.5, 0.02, "at_most").passed


def test_parse_row_rejects_mismatch():
    with pytest.raises(ValueError):
        stats.parse_row(row(["A"], [1, 2], "A"))


def test_estimate_frequencies_in_unit_interval():
    e = stats.Estimate(3, 10)
    lo, hi = e.ci
    assert 0 <= lo <= e.rate <= hi <= 1
