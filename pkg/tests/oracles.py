"""Independent reference implementations used only by the tests.

Each one is written the slow, obvious way and shares no code with the
package beyond the value types.
"""
from __future__ import annotations

import itertools
from collections import Counter
from fractions import Fraction


# --- matching ---------------------------------------------------------------

class OracleBook:
    """Price-time priority by exhaustive search over a flat list of resting orders."""

    def __init__(self):
        self.resting = []  # dicts: seq, side, price, qty, t (forwarding index)
        self.t = 0

    def submit(self, seq, side, otype, price, qty):
        """Returns [(taker, maker, price, qty)]."""
        self.t += 1
        fills = []
        while qty > 0:
            contra = [r for r in self.resting if r["side"] != side]
            if otype != "Market":
                contra = [r for r in contra if (r["price"] <= price if side == "Buy" else r["price"] >= price)]
            if not contra:
                break
            if side == "Buy":
                best = min(contra, key=lambda r: (r["price"], r["t"]))
            else:
                best = min(contra, key=lambda r: (-r["price"], r["t"]))
            q = min(qty, best["qty"])
            fills.append((seq, best["seq"], best["price"], q))
            best["qty"] -= q
            qty -= q
            if best["qty"] == 0:
                self.resting.remove(best)
        if qty > 0 and otype == "Limit":
            self.resting.append({"seq": seq, "side": side, "price": price, "qty": qty, "t": self.t})
        return fills

    def cancel(self, target):
        for r in self.resting:
            if r["seq"] == target:
                self.resting.remove(r)
                return True
        return False

    def best(self, side):
        px = [r["price"] for r in self.resting if r["side"] == side]
        if not px:
            return None
        return max(px) if side == "Buy" else min(px)


# --- Libra drain ----------------------------------------------------------------

def drain_outcomes(orders):
    """All round-robin outputs over every firm permutation, with multiplicity.

    ``orders`` is a list of (firm, arrived_at, seq). Returns a Counter of
    output tuples of seqs; each firm permutation contributes one count.
    """
    firms = sorted({f for f, _, _ in orders})
    per = {f: sorted((a, s) for g, a, s in orders if g == f) for f in firms}
    out = Counter()
    for perm in itertools.permutations(firms):
        queues = {f: list(per[f]) for f in firms}
        seq = []
        while any(queues.values()):
            for f in perm:
                if queues[f]:
                    seq.append(queues[f].pop(0)[1])
        out[tuple(seq)] += 1
    return out


# --- analytic race probabilities --------------------------------------------------

def random_delay_p2_win(dtau: int, D: int, copies: int = 1) -> Fraction:
    """Exact P(P2 wins) with integer delays uniform on {0..D}, P1 arriving dtau earlier.

    P2's release is dtau + min of ``copies`` draws; ties go to the earlier arrival (P1).
    Enumerates P1's delay and P2's minimum.
    """
    n = D + 1
    total = Fraction(0)
    for u1 in range(n):
        # P2 needs dtau + m < u1, i.e. m <= u1 - dtau - 1
        top = u1 - dtau - 1
        if top < 0:
            continue
        p_min_le = 1 - Fraction(max(0, n - (top + 1)), n) ** copies
        total += p_min_le
    return total / n


def fba_p2_win(L: int, dtau: int, step: int = 1) -> Fraction:
    """P(P2 wins) by enumerating stimulus phases on a grid over one batch interval."""
    wins = Fraction(0)
    count = 0
    for phase in range(0, L, step):
        same = (phase + dtau) < L  # P2 still inside P1's half-open batch
        wins += Fraction(1, 2) if same else 0
        count += 1
    return wins / count
