"""Pure-Python kernels. Reference semantics for ``_ckernels.pyx``.

Array arguments may be numpy arrays or nested sequences; outputs are numpy
arrays so both implementations are interchangeable.
"""
from __future__ import annotations

import numpy as np

EMPTY = -1


def rr_drain_order(group, perm):
    """Round-robin drain order.

    ``group[i]`` is the group of the i-th buffered order, orders already
    sorted oldest first. ``perm`` lists group ids in draw order. Returns the
    order indices in forwarding sequence: each pass over ``perm`` pops the
    oldest remaining order of every non-empty group.
    """
    group = list(group)
    perm = list(perm)
    n_groups = max(max(group, default=-1), max(perm, default=-1)) + 1
    lists = [[] for _ in range(n_groups)]
    for i, g in enumerate(group):
        lists[g].append(i)
    heads = [0] * n_groups
    out = []
    left = len(group)
    while left:
        for g in perm:
            if heads[g] < len(lists[g]):
                out.append(lists[g][heads[g]])
                heads[g] += 1
                left -= 1
    return np.asarray(out, dtype=np.int64)


def resolve_races(arrival, release, tiebreak, agent):
    """Winner of each race row.

    The winner is the slot with the smallest (release, tiebreak, arrival,
    slot index) among non-empty slots (``agent >= 0``). ``cleared`` is the
    winner's release time and ``contending`` counts distinct agents whose
    arrival is at or before it.
    """
    arrival = np.asarray(arrival).tolist()
    release = np.asarray(release).tolist()
    tiebreak = np.asarray(tiebreak).tolist()
    agent = np.asarray(agent).tolist()
    n = len(agent)
    winner = [EMPTY] * n
    cleared = [0] * n
    contending = [0] * n
    for r in range(n):
        ag, ar, rl, tb = agent[r], arrival[r], release[r], tiebreak[r]
        best = -1
        for j in range(len(ag)):
            if ag[j] < 0:
                continue
            if best < 0 or (rl[j], tb[j], ar[j]) < (rl[best], tb[best], ar[best]):
                best = j
        if best < 0:
            continue
        winner[r] = ag[best]
        t = rl[best]
        cleared[r] = t
        seen = set()
        for j in range(len(ag)):
            if ag[j] >= 0 and ar[j] <= t:
                seen.add(ag[j])
        contending[r] = len(seen)
    return (
        np.asarray(winner, dtype=np.int32),
        np.asarray(cleared, dtype=np.int64),
        np.asarray(contending, dtype=np.int32),
    )


def libra_schedule(arrival, agent, agent_rank, timer):
    """Release times and within-drain ranks for order-triggered buffers.

    Per row, the earliest arrival opens a buffer that closes ``timer`` ns
    later (inclusive); the next arrival after the close opens the next one.
    Inside a buffer each agent's orders keep arrival order and the k-th
    order of an agent gets rank ``k * n_agents + agent_rank[agent]``, which
    reproduces the round-robin over a shuffled agent order.
    """
    arrival = np.asarray(arrival).tolist()
    agent = np.asarray(agent).tolist()
    agent_rank = np.asarray(agent_rank).tolist()
    n = len(agent)
    m = len(agent[0]) if n else 0
    release = [[0] * m for _ in range(n)]
    tiebreak = [[0] * m for _ in range(n)]
    for r in range(n):
        ag, ar, ranks = agent[r], arrival[r], agent_rank[r]
        n_agents = len(ranks)
        order = sorted((ar[j], j) for j in range(m) if ag[j] >= 0)
        deadline = None
        counts = [0] * n_agents
        for a, j in order:
            if deadline is None or a > deadline:
                deadline = a + timer
                counts = [0] * n_agents
            release[r][j] = deadline
            k = counts[ag[j]]
            counts[ag[j]] = k + 1
            tiebreak[r][j] = k * n_agents + ranks[ag[j]]
    return np.asarray(release, dtype=np.int64), np.asarray(tiebreak, dtype=np.int64)
