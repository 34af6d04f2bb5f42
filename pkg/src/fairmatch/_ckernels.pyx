# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``. Same signatures, same outputs."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.int32_t i32


def rr_drain_order(group, perm):
    cdef i64[::1] g = np.ascontiguousarray(group, dtype=np.int64)
    cdef i64[::1] p = np.ascontiguousarray(perm, dtype=np.int64)
    cdef Py_ssize_t n = g.shape[0], npm = p.shape[0], i, j, k
    cdef i64 n_groups = 0
    for i in range(n):
        if g[i] + 1 > n_groups:
            n_groups = g[i] + 1
    for i in range(npm):
        if p[i] + 1 > n_groups:
            n_groups = p[i] + 1
    # bucket by counting sort, stable
    cdef i64[::1] start = np.zeros(n_groups + 1, dtype=np.int64)
    cdef i64[::1] head = np.zeros(n_groups, dtype=np.int64)
    cdef i64[::1] members = np.empty(n, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    cdef i64[::1] o = out
    for i in range(n):
        start[g[i] + 1] += 1
    for k in range(n_groups):
        start[k + 1] += start[k]
    for k in range(n_groups):
        head[k] = start[k]
    for i in range(n):
        members[head[g[i]]] = i
        head[g[i]] += 1
    for k in range(n_groups):
        head[k] = start[k]
    cdef Py_ssize_t left = n, pos = 0
    while left:
        for j in range(npm):
            k = p[j]
            if head[k] < start[k + 1]:
                o[pos] = members[head[k]]
                pos += 1
                head[k] += 1
                left -= 1
    return out


def resolve_races(arrival, release, tiebreak, agent):
    cdef i64[:, ::1] ar = np.ascontiguousarray(arrival, dtype=np.int64)
    cdef i64[:, ::1] rl = np.ascontiguousarray(release, dtype=np.int64)
    cdef i64[:, ::1] tb = np.ascontiguousarray(tiebreak, dtype=np.int64)
    cdef i32[:, ::1] ag = np.ascontiguousarray(agent, dtype=np.int32)
    cdef Py_ssize_t n = ag.shape[0], m = ag.shape[1], r, j, q, best
    winner = np.full(n, -1, dtype=np.int32)
    cleared = np.zeros(n, dtype=np.int64)
    contending = np.zeros(n, dtype=np.int32)
    cdef i32[::1] w = winner
    cdef i64[::1] c = cleared
    cdef i32[::1] cnt = contending
    cdef i64 t
    cdef int distinct, dup
    for r in range(n):
        best = -1
        for j in range(m):
            if ag[r, j] < 0:
                continue
            if best < 0:
                best = j
            elif rl[r, j] < rl[r, best] or (
                rl[r, j] == rl[r, best] and (
                    tb[r, j] < tb[r, best] or (tb[r, j] == tb[r, best] and ar[r, j] < ar[r, best])
                )
            ):
                best = j
        if best < 0:
            continue
        w[r] = ag[r, best]
        t = rl[r, best]
        c[r] = t
        distinct = 0
        for j in range(m):
            if ag[r, j] < 0 or ar[r, j] > t:
                continue
            dup = 0
            for q in range(j):
                if ag[r, q] == ag[r, j] and ar[r, q] <= t:
                    dup = 1
                    break
            if not dup:
                distinct += 1
        cnt[r] = distinct
    return winner, cleared, contending


def libra_schedule(arrival, agent, agent_rank, long timer):
    cdef i64[:, ::1] ar = np.ascontiguousarray(arrival, dtype=np.int64)
    cdef i32[:, ::1] ag = np.ascontiguousarray(agent, dtype=np.int32)
    cdef i64[:, ::1] rk = np.ascontiguousarray(agent_rank, dtype=np.int64)
    cdef Py_ssize_t n = ag.shape[0], m = ag.shape[1], n_agents = rk.shape[1]
    cdef Py_ssize_t r, j, idx, a_id
    release = np.zeros((n, m), dtype=np.int64)
    tiebreak = np.zeros((n, m), dtype=np.int64)
    cdef i64[:, ::1] rel = release
    cdef i64[:, ::1] tie = tiebreak
    cdef i64[::1] counts = np.zeros(n_agents, dtype=np.int64)
    cdef i64[::1] keys = np.zeros(m, dtype=np.int64)
    cdef i64[::1] slots = np.zeros(m, dtype=np.int64)
    cdef Py_ssize_t live, x, y
    cdef i64 deadline, kk, ks, a
    cdef bint opened
    for r in range(n):
        live = 0
        for j in range(m):
            if ag[r, j] >= 0:
                keys[live] = ar[r, j]
                slots[live] = j
                live += 1
        # insertion sort on (arrival, slot); rows are short
        for x in range(1, live):
            kk = keys[x]
            ks = slots[x]
            y = x - 1
            while y >= 0 and (keys[y] > kk or (keys[y] == kk and slots[y] > ks)):
                keys[y + 1] = keys[y]
                slots[y + 1] = slots[y]
                y -= 1
            keys[y + 1] = kk
            slots[y + 1] = ks
        opened = False
        deadline = 0
        for idx in range(live):
            a = keys[idx]
            j = slots[idx]
            if not opened or a > deadline:
                opened = True
                deadline = a + timer
                for a_id in range(n_agents):
                    counts[a_id] = 0
            rel[r, j] = deadline
            a_id = ag[r, j]
            tie[r, j] = counts[a_id] * n_agents + rk[r, a_id]
            counts[a_id] += 1
    return release, tiebreak
